import math

import numpy as np
import pytest

from haltonmask.errors import InvalidArgumentError
from haltonmask.schedule.plan import PlanShape, StepSizePlan, step_size_plan
from haltonmask.schedule.schedulers import halton_schedule, random_schedule, raster_schedule, schedule_from_steps
from haltonmask.sequence.gridmap import Coord, GridSpec
from haltonmask.toy.infotheory import (
    aggregate_mi,
    aggregate_mi_along,
    entropy,
    expected_conditional_entropies,
    kl_divergence,
    step_mi,
    total_correlation,
)
from haltonmask.toy.model import MaskState, ToyJointModel, exact_conditional_marginal, joint_table

grid_2x2 = GridSpec(height=2, width=2)


def make_model(grid: GridSpec, **kwargs) -> ToyJointModel:
    return ToyJointModel(grid=grid, **kwargs)


@pytest.mark.parametrize(
    "dist, result",
    [
        ([0.25, 0.25, 0.25, 0.25], math.log(4)),
        ([1.0, 0.0, 0.0], 0.0),
        ([0.75, 0.25], 0.5623351446188083),
        ([[0.5, 0.0], [0.0, 0.5]], math.log(2)),
    ],
)
def test_entropy(dist, result: float):
    assert entropy(dist) == pytest.approx(result, abs=1e-12)


@pytest.mark.parametrize(
    "p, q, result",
    [
        ([0.3, 0.7], [0.3, 0.7], 0.0),
        ([1.0, 0.0], [0.5, 0.5], math.log(2)),
        ([0.9, 0.1], [0.5, 0.5], 0.3680642071684971),
    ],
)
def test_kl_divergence(p, q, result: float):
    assert kl_divergence(p, q) == pytest.approx(result, abs=1e-12)


@pytest.mark.parametrize(
    "p, q",
    [
        ([0.5, 0.5], [1.0, 0.0]),
        ([0.5, 0.5], [0.2, 0.3, 0.5]),
        ([0.6, 0.6], [0.5, 0.5]),
        ([1.2, -0.2], [0.5, 0.5]),
    ],
)
def test_kl_divergence_raises(p, q):
    with pytest.raises(InvalidArgumentError):
        kl_divergence(p, q)


def test_entropy_raises():
    with pytest.raises(InvalidArgumentError):
        entropy([0.2, 0.2])


def test_step_mi_singleton_is_zero():
    model = make_model(grid_2x2)
    result = step_mi(model, MaskState.initial(grid_2x2), [Coord(0, 0)])

    assert result.kl_joint_vs_product == pytest.approx(0.0, abs=1e-15)


def test_step_mi_zero_coupling():
    model = make_model(grid_2x2, coupling=0.0)
    result = step_mi(model, MaskState.initial(grid_2x2), list(grid_2x2.cells()))

    assert result.kl_joint_vs_product == pytest.approx(0.0, abs=1e-12)


def test_step_mi_adjacent_corners():
    model = make_model(grid_2x2)
    result = step_mi(model, MaskState.initial(grid_2x2), [Coord(0, 0), Coord(0, 1)])

    # both marginals are uniform, so MI = log 2 - H(p_equal)
    pair = joint_table(model).marginal([0, 1])
    p_equal = pair[0, 0] + pair[1, 1]
    expected = math.log(2) + p_equal * math.log(p_equal) + (1 - p_equal) * math.log(1 - p_equal)

    assert result.kl_joint_vs_product > 0
    assert result.kl_joint_vs_product == pytest.approx(expected, abs=1e-12)
    assert result.residual == pytest.approx(-result.joint_entropy, abs=1e-12)
    assert result.marginal_entropy_sum == pytest.approx(2 * math.log(2), abs=1e-12)


def test_step_mi_decreases_along_a_chain():
    grid = GridSpec(height=1, width=4)
    model = make_model(grid)
    state = MaskState.initial(grid)

    values = [step_mi(model, state, [Coord(0, 0), Coord(0, col)]).kl_joint_vs_product for col in (1, 2, 3)]

    assert values[0] > values[1] > values[2] > 0


def test_step_mi_adjacent_exceeds_diagonal():
    model = make_model(grid_2x2)
    state = MaskState.initial(grid_2x2)

    adjacent = step_mi(model, state, [Coord(0, 0), Coord(0, 1)]).kl_joint_vs_product
    diagonal = step_mi(model, state, [Coord(0, 0), Coord(1, 1)]).kl_joint_vs_product

    assert adjacent > diagonal > 0


def test_step_mi_decreases_away_from_revealed_center():
    grid = GridSpec(height=3, width=3)
    model = make_model(grid)
    state = MaskState.from_values(grid, {Coord(1, 1): 0})

    near = step_mi(model, state, [Coord(0, 1), Coord(1, 0)]).kl_joint_vs_product
    far = step_mi(model, state, [Coord(0, 1), Coord(2, 1)]).kl_joint_vs_product

    assert near > far >= 0


@pytest.mark.parametrize(
    "model",
    [
        make_model(grid_2x2),
        make_model(grid_2x2, vocab_size=3, coupling=0.5),
        make_model(GridSpec(height=3, width=3), coupling=1.0),
    ],
)
def test_singleton_schedule_is_free(model: ToyJointModel):
    schedule = halton_schedule(model.grid, step_size_plan(model.n, model.n))

    assert aggregate_mi(model, schedule) <= 1e-12


@pytest.mark.parametrize(
    "model",
    [
        make_model(grid_2x2),
        make_model(grid_2x2, vocab_size=3, coupling=2.0),
        make_model(GridSpec(height=2, width=3), length_scale=0.5),
    ],
)
def test_single_step_is_total_correlation(model: ToyJointModel):
    schedule = raster_schedule(model.grid, step_size_plan(model.n, 1))

    assert aggregate_mi(model, schedule) == pytest.approx(total_correlation(model), abs=1e-9)


@pytest.mark.parametrize("coupling", [0.0, 1.0])
def test_chain_rule_identity(coupling: float):
    model = make_model(grid_2x2, coupling=coupling)
    joint_entropy = entropy(joint_table(model).probabilities)
    rng = np.random.default_rng(int(10 * coupling))

    for seed in range(5):
        plan = step_size_plan(model.n, int(rng.integers(1, model.n + 1)), PlanShape.LINEAR)
        schedule = random_schedule(model.grid, plan, seed=seed)

        direct = aggregate_mi(model, schedule)
        chain = expected_conditional_entropies(model, schedule) - joint_entropy

        assert abs(direct - chain) <= 1e-9


def test_diagonal_pairs_beat_adjacent_pairs():
    model = make_model(grid_2x2)

    diagonal = schedule_from_steps([[[0, 0], [1, 1]], [[0, 1], [1, 0]]], grid_2x2)
    adjacent = schedule_from_steps([[[0, 0], [0, 1]], [[1, 0], [1, 1]]], grid_2x2)

    assert aggregate_mi(model, diagonal) <= aggregate_mi(model, adjacent)


def test_halton_beats_row_blocks():
    grid = GridSpec(height=3, width=3)
    model = make_model(grid, vocab_size=2, coupling=1.0, length_scale=1.0)
    plan = StepSizePlan(counts=[3, 3, 3], total=9)

    assert aggregate_mi(model, halton_schedule(grid, plan)) < aggregate_mi(model, raster_schedule(grid, plan))


def test_single_step_mi_grows_with_coupling():
    plan = step_size_plan(4, 1)
    schedule = raster_schedule(grid_2x2, plan)
    values = [aggregate_mi(make_model(grid_2x2, coupling=beta), schedule) for beta in (0.0, 0.5, 1.0, 2.0)]

    assert values[0] == pytest.approx(0.0, abs=1e-12)
    assert values == sorted(values)
    assert len(set(values)) == 4


def test_aggregate_mi_along_averages_to_aggregate_mi():
    model = make_model(grid_2x2)
    schedule = halton_schedule(grid_2x2, StepSizePlan(counts=[2, 2], total=4))
    probabilities = joint_table(model).flat()

    expected = 0.0
    for index, probability in enumerate(probabilities):
        assignment = np.unravel_index(index, (2,) * 4)
        steps = aggregate_mi_along(model, schedule, [int(value) for value in assignment])
        expected += probability * sum(step.kl_joint_vs_product for step in steps)

    assert expected == pytest.approx(aggregate_mi(model, schedule), abs=1e-12)


def test_aggregate_mi_along_raises():
    model = make_model(grid_2x2)
    schedule = halton_schedule(grid_2x2, StepSizePlan(counts=[4], total=4))

    with pytest.raises(InvalidArgumentError):
        aggregate_mi_along(model, schedule, [0, 1])


def test_schedule_grid_mismatch_raises():
    model = make_model(grid_2x2)
    schedule = halton_schedule(GridSpec(height=1, width=4), StepSizePlan(counts=[4], total=4))

    with pytest.raises(InvalidArgumentError):
        aggregate_mi(model, schedule)


def distance_order_violations(model: ToyJointModel, sources=None):
    """Triples (j, i, k) with |i - j| < |k - j| but H(X_i | X_j = 0) > H(X_k | X_j = 0)."""

    cells = list(model.grid.cells())
    violations = []

    for source in sources or cells:
        state = MaskState.from_values(model.grid, {source: 0})
        entropies = {
            cell: entropy(exact_conditional_marginal(model, state, cell)) for cell in cells if cell != source
        }

        for near, near_entropy in entropies.items():
            for far, far_entropy in entropies.items():
                if math.dist(near, source) < math.dist(far, source) - 1e-9 and near_entropy > far_entropy + 1e-12:
                    violations.append((source, near, far))

    return violations


@pytest.mark.parametrize(
    "model",
    [
        make_model(grid_2x2),
        make_model(grid_2x2, neighbor_radius=1.0),
        make_model(GridSpec(height=3, width=3), neighbor_radius=1.0),
    ],
)
def test_conditional_entropy_grows_with_distance(model: ToyJointModel):
    assert distance_order_violations(model) == []


def test_conditional_entropy_diagonal_neighbour_of_a_corner():
    # with diagonal bonds the centre of a 3x3 grid has more paths to the corner than an edge cell
    grid = GridSpec(height=3, width=3)
    model = make_model(grid)
    state = MaskState.from_values(grid, {Coord(0, 0): 0})

    adjacent = entropy(exact_conditional_marginal(model, state, Coord(0, 1)))
    diagonal = entropy(exact_conditional_marginal(model, state, Coord(1, 1)))

    assert adjacent == pytest.approx(0.309841, abs=1e-6)
    assert diagonal == pytest.approx(0.300703, abs=1e-6)
    assert len(distance_order_violations(model)) == 48


def test_conditional_entropy_nearest_neighbour_4x4():
    grid = GridSpec(height=4, width=4)
    model = make_model(grid, neighbor_radius=1.0)
    violations = distance_order_violations(model, sources=[Coord(3, 3)])

    assert (Coord(3, 3), Coord(3, 1), Coord(2, 1)) in violations
    assert len(distance_order_violations(model)) == 72

    state = MaskState.from_values(grid, {Coord(3, 3): 0})

    assert entropy(exact_conditional_marginal(model, state, Coord(3, 1))) == pytest.approx(0.618586, abs=1e-6)
    assert entropy(exact_conditional_marginal(model, state, Coord(2, 1))) == pytest.approx(0.615216, abs=1e-6)


def test_multi_step_mi_peaks_in_coupling():
    schedule = halton_schedule(grid_2x2, StepSizePlan(counts=[1, 3], total=4))
    values = [aggregate_mi(make_model(grid_2x2, coupling=beta), schedule) for beta in (0.0, 0.5, 1.0, 2.0)]

    # a strongly coupled first cell pins the rest, so the joint is nearly a product again
    assert values == pytest.approx([0.0, 0.078216, 0.160723, 0.044480], abs=1e-6)
    assert values[3] < values[2]
