"""Entropy, KL divergence and step mutual information, all in nats.

``aggregate_mi`` sums, over the steps of a schedule, the expected KL between
the joint conditional of the step's cells and the product of their
marginals. ``expected_conditional_entropies`` reaches the same quantity
through the chain rule (Σ_s Σ_i H(X_s^i | X_<s) − H(𝓧)) using joint
entropies only, so the two can be checked against each other.

"""
import logging
from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np
from scipy.special import entr, rel_entr

from haltonmask.errors import InvalidArgumentError
from haltonmask.schedule.schedulers import Schedule
from haltonmask.sequence.gridmap import Coord
from haltonmask.toy.model import (
    MaskState,
    ToyJointModel,
    exact_conditional_joint,
    exact_conditional_marginal,
    joint_table,
)

__all__ = [
    "StepDivergence",
    "entropy",
    "kl_divergence",
    "step_mi",
    "aggregate_mi",
    "aggregate_mi_along",
    "expected_conditional_entropies",
    "total_correlation",
]

logger = logging.getLogger(__name__)

NORMALIZATION_ATOL = 1e-9


@dataclass(frozen=True)
class StepDivergence:
    """MI(X_s | X_<s) for one step at a realized prefix.

    ``residual`` is ``kl - marginal_entropy_sum``, which equals ``-joint_entropy``.
    """

    step_index: int
    kl_joint_vs_product: float
    marginal_entropy_sum: float
    joint_entropy: float

    @property
    def residual(self) -> float:
        return self.kl_joint_vs_product - self.marginal_entropy_sum


def _as_distribution(dist, name: str = "distribution") -> np.ndarray:
    dist = np.asarray(dist, dtype=np.float64)

    if np.any(dist < 0):
        raise InvalidArgumentError(f"The {name} has negative entries.")

    if abs(dist.sum() - 1.0) > NORMALIZATION_ATOL:
        raise InvalidArgumentError(f"The {name} sums to {dist.sum()!r}, not 1.")

    return dist


def entropy(dist) -> float:
    """-Σ p log p with 0 · log 0 = 0. Accepts any array shape."""
    return float(entr(_as_distribution(dist)).sum())


def kl_divergence(p, q) -> float:
    """D_KL(p ‖ q) = Σ p log(p / q)."""

    p = _as_distribution(p, "first distribution")
    q = _as_distribution(q, "second distribution")

    if p.shape != q.shape:
        raise InvalidArgumentError(f"The supports differ: {p.shape} vs {q.shape}.")

    if np.any((q == 0) & (p > 0)):
        raise InvalidArgumentError("The first distribution is not absolutely continuous w.r.t. the second.")

    return float(rel_entr(p, q).sum())


def _product(marginals: Sequence[np.ndarray]) -> np.ndarray:
    result = np.ones(())
    for marginal in marginals:
        result = np.multiply.outer(result, marginal)
    return result


def step_mi(model: ToyJointModel, state: MaskState, cells: Iterable[Coord], step_index: int = 0) -> StepDivergence:
    """KL between p(X_cells | revealed) and the product of the cells' conditional marginals."""

    cells = sorted({Coord(*cell) for cell in cells})

    joint = exact_conditional_joint(model, state, cells)
    marginals = [exact_conditional_marginal(model, state, cell) for cell in cells]

    return StepDivergence(
        step_index=step_index,
        kl_joint_vs_product=max(kl_divergence(joint, _product(marginals)), 0.0),
        marginal_entropy_sum=sum(entropy(marginal) for marginal in marginals),
        joint_entropy=entropy(joint),
    )


def _check_schedule(model: ToyJointModel, schedule: Schedule):
    if schedule.grid != model.grid:
        raise InvalidArgumentError(f"The schedule grid {schedule.grid} does not match the model grid {model.grid}.")


def aggregate_mi(model: ToyJointModel, schedule: Schedule) -> float:
    """E_{x∼p}[Σ_s MI(X_s | x_<s)] by exact enumeration."""

    _check_schedule(model, schedule)

    table = joint_table(model)
    grid = model.grid
    total = 0.0

    for step_index, step in enumerate(schedule.steps):
        prefix = [grid.index(cell) for cell in schedule.revealed_before(step_index)]
        current = [grid.index(cell) for cell in step]

        # p(x_prefix, x_step), prefix axes first
        pair = table.marginal(prefix + current)
        k = len(prefix)

        prefix_mass = pair.sum(axis=tuple(range(k, pair.ndim)), keepdims=True)
        conditional = pair / prefix_mass

        product = np.ones_like(conditional)
        for offset in range(len(current)):
            axis = k + offset
            others = tuple(a for a in range(k, pair.ndim) if a != axis)
            product = product * (conditional.sum(axis=others, keepdims=True) if others else conditional)

        step_value = float((prefix_mass * rel_entr(conditional, product)).sum())
        logger.debug("step %d: expected MI %.6g nats", step_index, step_value)
        total += step_value

    return max(total, 0.0)


def aggregate_mi_along(model: ToyJointModel, schedule: Schedule, assignment: Sequence[int]) -> List[StepDivergence]:
    """Step MI along one trajectory: the prefixes take the values of ``assignment``.

    Args:
        model: the toy model.
        schedule: the schedule.
        assignment: a value per cell in row-major order.

    """

    _check_schedule(model, schedule)

    if len(assignment) != model.n:
        raise InvalidArgumentError(f"The assignment has {len(assignment)} values, expected {model.n}.")

    grid = model.grid
    state = MaskState.initial(grid)
    result = []

    for step_index, step in enumerate(schedule.steps):
        result.append(step_mi(model, state, step, step_index=step_index))
        state = state.reveal({cell: int(assignment[grid.index(cell)]) for cell in step})

    return result


def _table_entropy(table: np.ndarray) -> float:
    return float(entr(table).sum())


def expected_conditional_entropies(model: ToyJointModel, schedule: Schedule) -> float:
    """Σ_s Σ_i H(X_s^i | X_<s) with H(A | B) = H(A, B) − H(B)."""

    _check_schedule(model, schedule)

    table = joint_table(model)
    grid = model.grid
    total = 0.0

    for step_index, step in enumerate(schedule.steps):
        prefix = [grid.index(cell) for cell in schedule.revealed_before(step_index)]
        prefix_entropy = _table_entropy(table.marginal(prefix)) if prefix else 0.0

        for cell in step:
            total += _table_entropy(table.marginal(prefix + [grid.index(cell)])) - prefix_entropy

    return total


def total_correlation(model: ToyJointModel) -> float:
    """Σ_i H(X_i) − H(𝓧)."""

    table = joint_table(model)
    marginal_sum = sum(_table_entropy(table.marginal([axis])) for axis in range(model.n))

    return marginal_sum - _table_entropy(table.probabilities)
