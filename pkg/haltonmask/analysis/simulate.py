"""The iterative unmasking loop.

At every step the predictor gives a marginal for each masked cell, a value is
provisionally sampled for every masked cell, and the scheduler decides which
of them are committed. All randomness comes from one seed split into three
independent substreams: value sampling, selection noise and the random
scheduler's permutation.

"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Protocol, Tuple, Union

import numpy as np
from scipy.special import entr, softmax

from haltonmask.analysis.metrics import StepMetrics, distance_to_revealed, intra_step_spread
from haltonmask.errors import ContractViolationError, InvalidArgumentError, InvariantViolationError
from haltonmask.schedule.plan import StepSizePlan
from haltonmask.schedule.schedulers import (
    BaseScheduler,
    ConfidenceConfig,
    Schedule,
    SchedulerName,
    build_scheduler,
)
from haltonmask.sequence.gridmap import Coord, GridSpec
from haltonmask.toy.model import MaskState

__all__ = [
    "MarginalPredictor",
    "StepRecord",
    "SamplingTrace",
    "SeedStreams",
    "run_sampling",
    "entropy_map",
]

logger = logging.getLogger(__name__)

MARGINAL_ATOL = 1e-9


class MarginalPredictor(Protocol):
    """Gives p(X_i | revealed) for every masked cell of a state."""

    def __call__(self, state: MaskState) -> Mapping[Coord, np.ndarray]:
        ...


@dataclass(frozen=True)
class SeedStreams:
    """The three substreams derived from a master seed."""

    values: np.random.SeedSequence
    noise: np.random.SeedSequence
    permutation: np.random.SeedSequence

    @classmethod
    def from_seed(cls, seed: int) -> "SeedStreams":
        values, noise, permutation = np.random.SeedSequence(seed).spawn(3)
        return cls(values=values, noise=noise, permutation=permutation)


@dataclass(frozen=True)
class StepRecord:
    """What happened at one step."""

    cells: Tuple[Coord, ...]
    values: Tuple[int, ...]
    entropies: Tuple[float, ...]
    entropy_map: np.ndarray
    metrics: StepMetrics


@dataclass(frozen=True)
class SamplingTrace:
    """A full generation trajectory."""

    grid: GridSpec
    scheduler: str
    seed: int
    records: Tuple[StepRecord, ...]
    final: np.ndarray

    @property
    def schedule(self) -> Schedule:
        """The realized order of revelation."""
        return Schedule(steps=tuple(record.cells for record in self.records), grid=self.grid)

    @property
    def metrics(self) -> List[StepMetrics]:
        return [record.metrics for record in self.records]

    def assignment(self) -> List[int]:
        """The final values in row-major order."""
        return [int(v) for v in self.final.reshape(-1)]


def _validated(marginals: Mapping[Coord, np.ndarray], state: MaskState) -> Dict[Coord, np.ndarray]:
    if set(marginals) != set(state.masked):
        raise ContractViolationError("The predictor must return a marginal for exactly the masked cells.")

    result = {}
    size = None

    for cell in sorted(marginals):
        probs = np.asarray(marginals[cell], dtype=np.float64)

        if size is None:
            size = probs.shape

        if probs.ndim != 1 or probs.shape != size:
            raise ContractViolationError(f"The marginal of cell {tuple(cell)} has shape {probs.shape}.", cell=cell)

        if np.any(probs < 0) or not np.isfinite(probs).all() or abs(probs.sum() - 1.0) > MARGINAL_ATOL:
            raise ContractViolationError(f"The marginal of cell {tuple(cell)} is not a distribution.", cell=cell)

        result[cell] = probs

    return result


def _sample_values(probs: np.ndarray, temperature: float, rng: np.random.Generator) -> np.ndarray:
    if temperature != 1.0:
        with np.errstate(divide="ignore"):
            probs = softmax(np.log(probs) / temperature, axis=1)

    cumulative = np.cumsum(probs, axis=1)
    draws = rng.random(len(probs))

    return np.minimum((cumulative < draws[:, None]).sum(axis=1), probs.shape[1] - 1)


def entropy_map(predictor: MarginalPredictor, state: MaskState) -> np.ndarray:
    """Entropy in nats of every masked cell's marginal; revealed cells are NaN."""

    result = np.full((state.grid.height, state.grid.width), np.nan)

    if state.is_complete:
        return result

    for cell, probs in _validated(predictor(state), state).items():
        result[cell.row, cell.col] = float(entr(probs).sum())

    return result


def run_sampling(
    predictor: MarginalPredictor,
    scheduler: Union[str, SchedulerName, BaseScheduler],
    grid: GridSpec,
    plan: StepSizePlan,
    seed: int,
    value_temperature: float = 1.0,
    confidence: Optional[ConfidenceConfig] = None,
) -> SamplingTrace:
    """Generate a full token grid step by step.

    Args:
        predictor: the marginal predictor.
        scheduler: a scheduler name or instance.
        grid: the token grid.
        plan: the step size plan (ignored for fixed-order scheduler instances, which carry their own).
        seed: the master seed.
        value_temperature: marginals are raised to 1 / value_temperature before sampling.
        confidence: confidence scheduler parameters.

    """

    if value_temperature <= 0:
        raise InvalidArgumentError(f"The value temperature must be positive, got {value_temperature}.")

    streams = SeedStreams.from_seed(seed)

    if not isinstance(scheduler, BaseScheduler):
        scheduler = build_scheduler(scheduler, grid, plan, seed=streams.permutation, confidence=confidence)

    plan = scheduler.plan
    if plan.total != grid.n:
        raise InvalidArgumentError(f"The plan covers {plan.total} tokens but the {grid} grid has {grid.n}.")

    value_rng = np.random.default_rng(streams.values)
    noise_rng = np.random.default_rng(streams.noise)

    state = MaskState.initial(grid)
    revealed: List[Coord] = []
    records: List[StepRecord] = []

    for step_index, count in enumerate(plan.counts):
        marginals = _validated(predictor(state), state)
        masked = sorted(marginals)

        values = _sample_values(np.stack([marginals[cell] for cell in masked]), value_temperature, value_rng)
        sampled = {cell: int(value) for cell, value in zip(masked, values)}

        cells = tuple(scheduler.select(step_index, marginals, sampled, noise_rng))

        if len(cells) != count or len(set(cells)) != count or any(cell not in sampled for cell in cells):
            raise InvariantViolationError(f"Step {step_index} must reveal {count} distinct masked cells.")

        current_map = np.full((grid.height, grid.width), np.nan)
        for cell in masked:
            current_map[cell.row, cell.col] = float(entr(marginals[cell]).sum())

        entropies = tuple(float(current_map[cell.row, cell.col]) for cell in cells)
        spread_min, spread_mean = intra_step_spread(cells)

        metrics = StepMetrics(
            step_index=step_index,
            entropy_sum=float(sum(entropies)),
            intra_step_min_nn_distance=spread_min,
            intra_step_mean_nn_distance=spread_mean,
            mean_distance_to_revealed=distance_to_revealed(cells, revealed) if revealed else None,
            tokens_revealed_cumulative=len(revealed) + count,
        )

        records.append(
            StepRecord(
                cells=cells,
                values=tuple(sampled[cell] for cell in cells),
                entropies=entropies,
                entropy_map=current_map,
                metrics=metrics,
            )
        )

        state = state.reveal({cell: sampled[cell] for cell in cells})
        revealed.extend(cells)

        logger.debug(
            "%s step %d: revealed %d cells, entropy sum %.4f", scheduler.name, step_index, count, metrics.entropy_sum
        )

    final = np.full((grid.height, grid.width), -1, dtype=np.int64)
    for cell, value in state.revealed:
        final[cell.row, cell.col] = value

    if (final < 0).any():
        raise InvariantViolationError("The sampling loop ended with masked cells.")

    return SamplingTrace(grid=grid, scheduler=scheduler.name, seed=seed, records=tuple(records), final=final)
