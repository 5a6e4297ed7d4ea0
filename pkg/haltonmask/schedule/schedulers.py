"""Token-unmasking schedulers.

A schedule is an ordered partition of the grid cells into S steps. Halton,
Random and Raster schedules are fixed before sampling starts; the Confidence
scheduler picks its cells during sampling from the predictor's marginals.

"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import softmax

from haltonmask.errors import InvalidArgumentError
from haltonmask.schedule.plan import StepSizePlan
from haltonmask.sequence.gridmap import Coord, GridSpec, halton_token_order

__all__ = [
    "SchedulerName",
    "Schedule",
    "ConfidenceConfig",
    "halton_schedule",
    "random_schedule",
    "raster_schedule",
    "confidence_select",
    "BaseScheduler",
    "FixedOrderScheduler",
    "ConfidenceScheduler",
    "build_scheduler",
    "schedule_from_steps",
]

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]

# tolerance on the normalization of predictor marginals
MARGINAL_ATOL = 1e-9


class SchedulerName(str, Enum):
    HALTON = "halton"
    RANDOM = "random"
    RASTER = "raster"
    CONFIDENCE = "confidence"


@dataclass(frozen=True)
class Schedule:
    """An ordered partition ``[X_1, ..., X_S]`` of the cells of ``grid``."""

    steps: Tuple[Tuple[Coord, ...], ...]
    grid: GridSpec

    def __post_init__(self):
        seen = set()

        for step_index, step in enumerate(self.steps):
            if len(step) == 0:
                raise InvalidArgumentError(f"Step {step_index} of the schedule is empty.")

            for cell in step:
                if not self.grid.contains(cell):
                    raise InvalidArgumentError(f"The cell {tuple(cell)} is outside of the {self.grid} grid.")

                if cell in seen:
                    raise InvalidArgumentError(f"The cell {tuple(cell)} appears in more than one step.")

                seen.add(cell)

        if len(seen) != self.grid.n:
            raise InvalidArgumentError(f"The schedule covers {len(seen)} of {self.grid.n} cells.")

    @classmethod
    def from_order(cls, order: Sequence[Coord], plan: StepSizePlan, grid: GridSpec) -> "Schedule":
        """Slice a full cell order into consecutive chunks of the plan's sizes."""

        _check_plan(plan, grid)

        bounds = plan.boundaries()
        steps = tuple(tuple(Coord(*cell) for cell in order[bounds[s] : bounds[s + 1]]) for s in range(plan.steps))

        return cls(steps=steps, grid=grid)

    @property
    def size(self) -> int:
        """The number of steps S."""
        return len(self.steps)

    @property
    def plan(self) -> StepSizePlan:
        return StepSizePlan(counts=[len(step) for step in self.steps], total=self.grid.n)

    def order(self) -> Tuple[Coord, ...]:
        return tuple(cell for step in self.steps for cell in step)

    def revealed_before(self, step_index: int) -> Tuple[Coord, ...]:
        """X_<s for the 0-based step ``step_index``."""
        return tuple(cell for step in self.steps[:step_index] for cell in step)


class ConfidenceConfig(BaseModel):
    """Confidence scheduler parameters."""

    gumbel_scale_initial: float = Field(default=4.5, ge=0, description="Gumbel noise scale at the first step.")
    softmax_temperature: float = Field(default=1.0, gt=0, description="Temperature applied to the marginals.")
    decay: Literal["linear"] = Field(default="linear", description="Decay of the Gumbel scale over the steps.")

    class Config:
        frozen = True
        extra = "forbid"

    def gumbel_scale(self, step_fraction: float) -> float:
        """The noise scale after a fraction ``step_fraction`` of the steps."""
        return self.gumbel_scale_initial * max(0.0, 1.0 - step_fraction)


def _check_plan(plan: StepSizePlan, grid: GridSpec):
    if plan.total != grid.n:
        raise InvalidArgumentError(f"The plan covers {plan.total} tokens but the {grid} grid has {grid.n}.")


def halton_schedule(grid: GridSpec, plan: StepSizePlan) -> Schedule:
    """Slice the Halton token order by the plan."""
    return Schedule.from_order(halton_token_order(grid).coords, plan, grid)


def raster_schedule(grid: GridSpec, plan: StepSizePlan) -> Schedule:
    """Slice the row-major order by the plan: a clustered baseline."""
    return Schedule.from_order(list(grid.cells()), plan, grid)


def random_schedule(grid: GridSpec, plan: StepSizePlan, seed: SeedLike) -> Schedule:
    """Slice a uniformly random permutation of the cells by the plan."""

    _check_plan(plan, grid)

    cells = list(grid.cells())
    permutation = np.random.default_rng(seed).permutation(len(cells))

    return Schedule.from_order([cells[i] for i in permutation], plan, grid)


def confidence_select(
    marginals: Mapping[Coord, np.ndarray],
    sampled_values: Mapping[Coord, int],
    k: int,
    config: ConfidenceConfig,
    step_fraction: float,
    seed: SeedLike,
) -> Tuple[Coord, ...]:
    """Pick the ``k`` masked cells with the highest noisy confidence.

    The score of a cell is the log-probability of its sampled value plus
    standard Gumbel noise scaled by ``config.gumbel_scale(step_fraction)``.
    Ties are broken by row-major cell order. The noise never touches the values.

    Args:
        marginals: a categorical distribution for every masked cell.
        sampled_values: the provisional value of every masked cell.
        k: how many cells to pick.
        config: the scheduler parameters.
        step_fraction: s / S for the current 0-based step s.
        seed: a seed or generator for the Gumbel noise.

    Returns:
        The selected cells in row-major order.

    """

    cells = sorted(marginals)

    if not 0 <= k <= len(cells):
        raise InvalidArgumentError(f"Cannot select {k} cells out of {len(cells)} masked cells.")

    if set(sampled_values) != set(cells):
        raise InvalidArgumentError("Sampled values and marginals must cover the same cells.")

    log_conf = np.empty(len(cells), dtype=np.float64)

    for position, cell in enumerate(cells):
        probs = np.asarray(marginals[cell], dtype=np.float64)

        if np.any(probs < 0) or abs(probs.sum() - 1.0) > MARGINAL_ATOL:
            raise InvalidArgumentError(f"The marginal of cell {tuple(cell)} is not a distribution.")

        with np.errstate(divide="ignore"):
            tempered = softmax(np.log(probs) / config.softmax_temperature)
            log_conf[position] = np.log(tempered[sampled_values[cell]])

    gumbel = np.random.default_rng(seed).gumbel(size=len(cells))
    scores = log_conf + config.gumbel_scale(step_fraction) * gumbel

    chosen = np.argsort(-scores, kind="stable")[:k]

    return tuple(cells[i] for i in sorted(chosen))


class BaseScheduler(ABC):
    """Decides which masked cells are committed at each sampling step."""

    name: str
    plan: StepSizePlan

    @abstractmethod
    def select(
        self,
        step_index: int,
        marginals: Mapping[Coord, np.ndarray],
        sampled_values: Mapping[Coord, int],
        noise: np.random.Generator,
    ) -> Tuple[Coord, ...]:
        """The cells to commit at the 0-based step ``step_index``."""


class FixedOrderScheduler(BaseScheduler):
    """Replays a precomputed schedule.

    Args:
        schedule: the schedule to replay.
        name: a label for reports.

    """

    def __init__(self, schedule: Schedule, name: str = "fixed"):
        self.schedule = schedule
        self.name = name
        self.plan = schedule.plan

    def select(self, step_index, marginals, sampled_values, noise):
        cells = self.schedule.steps[step_index]

        missing = [cell for cell in cells if cell not in marginals]
        if missing:
            raise InvalidArgumentError(f"Step {step_index} reveals cells that are not masked: {missing}.")

        return cells


class ConfidenceScheduler(BaseScheduler):
    """Commits the most confident provisional values at each step.

    Args:
        plan: number of cells committed per step.
        config: the confidence parameters.

    """

    name = SchedulerName.CONFIDENCE.value

    def __init__(self, plan: StepSizePlan, config: Optional[ConfidenceConfig] = None):
        self.plan = plan
        self.config = config or ConfidenceConfig()

    def select(self, step_index, marginals, sampled_values, noise):
        return confidence_select(
            marginals,
            sampled_values,
            k=self.plan.counts[step_index],
            config=self.config,
            step_fraction=step_index / self.plan.steps,
            seed=noise,
        )


def build_scheduler(
    name: Union[str, SchedulerName],
    grid: GridSpec,
    plan: StepSizePlan,
    seed: SeedLike = 0,
    confidence: Optional[ConfidenceConfig] = None,
) -> BaseScheduler:
    """Build a scheduler by name.

    Args:
        name: one of halton, random, raster, confidence.
        grid: the token grid.
        plan: the step size plan.
        seed: permutation seed for the random scheduler.
        confidence: parameters of the confidence scheduler.

    """

    name = SchedulerName(name)
    _check_plan(plan, grid)

    if name is SchedulerName.CONFIDENCE:
        return ConfidenceScheduler(plan, confidence)

    if name is SchedulerName.HALTON:
        schedule = halton_schedule(grid, plan)
    elif name is SchedulerName.RASTER:
        schedule = raster_schedule(grid, plan)
    else:
        schedule = random_schedule(grid, plan, seed)

    logger.debug("built %s schedule for %s grid in %d steps", name.value, grid, plan.steps)

    return FixedOrderScheduler(schedule, name=name.value)


def schedule_from_steps(steps: Iterable[Iterable[Sequence[int]]], grid: GridSpec) -> Schedule:
    """Build a schedule from nested ``[row, col]`` pairs."""
    return Schedule(steps=tuple(tuple(Coord(int(r), int(c)) for r, c in step) for step in steps), grid=grid)
