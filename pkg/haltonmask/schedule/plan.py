import math
from enum import Enum
from typing import Callable, Dict, List

import numpy as np
from pydantic import BaseModel, Field, root_validator

from haltonmask.errors import InvalidArgumentError

__all__ = [
    "PlanShape",
    "StepSizePlan",
    "step_size_plan",
]


class PlanShape(str, Enum):
    """How many tokens each step reveals."""

    COSINE = "cosine"
    LINEAR = "linear"
    ARCCOS = "arccos"
    SQUARE = "square"
    ROOT = "root"


# cumulative fraction of revealed tokens after a fraction t of the steps
REVEALED_FRACTION: Dict[PlanShape, Callable[[float], float]] = {
    PlanShape.COSINE: lambda t: 1.0 - math.cos(t * math.pi / 2),
    PlanShape.ARCCOS: lambda t: 1.0 - math.acos(t) / (math.pi / 2),
    PlanShape.SQUARE: lambda t: t**2,
    PlanShape.ROOT: lambda t: t**0.5,
}


class StepSizePlan(BaseModel):
    """The number of tokens n_s revealed at each step."""

    counts: List[int] = Field(description="n_s for s = 1..S.")
    total: int = Field(description="n, the number of tokens of the grid.")

    class Config:
        frozen = True
        extra = "forbid"

    @root_validator(skip_on_failure=True)
    def validation_counts(cls, values):
        counts, total = values["counts"], values["total"]

        if len(counts) == 0:
            raise ValueError("A plan has at least one step.")

        if any(count < 1 for count in counts):
            raise ValueError("Every step reveals at least one token.")

        if sum(counts) != total:
            raise ValueError(f"The step counts sum to {sum(counts)}, expected {total}.")

        return values

    @property
    def steps(self) -> int:
        return len(self.counts)

    def boundaries(self) -> List[int]:
        """Cumulative offsets ``[0, n_1, n_1 + n_2, ..., n]``."""
        return [0] + list(np.cumsum(self.counts).tolist())


def step_size_plan(n: int, steps: int, shape: PlanShape = PlanShape.COSINE) -> StepSizePlan:
    """Split ``n`` tokens into ``steps`` non-empty steps.

    Linear plans are near-equal with the remainder on the last steps. The other
    shapes give every step one token and spread the remaining ``n - steps``
    along the shape's cumulative curve. Counts are monotone: non-decreasing
    for the convex shapes, non-increasing for ``root``.

    Args:
        n: number of tokens.
        steps: number of steps S, 1 <= S <= n.
        shape: the plan shape.

    """

    shape = PlanShape(shape)

    if n < 1:
        raise InvalidArgumentError(f"The token count must be positive, got {n}.")

    if steps < 1:
        raise InvalidArgumentError(f"The number of steps must be positive, got {steps}.")

    if steps > n:
        raise InvalidArgumentError(f"The steps exceed token count: {steps} > {n}.")

    if shape is PlanShape.LINEAR:
        base, remainder = divmod(n, steps)
        counts = [base] * (steps - remainder) + [base + 1] * remainder
        return StepSizePlan(counts=counts, total=n)

    spare = n - steps
    fraction = REVEALED_FRACTION[shape]
    cumulative = [math.floor(spare * fraction(s / steps) + 1e-9) for s in range(steps + 1)]
    cumulative[-1] = spare

    # root is the only concave shape: many tokens first
    counts = sorted(
        (1 + cumulative[s + 1] - cumulative[s] for s in range(steps)),
        reverse=shape is PlanShape.ROOT,
    )

    return StepSizePlan(counts=counts, total=n)
