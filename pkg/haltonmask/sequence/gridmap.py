"""Discretization of the 2D Halton sequence onto an H×W token grid.

Axis convention: the base-2 component selects the column and the base-3
component selects the row. Discretization is ``floor(x · width)`` and
``floor(y · height)``.

"""
import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterator, List, NamedTuple, Tuple

from pydantic import BaseModel, Field, validator

from haltonmask.errors import InvalidArgumentError, InvariantViolationError
from haltonmask.sequence.lds import X_BASE, Y_BASE, HaltonPoint2D, halton_incremental

__all__ = [
    "GridSpec",
    "Coord",
    "TokenOrder",
    "discretize",
    "halton_token_order",
]

logger = logging.getLogger(__name__)

# the first n_h tried is GROWTH_START · n, the hard cap is GROWTH_CAP · n
GROWTH_START = 2
GROWTH_CAP = 10**6


class Coord(NamedTuple):
    """A cell of the token grid."""

    row: int
    col: int


class GridSpec(BaseModel):
    """Token grid geometry."""

    height: int = Field(description="Number of rows.")
    width: int = Field(description="Number of columns.")

    class Config:
        frozen = True
        extra = "forbid"

    @validator("height", "width")
    def validation_positive(cls, value: int):
        if value < 1:
            raise ValueError("Grid dimensions must be at least 1.")

        return value

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse a ``HxW`` string such as ``32x32``."""

        parts = text.lower().split("x")

        if len(parts) != 2 or not all(part.strip().isdigit() for part in parts):
            raise InvalidArgumentError(f"The grid must look like HxW, got {text!r}.")

        return cls(height=int(parts[0]), width=int(parts[1]))

    @property
    def n(self) -> int:
        return self.height * self.width

    def __str__(self) -> str:
        return f"{self.height}x{self.width}"

    def cells(self) -> Iterator[Coord]:
        """All cells in row-major order."""

        for row in range(self.height):
            for col in range(self.width):
                yield Coord(row, col)

    def contains(self, cell: Coord) -> bool:
        return 0 <= cell.row < self.height and 0 <= cell.col < self.width

    def index(self, cell: Coord) -> int:
        """Row-major index of a cell."""
        return cell.row * self.width + cell.col

    def coord(self, index: int) -> Coord:
        return Coord(*divmod(index, self.width))


@dataclass(frozen=True)
class TokenOrder:
    """A permutation of all cells of ``grid``."""

    coords: Tuple[Coord, ...]
    grid: GridSpec

    def __post_init__(self):
        if len(self.coords) != self.grid.n or set(self.coords) != set(self.grid.cells()):
            raise InvariantViolationError(f"The token order is not a permutation of the {self.grid} grid.")

    def __len__(self) -> int:
        return len(self.coords)

    def __iter__(self) -> Iterator[Coord]:
        return iter(self.coords)


def discretize(point: HaltonPoint2D, grid: GridSpec) -> Coord:
    """Map a point of [0, 1)² to the grid cell containing it."""

    return Coord(row=math.floor(point.y * grid.height), col=math.floor(point.x * grid.width))


@lru_cache(maxsize=64)
def halton_token_order(grid: GridSpec) -> TokenOrder:
    """The Halton visiting order of all cells of ``grid``.

    The prefix of n_h Halton points is discretized and the first occurrence
    of each cell is kept. n_h starts at ``2 · n`` and doubles, extending the
    walk by the new points only, until every cell has been hit or n_h
    reaches ``10⁶ · n``.

    """

    n = grid.n
    cap = GROWTH_CAP * n

    # integer ratios keep the floor exact
    points = zip(halton_incremental(X_BASE, cap), halton_incremental(Y_BASE, cap))

    seen: Dict[Coord, None] = {}
    order: List[Coord] = []
    walked, n_h = 0, min(GROWTH_START * n, cap)

    while True:
        for (x_num, x_den), (y_num, y_den) in itertools.islice(points, n_h - walked):
            cell = Coord(row=(y_num * grid.height) // y_den, col=(x_num * grid.width) // x_den)

            if cell not in seen:
                seen[cell] = None
                order.append(cell)

        walked = n_h

        if len(order) == n:
            logger.debug("grid %s covered within n_h = %d Halton points", grid, n_h)
            return TokenOrder(coords=tuple(order), grid=grid)

        if n_h >= cap:
            raise InvariantViolationError(f"The Halton sequence did not cover the {grid} grid within {cap} points.")

        n_h = min(2 * n_h, cap)
        logger.debug("grid %s: %d of %d cells covered, n_h grows to %d", grid, len(order), n, n_h)
