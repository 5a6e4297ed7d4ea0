"""Spread and uniformity diagnostics.

Cells are embedded at their integer ``(row, col)`` coordinates.

"""
import math
from dataclasses import dataclass
from typing import Collection, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist

from haltonmask.errors import InvalidArgumentError, ResourceLimitError
from haltonmask.sequence.gridmap import Coord
from haltonmask.sequence.lds import HaltonPoint2D

__all__ = [
    "StepMetrics",
    "intra_step_spread",
    "distance_to_revealed",
    "star_discrepancy",
    "MAX_DISCREPANCY_POINTS",
]

MAX_DISCREPANCY_POINTS = 512


@dataclass(frozen=True)
class StepMetrics:
    """Diagnostics of one unmasking step.

    Distances that are not defined (a single-cell step, or nothing revealed yet)
    are ``inf`` and ``None`` respectively.
    """

    step_index: int
    entropy_sum: float
    intra_step_min_nn_distance: float
    intra_step_mean_nn_distance: float
    mean_distance_to_revealed: Optional[float]
    tokens_revealed_cumulative: int


def _coords(cells: Collection[Coord]) -> np.ndarray:
    return np.array([tuple(cell) for cell in cells], dtype=np.float64).reshape(-1, 2)


def intra_step_spread(cells: Collection[Coord]) -> Tuple[float, float]:
    """Min and mean over ``cells`` of the distance to the nearest other cell of the set."""

    if len(cells) == 0:
        raise InvalidArgumentError("The spread of an empty step is undefined.")

    if len(cells) == 1:
        return math.inf, math.inf

    distances = cdist(_coords(cells), _coords(cells))
    np.fill_diagonal(distances, np.inf)
    nearest = distances.min(axis=1)

    return float(nearest.min()), float(nearest.mean())


def distance_to_revealed(cells: Collection[Coord], revealed: Collection[Coord]) -> float:
    """Mean over ``cells`` of the distance to the nearest revealed cell."""

    if len(revealed) == 0:
        raise InvalidArgumentError("No cell is revealed yet.")

    if len(cells) == 0:
        raise InvalidArgumentError("The step has no cells.")

    return float(cdist(_coords(cells), _coords(revealed)).min(axis=1).mean())


def star_discrepancy(points: Union[Sequence[HaltonPoint2D], np.ndarray]) -> float:
    """Exact star discrepancy of a 2D point set in [0, 1)².

    The supremum over anchored boxes is attained at corners taken from the
    point coordinates (plus 1): closed boxes bound the excess of points,
    open boxes the excess of volume. Counts for all corners come from a 2D
    cumulative histogram over coordinate ranks.

    Args:
        points: at most 512 points.

    """

    pts = np.array([(float(p[0]), float(p[1])) for p in points], dtype=np.float64).reshape(-1, 2)
    k = len(pts)

    if k == 0:
        raise InvalidArgumentError("The discrepancy of an empty point set is undefined.")

    if k > MAX_DISCREPANCY_POINTS:
        raise ResourceLimitError(f"Exact star discrepancy is limited to {MAX_DISCREPANCY_POINTS} points, got {k}.")

    if np.any(pts < 0) or np.any(pts >= 1):
        raise InvalidArgumentError("Points must lie in [0, 1)².")

    xs = np.append(np.unique(pts[:, 0]), 1.0)
    ys = np.append(np.unique(pts[:, 1]), 1.0)

    histogram = np.zeros((len(xs), len(ys)), dtype=np.int64)
    np.add.at(histogram, (np.searchsorted(xs, pts[:, 0]), np.searchsorted(ys, pts[:, 1])), 1)

    # closed[a, b] = #{x <= xs[a], y <= ys[b]}
    closed = histogram.cumsum(axis=0).cumsum(axis=1)
    # opened[a, b] = #{x < xs[a], y < ys[b]}
    opened = np.zeros_like(closed)
    opened[1:, 1:] = closed[:-1, :-1]

    volume = np.outer(xs, ys)

    excess_points = closed / k - volume
    excess_volume = volume - opened / k

    return float(max(excess_points.max(), excess_volume.max()))
