"""Radical inverse and the 2D Halton sequence (bases 2 and 3).

Every value is carried as an integer ratio ``numerator / denominator`` with
``denominator = base ** digits``. The rational backend wraps the ratio in a
:class:`fractions.Fraction`; the float backend performs one correctly rounded
division, so both generators below agree bitwise.

"""
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, NamedTuple, Tuple, Union

import numpy as np

from haltonmask.errors import InvalidArgumentError

__all__ = [
    "HaltonPoint2D",
    "HaltonSequence2D",
    "radical_inverse_ratio",
    "radical_inverse",
    "halton_incremental",
    "halton_axis",
    "halton_2d",
]


Number = Union[Fraction, float]

# bases of the two axes: x (columns) and y (rows)
X_BASE = 2
Y_BASE = 3


class HaltonPoint2D(NamedTuple):
    """A point of the 2D Halton sequence, both components in [0, 1)."""

    x: Number
    y: Number


@dataclass(frozen=True)
class HaltonSequence2D:
    """The ordered prefix ``[(Φ₂(1), Φ₃(1)), ..., (Φ₂(n_h), Φ₃(n_h))]``."""

    points: Tuple[HaltonPoint2D, ...]

    @property
    def length(self) -> int:
        return len(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, index: int) -> HaltonPoint2D:
        return self.points[index]

    def to_array(self) -> np.ndarray:
        """The points as a float array of shape (n_h, 2)."""
        return np.array([(float(p.x), float(p.y)) for p in self.points], dtype=np.float64).reshape(-1, 2)


def _check_base(base: int):
    if base < 2:
        raise InvalidArgumentError(f"The base must be at least 2, got {base}.")


def radical_inverse_ratio(i: int, base: int) -> Tuple[int, int]:
    """Digit reversal of ``i`` in ``base`` as an integer ratio.

    Args:
        i: a positive index.
        base: the radix, at least 2.

    Returns:
        ``(numerator, denominator)`` with ``numerator / denominator == Φ_base(i)``.

    """

    _check_base(base)
    if i < 1:
        raise InvalidArgumentError(f"The index must be positive, got {i}.")

    numerator = 0
    denominator = 1

    while i > 0:
        i, digit = divmod(i, base)
        numerator = numerator * base + digit
        denominator *= base

    return numerator, denominator


def _to_number(numerator: int, denominator: int, exact: bool) -> Number:
    if exact:
        return Fraction(numerator, denominator)

    # int / int is correctly rounded
    return numerator / denominator


def radical_inverse(i: int, base: int, exact: bool = False) -> Number:
    """Φ_base(i) = Σ a_l · base^-(l+1) for i = Σ a_l · base^l.

    Args:
        i: a positive index.
        base: the radix, at least 2.
        exact: return a Fraction instead of a float.

    """

    return _to_number(*radical_inverse_ratio(i, base), exact=exact)


def halton_incremental(base: int, count: int) -> Iterator[Tuple[int, int]]:
    """Generate Φ_base(1), ..., Φ_base(count) incrementally as integer ratios.

    Each value is derived from the previous one by carrying in the reversed
    digits, without re-expanding the index.

    """

    _check_base(base)

    n, d = 0, 1

    for _ in range(count):
        x = d - n

        if x == 1:
            n = 1
            d *= base
        else:
            y = d // base
            while y >= x:
                y //= base
            n = (base + 1) * y - x

        yield n, d


def halton_axis(count: int, base: int, exact: bool = False, incremental: bool = True) -> List[Number]:
    """The first ``count`` radical inverses in ``base``.

    Args:
        count: number of values.
        base: the radix.
        exact: rational backend.
        incremental: use the incremental generator instead of per-index digit reversal.

    """

    if incremental:
        return [_to_number(n, d, exact) for n, d in halton_incremental(base, count)]

    return [radical_inverse(i, base, exact) for i in range(1, count + 1)]


def halton_2d(n_h: int, exact: bool = False, incremental: bool = True) -> HaltonSequence2D:
    """The first ``n_h`` points of the 2D Halton sequence with bases 2 and 3.

    Args:
        n_h: number of points, at least 1.
        exact: rational backend.
        incremental: use the incremental generator.

    """

    if n_h < 1:
        raise InvalidArgumentError(f"The sequence length must be positive, got {n_h}.")

    xs = halton_axis(n_h, X_BASE, exact, incremental)
    ys = halton_axis(n_h, Y_BASE, exact, incremental)

    return HaltonSequence2D(points=tuple(HaltonPoint2D(x, y) for x, y in zip(xs, ys)))
