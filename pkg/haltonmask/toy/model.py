"""Potts-style toy joint model over a small token grid.

The unnormalized log-probability of an assignment ``x`` is

    β · Σ_{i<j, d_ij ≤ radius} w(d_ij) · [x_i = x_j],   w(d) = exp(-(d - 1) / λ)

so nearest neighbours weigh exactly 1 and the coupling decays with the
Euclidean distance between cells. Assignments are indexed in mixed-radix
row-major order: the joint table has one axis of size V per cell, axis
``row · W + col``.

"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, root_validator
from scipy.special import logsumexp

from haltonmask.errors import InvalidArgumentError, ResourceLimitError
from haltonmask.sequence.gridmap import Coord, GridSpec

__all__ = [
    "ToyJointModel",
    "MaskState",
    "JointTable",
    "joint_table",
    "exact_conditional_marginal",
    "exact_conditional_joint",
    "EnumerationOracle",
    "TransferMatrixOracle",
    "oracle_for",
]

logger = logging.getLogger(__name__)

# largest joint table the enumeration oracle builds
MAX_STATES = 10**7
# largest row state space of the transfer-matrix oracle
MAX_ROW_STATES = 2**16
# largest grid side allowed with full pairwise interaction
FULL_PAIRWISE_MAX_SIDE = 3

Marginals = Dict[Coord, np.ndarray]


class ToyJointModel(BaseModel):
    """Parameters of the distance-decaying Potts model."""

    grid: GridSpec = Field(description="The token grid.")
    vocab_size: int = Field(default=2, ge=2, description="V, the number of token values.")
    coupling: float = Field(default=1.0, ge=0, description="β, the interaction strength.")
    length_scale: float = Field(default=1.0, gt=0, description="λ, the decay length of the pair weight.")
    neighbor_radius: Optional[float] = Field(
        default=math.sqrt(2), description="Pairs at most this far apart interact; null means every pair interacts."
    )

    class Config:
        frozen = True
        extra = "forbid"

    @root_validator(skip_on_failure=True)
    def validation_radius(cls, values):
        radius, grid = values["neighbor_radius"], values["grid"]

        if radius is None:
            if max(grid.height, grid.width) > FULL_PAIRWISE_MAX_SIDE:
                raise ValueError("Full pairwise interaction is only available for grids up to 3x3.")
        elif radius < 0:
            raise ValueError("The neighbor radius must be nonnegative.")

        return values

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def state_space(self) -> int:
        return self.vocab_size**self.grid.n

    def weight(self, distance: float) -> float:
        """w(d), strictly decreasing in d."""
        return math.exp(-(distance - 1.0) / self.length_scale)

    def interacts(self, distance: float) -> bool:
        return self.neighbor_radius is None or distance <= self.neighbor_radius + 1e-12

    def pairs(self) -> List[Tuple[int, int, float]]:
        """Interacting pairs ``(i, j, w(d_ij))`` with ``i < j`` as flat cell indices."""

        cells = list(self.grid.cells())
        result = []

        for i, j in itertools.combinations(range(len(cells)), 2):
            distance = math.dist(cells[i], cells[j])
            if self.interacts(distance):
                result.append((i, j, self.weight(distance)))

        return result


@dataclass(frozen=True)
class MaskState:
    """A partial assignment: revealed cells with their values, the rest masked."""

    grid: GridSpec
    revealed: Tuple[Tuple[Coord, int], ...] = ()
    masked: FrozenSet[Coord] = field(init=False)

    def __post_init__(self):
        revealed = tuple(sorted((Coord(*cell), int(value)) for cell, value in self.revealed))
        cells = [cell for cell, _ in revealed]

        if len(set(cells)) != len(cells):
            raise InvalidArgumentError("A cell is revealed more than once.")

        for cell in cells:
            if not self.grid.contains(cell):
                raise InvalidArgumentError(f"The cell {tuple(cell)} is outside of the {self.grid} grid.")

        object.__setattr__(self, "revealed", revealed)
        object.__setattr__(self, "masked", frozenset(self.grid.cells()) - set(cells))

    @classmethod
    def initial(cls, grid: GridSpec) -> "MaskState":
        """The fully masked state."""
        return cls(grid=grid)

    @classmethod
    def from_values(cls, grid: GridSpec, values: Mapping[Coord, int]) -> "MaskState":
        return cls(grid=grid, revealed=tuple(values.items()))

    @property
    def values(self) -> Dict[Coord, int]:
        return dict(self.revealed)

    @property
    def is_complete(self) -> bool:
        return not self.masked

    def reveal(self, values: Mapping[Coord, int]) -> "MaskState":
        """A new state with ``values`` committed."""

        for cell in values:
            if cell not in self.masked:
                raise InvalidArgumentError(f"The cell {tuple(cell)} is not masked.")

        return MaskState(grid=self.grid, revealed=self.revealed + tuple(values.items()))

    def masked_sorted(self) -> List[Coord]:
        return sorted(self.masked)


@dataclass(frozen=True)
class JointTable:
    """p(𝓧) over all V^(H·W) assignments, one axis per cell."""

    grid: GridSpec
    vocab_size: int
    probabilities: np.ndarray

    def flat(self) -> np.ndarray:
        """The probabilities in mixed-radix row-major assignment order."""
        return self.probabilities.reshape(-1)

    def marginal(self, axes: Sequence[int]) -> np.ndarray:
        """The marginal table over ``axes``, with its axes in the given order."""

        axes = list(axes)
        others = tuple(axis for axis in range(self.probabilities.ndim) if axis not in axes)
        table = self.probabilities.sum(axis=others) if others else self.probabilities

        # remaining axes are in increasing order
        kept = sorted(axes)
        return np.transpose(table, [kept.index(axis) for axis in axes])


def _check_tractable(model: ToyJointModel):
    if model.state_space > MAX_STATES:
        raise ResourceLimitError(
            f"The {model.grid} grid with V={model.vocab_size} has {model.state_space} assignments; "
            f"exact enumeration is limited to {MAX_STATES}."
        )


@lru_cache(maxsize=32)
def joint_table(model: ToyJointModel) -> JointTable:
    """Enumerate and normalize the joint distribution of ``model``."""

    _check_tractable(model)

    n, vocab = model.n, model.vocab_size
    values = np.arange(vocab)
    energy = np.zeros((vocab,) * n, dtype=np.float64)

    for i, j, weight in model.pairs():
        shape_i = [1] * n
        shape_i[i] = vocab
        shape_j = [1] * n
        shape_j[j] = vocab
        energy += weight * (values.reshape(shape_i) == values.reshape(shape_j))

    log_p = model.coupling * energy
    log_p -= logsumexp(log_p)

    probabilities = np.exp(log_p)
    probabilities.flags.writeable = False

    logger.debug("enumerated %d assignments of the %s grid", probabilities.size, model.grid)

    return JointTable(grid=model.grid, vocab_size=vocab, probabilities=probabilities)


def _check_values(model: ToyJointModel, state: MaskState):
    if state.grid != model.grid:
        raise InvalidArgumentError(f"The state grid {state.grid} does not match the model grid {model.grid}.")

    for cell, value in state.revealed:
        if not 0 <= value < model.vocab_size:
            raise InvalidArgumentError(
                f"The value {value} of cell {tuple(cell)} is outside of [0, {model.vocab_size})."
            )


def _conditioned(model: ToyJointModel, state: MaskState) -> Tuple[np.ndarray, List[Coord]]:
    """p(masked | revealed) with one axis per masked cell in row-major order."""

    _check_values(model, state)

    table = joint_table(model).probabilities
    index: List[object] = [slice(None)] * model.n

    for cell, value in state.revealed:
        index[model.grid.index(cell)] = value

    sub = table[tuple(index)]
    return sub / sub.sum(), state.masked_sorted()


def _check_masked(state: MaskState, cells: Iterable[Coord]):
    for cell in cells:
        if cell not in state.masked:
            raise InvalidArgumentError(f"The cell {tuple(cell)} is not masked.")


def exact_conditional_marginal(model: ToyJointModel, state: MaskState, cell: Coord) -> np.ndarray:
    """p(X_cell | revealed) by enumeration."""

    cell = Coord(*cell)
    _check_masked(state, [cell])

    sub, masked = _conditioned(model, state)
    position = masked.index(cell)
    others = tuple(axis for axis in range(sub.ndim) if axis != position)

    return sub.sum(axis=others)


def exact_conditional_joint(model: ToyJointModel, state: MaskState, cells: Iterable[Coord]) -> np.ndarray:
    """p(X_cells | revealed) by enumeration.

    Returns:
        An array with one axis of size V per cell, axes in row-major cell order.

    """

    cells = sorted({Coord(*cell) for cell in cells})
    _check_masked(state, cells)

    sub, masked = _conditioned(model, state)
    positions = [masked.index(cell) for cell in cells]
    others = tuple(axis for axis in range(sub.ndim) if axis not in positions)

    return sub.sum(axis=others) if others else sub


class EnumerationOracle:
    """Exact conditional marginals from the enumerated joint table.

    Args:
        model: a model with at most 10⁷ assignments.

    """

    def __init__(self, model: ToyJointModel):
        _check_tractable(model)

        self.model = model
        self.grid = model.grid
        self.vocab_size = model.vocab_size
        self._marginals = lru_cache(maxsize=4096)(self._compute)

    def _compute(self, state: MaskState) -> Marginals:
        sub, masked = _conditioned(self.model, state)
        result: Marginals = {}

        for position, cell in enumerate(masked):
            others = tuple(axis for axis in range(sub.ndim) if axis != position)
            result[cell] = sub.sum(axis=others)

        return result

    def __call__(self, state: MaskState) -> Marginals:
        return dict(self._marginals(state))


class TransferMatrixOracle:
    """Exact conditional marginals by forward/backward passes over row states.

    Applies when only adjacent rows interact (radius < 2), which keeps the
    model a chain over rows with V^W states per row.

    Args:
        model: a model with ``neighbor_radius < 2`` and V^W ≤ 2^16.

    """

    def __init__(self, model: ToyJointModel):
        if model.neighbor_radius is None or model.neighbor_radius >= 2:
            raise ResourceLimitError("The transfer-matrix oracle needs a neighbor radius below 2.")

        row_states = model.vocab_size**model.grid.width
        if row_states > MAX_ROW_STATES:
            raise ResourceLimitError(f"{row_states} row states exceed the limit of {MAX_ROW_STATES}.")

        self.model = model
        self.grid = model.grid
        self.vocab_size = model.vocab_size

        width, vocab = model.grid.width, model.vocab_size

        # digits[s, c] is the value of column c in row state s
        self.digits = np.array(list(itertools.product(range(vocab), repeat=width)), dtype=np.int64).reshape(-1, width)
        self.onehot = (self.digits[:, :, None] == np.arange(vocab)[None, None, :]).astype(np.float64)

        log_row = np.zeros(len(self.digits))
        for c1, c2 in itertools.combinations(range(width), 2):
            distance = float(c2 - c1)
            if model.interacts(distance):
                log_row += model.weight(distance) * (self.digits[:, c1] == self.digits[:, c2])

        log_link = np.zeros((len(self.digits), len(self.digits)))
        for c1, c2 in itertools.product(range(width), repeat=2):
            distance = math.hypot(1.0, c2 - c1)
            if model.interacts(distance):
                log_link += model.weight(distance) * (self.digits[:, c1][:, None] == self.digits[:, c2][None, :])

        log_row *= model.coupling
        log_link *= model.coupling

        self.row_potential = np.exp(log_row - log_row.max())
        self.transfer = np.exp(log_link - log_link.max())
        self._marginals = lru_cache(maxsize=4096)(self._compute)

        logger.debug("transfer matrix with %d row states for the %s grid", len(self.digits), model.grid)

    def _evidence(self, state: MaskState) -> np.ndarray:
        allowed = np.ones((self.grid.height, len(self.digits)), dtype=bool)

        for cell, value in state.revealed:
            if not 0 <= value < self.vocab_size:
                raise InvalidArgumentError(f"The value {value} of cell {tuple(cell)} is out of range.")
            allowed[cell.row] &= self.digits[:, cell.col] == value

        return self.row_potential[None, :] * allowed

    def _compute(self, state: MaskState) -> Marginals:
        local = self._evidence(state)
        height = self.grid.height

        forward = np.empty_like(local)
        forward[0] = local[0] / local[0].sum()
        for r in range(1, height):
            message = (forward[r - 1] @ self.transfer) * local[r]
            forward[r] = message / message.sum()

        backward = np.ones_like(local)
        for r in range(height - 2, -1, -1):
            message = self.transfer @ (local[r + 1] * backward[r + 1])
            backward[r] = message / message.sum()

        result: Marginals = {}
        masked = state.masked

        for r in range(height):
            belief = forward[r] * backward[r]
            belief /= belief.sum()
            per_column = np.einsum("s,swv->wv", belief, self.onehot)

            for c in range(self.grid.width):
                cell = Coord(r, c)
                if cell in masked:
                    result[cell] = per_column[c]

        return result

    def __call__(self, state: MaskState) -> Marginals:
        if state.grid != self.grid:
            raise InvalidArgumentError(f"The state grid {state.grid} does not match the model grid {self.grid}.")

        return dict(self._marginals(state))


def oracle_for(model: ToyJointModel):
    """The cheapest exact oracle for ``model``."""

    if model.state_space <= MAX_STATES:
        return EnumerationOracle(model)

    return TransferMatrixOracle(model)
