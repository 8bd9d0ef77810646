"""Boxes: conditional probability tables for binary settings and outcomes.

A bipartite box is indexed ``probs[x][y][X][Y]`` and a tripartite box
``probs[a][b][e][A][B][E]``: settings first, outcomes last, parties in
A, B, E order. Flattening in C order gives the table layout used by the
JSON box files (settings-major, outcomes-minor).

For bipartite boxes ``Party.A`` is the X-side and ``Party.B`` the Y-side.
"""

import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from typing import ClassVar, Optional, Sequence, Tuple, Union

import numpy as np

from monogamy_qkd.config import (
    ALGEBRAIC_TOLERANCE,
    NEGATIVE_CLAMP,
    PROBABILITY_TOLERANCE,
)
from monogamy_qkd.errors import (
    ArityMismatch,
    BoxFormatError,
    DomainError,
    NegativeProbability,
    NormalizationError,
)

logger = logging.getLogger(__name__)


class Party(Enum):
    A = 0
    B = 1
    E = 2


class PartyPair(Enum):
    """Which two parties a CHSH value is evaluated on."""

    AB = (Party.A, Party.B)
    AE = (Party.A, Party.E)
    BE = (Party.B, Party.E)

    @property
    def third(self) -> Party:
        (remaining,) = set(Party) - set(self.value)
        return remaining


# ============================================================================
# Box Types
# ============================================================================


def _setting_label(index: int, arity: int) -> str:
    bits = np.unravel_index(index, (2,) * arity)
    return "(" + ",".join(str(int(b)) for b in bits) + ")"


def _validated(probs, arity: int) -> np.ndarray:
    """Copy, check and clamp a probability tensor of the given arity."""
    shape = (2,) * (2 * arity)
    arr = np.array(probs, dtype=float)
    if arr.shape != shape:
        raise BoxFormatError(f"expected a table of shape {shape}, got {arr.shape}")

    flat = arr.ravel()
    non_finite = np.flatnonzero(~np.isfinite(flat))
    if non_finite.size:
        i = int(non_finite[0])
        raise BoxFormatError(f"entry {i} is not finite ({flat[i]})", index=i)

    negative = np.flatnonzero(flat < -NEGATIVE_CLAMP)
    if negative.size:
        i = int(negative[0])
        raise NegativeProbability(f"entry {i} is negative ({flat[i]:.3g})", index=i)
    arr[arr < 0] = 0.0

    sums = arr.reshape(2**arity, 2**arity).sum(axis=1)
    off = np.flatnonzero(np.abs(sums - 1.0) > PROBABILITY_TOLERANCE)
    if off.size:
        i = int(off[0])
        raise NormalizationError(
            f"outcomes for settings {_setting_label(i, arity)} sum to {sums[i]:.12g}, not 1",
            index=i,
        )

    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BipartiteBox:
    """P(X,Y|x,y), stored as a read-only array indexed [x][y][X][Y]."""

    probs: np.ndarray
    arity: ClassVar[int] = 2

    def __post_init__(self):
        object.__setattr__(self, "probs", _validated(self.probs, self.arity))

    def to_table(self) -> list:
        return self.probs.ravel().tolist()

    def allclose(self, other: "BipartiteBox", atol: float = ALGEBRAIC_TOLERANCE) -> bool:
        return type(other) is type(self) and np.allclose(self.probs, other.probs, rtol=0, atol=atol)


@dataclass(frozen=True, eq=False)
class TripartiteBox:
    """P(A,B,E|a,b,e), stored as a read-only array indexed [a][b][e][A][B][E]."""

    probs: np.ndarray
    arity: ClassVar[int] = 3

    def __post_init__(self):
        object.__setattr__(self, "probs", _validated(self.probs, self.arity))

    def to_table(self) -> list:
        return self.probs.ravel().tolist()

    def allclose(self, other: "TripartiteBox", atol: float = ALGEBRAIC_TOLERANCE) -> bool:
        return type(other) is type(self) and np.allclose(self.probs, other.probs, rtol=0, atol=atol)


Box = Union[BipartiteBox, TripartiteBox]

# Indicator of X xor Y == x*y, indexed [x][y][X][Y]
_x, _y, _X, _Y = np.ix_(*([np.arange(2)] * 4))
CHSH_WIN = ((_X ^ _Y) == (_x & _y)).astype(float)


# ============================================================================
# Constructors
# ============================================================================


def _table_to_box(table: Sequence[float], arity: int) -> Box:
    values = np.asarray(table, dtype=float).ravel()
    expected = 4**arity
    if values.size != expected:
        raise BoxFormatError(f"an arity-{arity} table needs {expected} entries, got {values.size}")
    cls = BipartiteBox if arity == 2 else TripartiteBox
    return cls(values.reshape((2,) * (2 * arity)))


def bipartite_from_table(table: Sequence[float]) -> BipartiteBox:
    """Build a bipartite box from 16 reals in [x][y][X][Y] order."""
    return _table_to_box(table, 2)


def tripartite_from_table(table: Sequence[float]) -> TripartiteBox:
    """Build a tripartite box from 64 reals in [a][b][e][A][B][E] order."""
    return _table_to_box(table, 3)


def pr_box(q: float = 0.0) -> BipartiteBox:
    """Biased PR box: support X xor Y = xy, weight 1/2 + (-1)^Y q.

    ``q = 0`` is the standard (no-signaling) PR box.
    """
    if not 0.0 <= q <= 0.5:
        raise DomainError(f"PR-box bias q must lie in [0, 1/2], got {q}")
    weights = 0.5 + np.where(_Y == 0, q, -q)
    return BipartiteBox(weights * CHSH_WIN)


def white_noise_bipartite() -> BipartiteBox:
    return BipartiteBox(np.full((2,) * 4, 0.25))


def white_noise_tripartite() -> TripartiteBox:
    return TripartiteBox(np.full((2,) * 6, 0.125))


def isotropic_box(beta: float) -> BipartiteBox:
    """Mixture of the PR box and white noise with CHSH value ``beta``."""
    if not 0.5 <= beta <= 1.0:
        raise DomainError(f"isotropic box needs beta in [1/2, 1], got {beta}")
    return mix(pr_box(0.0), white_noise_bipartite(), 2 * beta - 1)


def deterministic_box(f_x: Tuple[int, int], f_y: Tuple[int, int]) -> BipartiteBox:
    """Local deterministic box with X = f_x[x] and Y = f_y[y]."""
    probs = np.zeros((2,) * 4)
    for x, y in itertools.product(range(2), repeat=2):
        probs[x, y, f_x[x], f_y[y]] = 1.0
    return BipartiteBox(probs)


def mix(b1: Box, b2: Box, p: float) -> Box:
    """Convex combination p*b1 + (1-p)*b2 of two boxes of the same arity."""
    if type(b1) is not type(b2):
        raise ArityMismatch(f"cannot mix arity {b1.arity} with arity {b2.arity}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"mixing weight must lie in [0, 1], got {p}")
    return type(b1)(p * b1.probs + (1 - p) * b2.probs)


_SETTING_AXES = "abe"
_OUTCOME_AXES = "ABE"


def extend_with_noise(bip: BipartiteBox, pair: PartyPair, swap: bool = False) -> TripartiteBox:
    """Hand ``bip`` to the two parties of ``pair``; the third gets a fair coin.

    The box's X-side goes to the first party of the pair, or to the second
    one when ``swap`` is set.
    """
    first, second = pair.value
    if swap:
        first, second = second, first
    third = pair.third

    box_subscripts = (
        _SETTING_AXES[first.value] + _SETTING_AXES[second.value]
        + _OUTCOME_AXES[first.value] + _OUTCOME_AXES[second.value]
    )
    noise_subscripts = _SETTING_AXES[third.value] + _OUTCOME_AXES[third.value]
    probs = np.einsum(
        f"{box_subscripts},{noise_subscripts}->abeABE",
        bip.probs,
        np.full((2, 2), 0.5),
    )
    return TripartiteBox(probs)


def eve_example_box(p: float, q1: float, q2: float) -> TripartiteBox:
    """Signaling box satisfying NS-monogamy with equality.

    With probability ``p`` parties A and B share a PR box biased by ``q1``,
    otherwise A and E share one biased by ``q2``; the left-out party sees
    white noise.
    """
    return mix(
        extend_with_noise(pr_box(q1), PartyPair.AB),
        extend_with_noise(pr_box(q2), PartyPair.AE),
        p,
    )


# ============================================================================
# Marginals and CHSH
# ============================================================================


def pair_marginal(tri: TripartiteBox, pair: PartyPair, reference_setting: int = 0) -> BipartiteBox:
    """Marginal on ``pair`` with the third party's setting fixed."""
    third = pair.third.value
    fixed = np.take(tri.probs, reference_setting, axis=third)
    # Outcome axis of party k sits at 2 + k once one settings axis is gone.
    return BipartiteBox(fixed.sum(axis=2 + third))


def _chsh(bip: BipartiteBox) -> float:
    return float(np.sum(bip.probs * CHSH_WIN) / 4)


def chsh_value(box: Box, pair: Optional[PartyPair] = None, reference_setting: int = 0) -> float:
    """CHSH success probability: 1/4 sum over x,y of P(X xor Y = xy | x, y).

    Tripartite boxes need a ``pair``; the left-out party's setting is held
    at ``reference_setting``.
    """
    if isinstance(box, BipartiteBox):
        if pair is not None:
            raise ArityMismatch("a bipartite box has no party pair to select")
        return _chsh(box)
    if pair is None:
        raise ArityMismatch("a tripartite box needs a party pair")
    return _chsh(pair_marginal(box, pair, reference_setting))


def chsh_value_by_setting(tri: TripartiteBox, pair: PartyPair) -> Tuple[float, float]:
    return (chsh_value(tri, pair, 0), chsh_value(tri, pair, 1))


def worst_case_chsh(tri: TripartiteBox, pair: PartyPair) -> float:
    return max(chsh_value_by_setting(tri, pair))


# ============================================================================
# Signaling and Relabelling
# ============================================================================


def signaling_deficit(box: Box) -> float:
    """Largest change of any marginal under a change of the other settings.

    For every nonempty proper subset of parties, the marginal on that
    subset's outcomes must not depend on the settings outside it; the
    deficit is the worst spread seen. It is 0 for no-signaling boxes.
    """
    n = box.arity
    worst = 0.0
    for size in range(1, n):
        for subset in itertools.combinations(range(n), size):
            others = tuple(k for k in range(n) if k not in subset)
            marginal = box.probs.sum(axis=tuple(n + k for k in others))
            spread = marginal.max(axis=others) - marginal.min(axis=others)
            worst = max(worst, float(spread.max()))
    return worst


def is_no_signaling(box: Box, tol: float = PROBABILITY_TOLERANCE) -> bool:
    return signaling_deficit(box) <= tol


def flip_outcome(box: Box, party: Party) -> Box:
    """Relabel ``party``'s outcome bit (0 <-> 1)."""
    if party.value >= box.arity:
        raise ArityMismatch(f"party {party.name} does not exist in an arity-{box.arity} box")
    return type(box)(np.flip(box.probs, axis=box.arity + party.value))
