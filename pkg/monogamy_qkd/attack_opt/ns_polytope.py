"""Linear programs over the tripartite no-signaling polytope.

Variables are the 64 entries of P(A,B,E|a,b,e) in [a][b][e][A][B][E]
order. The oracle maximizes beta(A,E) subject to normalization,
no-signaling and beta(A,B) >= b, which certifies how tight NS-monogamy
beta(A,B) + beta(A,E) <= 3/2 is.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.optimize import linprog

from monogamy_qkd.boxes import PartyPair, TripartiteBox, signaling_deficit
from monogamy_qkd.config import (
    ALGEBRAIC_TOLERANCE,
    CLASSICAL_BOUND,
    LP_METHOD,
    LP_TOLERANCE,
    TIGHTNESS_TOLERANCE,
)
from monogamy_qkd.errors import DomainError, LPInfeasible, LPSolverError

logger = logging.getLogger(__name__)

_SHAPE = (2,) * 6
_N_VARS = 64


def _slot(fixed: Dict[int, int]) -> Tuple:
    """Index into the 6-axis tensor with some axes pinned."""
    return tuple(fixed.get(axis, slice(None)) for axis in range(6))


# ============================================================================
# Constraint Construction
# ============================================================================


def normalization_rows() -> Tuple[np.ndarray, np.ndarray]:
    rows = []
    for settings in itertools.product(range(2), repeat=3):
        row = np.zeros(_SHAPE)
        row[_slot(dict(enumerate(settings)))] = 1.0
        rows.append(row.ravel())
    return np.array(rows), np.ones(len(rows))


def no_signaling_rows() -> Tuple[np.ndarray, np.ndarray]:
    """Marginal consistency for every pair and every single party.

    The single-party rows are implied by the pairwise ones together with
    normalization; the solver copes with the redundancy.
    """
    rows = []
    for party in range(3):
        others = [k for k in range(3) if k != party]
        # Pairwise: summing out party's outcome must not depend on its setting.
        for s1, s2, o1, o2 in itertools.product(range(2), repeat=4):
            pinned = {others[0]: s1, others[1]: s2, 3 + others[0]: o1, 3 + others[1]: o2}
            row = np.zeros(_SHAPE)
            row[_slot({**pinned, party: 0})] += 1.0
            row[_slot({**pinned, party: 1})] -= 1.0
            rows.append(row.ravel())
        # Single party: its marginal must not depend on the other two settings.
        for s, o in itertools.product(range(2), repeat=2):
            reference = {party: s, 3 + party: o, others[0]: 0, others[1]: 0}
            for s1, s2 in ((0, 1), (1, 0), (1, 1)):
                row = np.zeros(_SHAPE)
                row[_slot(reference)] += 1.0
                row[_slot({party: s, 3 + party: o, others[0]: s1, others[1]: s2})] -= 1.0
                rows.append(row.ravel())
    return np.array(rows), np.zeros(len(rows))


def chsh_coefficients(pair: PartyPair, reference_setting: int = 0) -> np.ndarray:
    """Linear form giving beta on ``pair``, the third party's setting fixed."""
    first, second = (p.value for p in pair.value)
    third = pair.third.value
    coeffs = np.zeros(_SHAPE)
    for index in np.ndindex(*_SHAPE):
        if index[third] != reference_setting:
            continue
        x, y = index[first], index[second]
        X, Y = index[3 + first], index[3 + second]
        if (X ^ Y) == (x & y):
            coeffs[index] = 0.25
    return coeffs.ravel()


@dataclass(frozen=True)
class LinearProgram:
    """maximize objective @ p  s.t.  a_eq @ p = b_eq,  a_ub @ p <= b_ub,  p >= 0."""

    objective: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray

    def __post_init__(self):
        for name in ("objective", "a_eq", "b_eq", "a_ub", "b_ub"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")
        if self.objective.shape != (_N_VARS,):
            raise ValueError(f"expected {_N_VARS} variables, got {self.objective.shape}")


def monogamy_program(b: float) -> LinearProgram:
    """max beta(A,E) over NS boxes with beta(A,B) >= b."""
    a_norm, b_norm = normalization_rows()
    a_ns, b_ns = no_signaling_rows()
    return LinearProgram(
        objective=chsh_coefficients(PartyPair.AE),
        a_eq=np.vstack([a_norm, a_ns]),
        b_eq=np.concatenate([b_norm, b_ns]),
        a_ub=-chsh_coefficients(PartyPair.AB)[None, :],
        b_ub=np.array([-b]),
    )


# ============================================================================
# Solving
# ============================================================================


@dataclass(frozen=True)
class LPResult:
    status: Literal["optimal", "infeasible"]
    optimum: Optional[float] = None
    argmax: Optional[TripartiteBox] = None


def _to_box(x: np.ndarray) -> TripartiteBox:
    probs = np.clip(x, 0.0, None).reshape(_SHAPE)
    # Solver round-off is ~LP_TOLERANCE; renormalize so the box is exact.
    probs = probs / probs.sum(axis=(3, 4, 5), keepdims=True)
    return TripartiteBox(probs)


def solve(program: LinearProgram) -> LPResult:
    res = linprog(
        -program.objective,
        A_ub=program.a_ub,
        b_ub=program.b_ub,
        A_eq=program.a_eq,
        b_eq=program.b_eq,
        bounds=(0, 1),
        method=LP_METHOD,
    )
    if res.status == 2:
        return LPResult(status="infeasible")
    if res.status != 0:
        raise LPSolverError(f"linprog stopped with status {res.status}: {res.message}")

    box = _to_box(res.x)
    optimum = float(-res.fun)
    achieved = float(program.objective @ box.probs.ravel())
    if abs(achieved - optimum) > LP_TOLERANCE:
        logger.warning(f"LP argmax objective {achieved:.10f} drifted from optimum {optimum:.10f}")
    return LPResult(status="optimal", optimum=optimum, argmax=box)


def max_chsh_ae_given_ab(b: float) -> LPResult:
    """Exact NS trade-off: the largest beta(A,E) once beta(A,B) >= b."""
    if not 0.5 - ALGEBRAIC_TOLERANCE <= b <= 1.0 + ALGEBRAIC_TOLERANCE:
        raise DomainError(f"b must lie in [1/2, 1], got {b}")
    result = solve(monogamy_program(min(b, 1.0)))
    if result.status == "optimal":
        logger.debug(
            f"b={b:.6f}: max beta_AE={result.optimum:.10f} "
            f"(argmax deficit {signaling_deficit(result.argmax):.2e})"
        )
    return result


# ============================================================================
# Tightness Table
# ============================================================================


class TightnessRow(BaseModel):
    b: float
    lp_optimum: float
    analytic_bound: float
    abs_error: float
    passed: bool


def analytic_ns_bound(b: float) -> float:
    return 1.5 - b


def tightness_grid(start: float, stop: float, step: float) -> List[float]:
    n = int(math.floor((stop - start) / step + 1e-9))
    grid = [start + k * step for k in range(n + 1)]
    if stop - grid[-1] > 1e-12:
        grid.append(stop)
    return [min(b, stop) for b in grid]


def tightness_table(start: float, stop: float, step: float, workers: int = 1) -> List[TightnessRow]:
    grid = tightness_grid(start, stop, step)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(max_chsh_ae_given_ab, grid))

    rows = []
    for b, result in zip(grid, results):
        if result.status != "optimal":
            raise LPInfeasible(f"no no-signaling box reaches beta(A,B) >= {b}")
        analytic = analytic_ns_bound(b)
        error = abs(result.optimum - analytic)
        rows.append(
            TightnessRow(
                b=b,
                lp_optimum=result.optimum,
                analytic_bound=analytic,
                abs_error=error,
                passed=error < TIGHTNESS_TOLERANCE,
            )
        )
    failures = sum(not row.passed for row in rows)
    logger.info(f"Tightness sweep over {len(rows)} points finished, {failures} failure(s)")
    return rows


def verify_ns_monogamy_tightness(
    grid_step: float, start: float = CLASSICAL_BOUND, workers: int = 1
) -> List[TightnessRow]:
    """Compare the LP optimum with 3/2 - b on a grid from ``start`` to 1."""
    if not 0.0 < grid_step <= 0.1:
        raise DomainError(f"grid step must lie in (0, 0.1], got {grid_step}")
    if not 0.5 <= start < 1.0:
        raise DomainError(f"grid start must lie in [1/2, 1), got {start}")
    return tightness_table(start, 1.0, grid_step, workers)
