"""Monogamy functions and critical security thresholds.

A monogamy function f bounds Eve's CHSH value with Alice by a function of
Alice and Bob's: beta(A,E) <= f(beta(A,B)). Three families are built in:

  ns     f(b) = 3/2 - b                                   on [1/2, 1]
  qm     f(b) = sqrt(1/8 - (b - 1/2)^2) + 1/2              on [1/2, Tsirelson]
  p:<p>  f(b) = ((1 - (2b - 1)^p)^(1/p) + 1) / 2, p >= 1   on [1/2, 1]

Security needs f(beta) < beta/2 + 1/4 (the sufficient-condition line); the
crossing point of f with that line is the critical beta.
"""

import functools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.optimize import bisect

from monogamy_qkd.boxes import PartyPair, TripartiteBox, chsh_value_by_setting, worst_case_chsh
from monogamy_qkd.config import (
    ALGEBRAIC_TOLERANCE,
    BISECTION_MAXITER,
    BISECTION_XTOL,
    MONOTONICITY_GRID_STEP,
    PROBABILITY_TOLERANCE,
    TSIRELSON_BOUND,
    TSIRELSON_LINE_VALUE,
)
from monogamy_qkd.errors import ConfigError, DomainError, OutOfTheoryRange

logger = logging.getLogger(__name__)


# ============================================================================
# Raw Monogamy Formulas
# ============================================================================


def _check_half_unit(beta: float) -> None:
    if not 0.5 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [1/2, 1], got {beta}")


def mono_ns(beta: float) -> float:
    _check_half_unit(beta)
    return 1.5 - beta


def mono_qm(beta: float) -> float:
    if beta > TSIRELSON_BOUND + ALGEBRAIC_TOLERANCE:
        raise OutOfTheoryRange(
            f"beta={beta} exceeds the Tsirelson bound {TSIRELSON_BOUND:.10f}; "
            "quantum mechanics cannot produce it"
        )
    _check_half_unit(beta)
    beta = min(beta, TSIRELSON_BOUND)
    # Factored so the radicand is exactly 0 at the Tsirelson bound.
    r, d = TSIRELSON_BOUND - 0.5, beta - 0.5
    return math.sqrt(max(0.0, (r - d) * (r + d))) + 0.5


def mono_p(p: float, beta: float) -> float:
    if not (math.isfinite(p) and p >= 1.0):
        raise DomainError(f"monogamy exponent must be a finite real >= 1, got {p}")
    _check_half_unit(beta)
    t = 2 * beta - 1
    return 0.5 * ((1 - t**p) ** (1 / p) + 1)


# ============================================================================
# Monogamy Function Type
# ============================================================================


class MonogamyKind(str, Enum):
    NS = "ns"
    QM = "qm"
    PNORM = "p"


@dataclass(frozen=True)
class MonogamyFunction:
    """A named, non-increasing bound f: [1/2, 1] -> [0, 1] on beta(A,E).

    Calling the function reflects beta < 1/2 to 1 - beta first: flipping
    Bob's outcome maps beta(A,B) to 1 - beta(A,B) and cannot change Eve's
    correlations.
    """

    kind: MonogamyKind
    exponent: Optional[float] = None

    def __post_init__(self):
        if self.kind is MonogamyKind.PNORM:
            if self.exponent is None or not math.isfinite(self.exponent) or self.exponent < 1.0:
                raise DomainError(f"p-monogamy needs an exponent >= 1, got {self.exponent}")
        elif self.exponent is not None:
            raise DomainError(f"{self.kind.value} monogamy takes no exponent")

    @classmethod
    def ns(cls) -> "MonogamyFunction":
        return cls(MonogamyKind.NS)

    @classmethod
    def qm(cls) -> "MonogamyFunction":
        return cls(MonogamyKind.QM)

    @classmethod
    def pnorm(cls, p: float) -> "MonogamyFunction":
        return cls(MonogamyKind.PNORM, float(p))

    @classmethod
    def from_selector(cls, selector: str) -> "MonogamyFunction":
        """Parse ``"ns"``, ``"qm"`` or ``"p:<real >= 1>"``."""
        text = selector.strip().lower()
        if text == "ns":
            return cls.ns()
        if text == "qm":
            return cls.qm()
        if text.startswith("p:"):
            try:
                p = float(text[2:])
            except ValueError:
                raise ConfigError(f"bad exponent in monogamy selector {selector!r}") from None
            return cls.pnorm(p)
        raise ConfigError(f"unknown monogamy selector {selector!r} (expected ns, qm or p:<x>)")

    @property
    def selector(self) -> str:
        if self.kind is MonogamyKind.PNORM:
            return f"p:{self.exponent:g}"
        return self.kind.value

    @property
    def name(self) -> str:
        if self.kind is MonogamyKind.PNORM:
            return f"{self.exponent:g}-monogamy"
        return f"{self.kind.name}-monogamy"

    @property
    def domain(self) -> Tuple[float, float]:
        if self.kind is MonogamyKind.QM:
            return (0.5, TSIRELSON_BOUND)
        return (0.5, 1.0)

    def contains(self, beta: float) -> bool:
        lo, hi = self.domain
        reflected = 1 - beta if beta < 0.5 else beta
        return lo <= reflected <= hi + ALGEBRAIC_TOLERANCE

    def __call__(self, beta: float) -> float:
        if 0.0 <= beta < 0.5:
            beta = 1 - beta
        if self.kind is MonogamyKind.NS:
            return mono_ns(beta)
        if self.kind is MonogamyKind.QM:
            return mono_qm(beta)
        return mono_p(self.exponent, beta)


NS_MONOGAMY = MonogamyFunction.ns()
QM_MONOGAMY = MonogamyFunction.qm()
P11_MONOGAMY = MonogamyFunction.pnorm(1.1)

BUILTIN_MONOGAMIES = (NS_MONOGAMY, QM_MONOGAMY, P11_MONOGAMY)


def domain_grid(f: MonogamyFunction, step: float = MONOTONICITY_GRID_STEP) -> np.ndarray:
    lo, hi = f.domain
    n = int(math.floor((hi - lo) / step + 1e-9))
    grid = lo + step * np.arange(n + 1)
    if hi - grid[-1] > 1e-12:
        grid = np.append(grid, hi)
    return grid


def check_non_increasing(f: MonogamyFunction, step: float = MONOTONICITY_GRID_STEP) -> bool:
    values = np.array([f(b) for b in domain_grid(f, step)])
    in_range = bool(np.all((values >= 0) & (values <= 1)))
    return in_range and bool(np.all(np.diff(values) <= ALGEBRAIC_TOLERANCE))


# ============================================================================
# Reports
# ============================================================================


class MonogamyReport(BaseModel):
    """Outcome of checking beta(A,E) <= f(beta(A,B)) on a tripartite box."""

    monogamy: str
    beta_ab: float
    beta_ae: float
    bound: float
    satisfied: bool
    slack: float


class CriticalBeta(BaseModel):
    """Root of f(beta) = beta/2 + 1/4, or a marker when there is none."""

    status: Literal["numeric", "secure-everywhere", "never-secure-in-domain"]
    value: Optional[float] = None

    @property
    def is_numeric(self) -> bool:
        return self.status == "numeric"


class TsirelsonCheck(BaseModel):
    monogamy: str
    f_value: float
    threshold: float
    holds: bool


# ============================================================================
# Operations
# ============================================================================


def check_monogamy(tri: TripartiteBox, f: MonogamyFunction) -> MonogamyReport:
    """Check f-monogamy on a box, taking the worst case over the left-out
    party's setting for both pairs."""
    candidates = chsh_value_by_setting(tri, PartyPair.AB)
    bounds = [f(b) for b in candidates]
    worst = int(np.argmin(bounds))
    beta_ab, bound = candidates[worst], bounds[worst]
    beta_ae = worst_case_chsh(tri, PartyPair.AE)

    report = MonogamyReport(
        monogamy=f.selector,
        beta_ab=beta_ab,
        beta_ae=beta_ae,
        bound=bound,
        satisfied=beta_ae <= bound + PROBABILITY_TOLERANCE,
        slack=bound - beta_ae,
    )
    logger.debug(f"{f.name}: beta_AB={beta_ab:.6f} beta_AE={beta_ae:.6f} slack={report.slack:.3g}")
    return report


def sufficient_line(beta: float) -> float:
    return beta / 2 + 0.25


def security_margin(f: MonogamyFunction, beta: float) -> float:
    """Distance below the sufficient-condition line; positive means secure."""
    return sufficient_line(beta) - f(beta)


@functools.lru_cache(maxsize=None)
def critical_beta(f: MonogamyFunction) -> CriticalBeta:
    """Bisect for the crossing of f with the sufficient-condition line."""
    lo, hi = f.domain

    def gap(beta: float) -> float:
        return f(beta) - sufficient_line(beta)

    gap_lo, gap_hi = gap(lo), gap(hi)

    if gap_lo < 0:
        return CriticalBeta(status="secure-everywhere")
    if gap_hi > 0:
        return CriticalBeta(status="never-secure-in-domain")
    if gap_hi == 0:
        return CriticalBeta(status="numeric", value=hi)

    root = bisect(gap, lo, hi, xtol=BISECTION_XTOL, maxiter=BISECTION_MAXITER)
    logger.debug(f"critical beta for {f.name}: {root:.12f}")
    return CriticalBeta(status="numeric", value=float(root))


def closed_form_pnorm_critical(p: float) -> float:
    """Exact root for p-monogamy: (1 + (1 + 2^-p)^(-1/p)) / 2."""
    t = (1 + 2.0 ** (-p)) ** (-1 / p)
    return (1 + t) / 2


def cross_theory_secure(f_eve: MonogamyFunction, beta_honest: float) -> bool:
    """Whether honest parties reaching ``beta_honest`` beat an eavesdropper
    bound by ``f_eve``."""
    return f_eve(beta_honest) < sufficient_line(beta_honest)


def tsirelson_condition(f: MonogamyFunction) -> TsirelsonCheck:
    value = f(TSIRELSON_BOUND)
    return TsirelsonCheck(
        monogamy=f.selector,
        f_value=value,
        threshold=TSIRELSON_LINE_VALUE,
        holds=value < TSIRELSON_LINE_VALUE,
    )


def tsirelson_gap(f: MonogamyFunction) -> float:
    """Relative distance of the critical beta below the Tsirelson bound."""
    crit = critical_beta(f)
    if not crit.is_numeric:
        raise DomainError(f"{f.name} has no numeric critical beta ({crit.status})")
    return (TSIRELSON_BOUND - crit.value) / TSIRELSON_BOUND


def qm_relation_holds(beta_ab: float, beta_ae: float, tol: float = PROBABILITY_TOLERANCE) -> bool:
    """Quadratic quantum trade-off: (b_AE - 1/2)^2 + (b_AB - 1/2)^2 <= 1/8."""
    return (beta_ae - 0.5) ** 2 + (beta_ab - 0.5) ** 2 <= 0.125 + tol


def secured_theories(
    beta: float, candidates: Iterable[MonogamyFunction] = BUILTIN_MONOGAMIES
) -> List[MonogamyFunction]:
    """Monogamies whose eavesdroppers are beaten by a pair reaching ``beta``.

    Candidates that cannot evaluate ``beta`` at all are left out.
    """
    secured = []
    for f in candidates:
        if not f.contains(beta):
            continue
        if cross_theory_secure(f, beta):
            secured.append(f)
    return secured
