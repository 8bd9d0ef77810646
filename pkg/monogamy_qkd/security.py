"""Security of the CHSH key-distribution protocol under a monogamy bound.

Bob guesses Alice's key bit with probability P_B = beta(A,B). Any
eavesdropping procedure with guessing probability P_E can be turned into a
CHSH strategy for Eve with beta(A,E) >= P_E/2 + 1/4, so a monogamy bound
f caps P_E at 2 f(P_B) - 1/2. The protocol is secure when P_B > P_E.
"""

import logging
from enum import Enum
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, field_validator
from scipy.special import entr

from monogamy_qkd.boxes import BipartiteBox, chsh_value
from monogamy_qkd.errors import DomainError
from monogamy_qkd.monogamy import CriticalBeta, MonogamyFunction, critical_beta

logger = logging.getLogger(__name__)


# ============================================================================
# Eve's Procedure and Strategies
# ============================================================================


class EveProcedure(BaseModel):
    """Guessing device: pij[i][j] = P(G = A | Eve inputs i, Alice's setting j)."""

    pij: Tuple[Tuple[float, float], Tuple[float, float]]

    @field_validator("pij")
    @classmethod
    def _entries_are_probabilities(cls, value):
        for row in value:
            for entry in row:
                if not 0.0 <= entry <= 1.0:
                    raise ValueError(f"procedure entries must lie in [0, 1], got {entry}")
        return value

    @classmethod
    def symmetric(cls, t: float, off_diagonal: float = 0.5) -> "EveProcedure":
        return cls(pij=((t, off_diagonal), (off_diagonal, t)))


class OutputRule(str, Enum):
    E_EQUALS_G = "E=G"
    E_EQUALS_G_XOR_e = "E=G^e"


class EveStrategy(BaseModel):
    input_choice: int
    output_rule: OutputRule
    achieved_beta_ae: float


class SecurityVerdict(BaseModel):
    monogamy: str
    p_b: float
    p_e_max: float
    margin: float
    secure: bool
    critical_beta: CriticalBeta


# ============================================================================
# Guessing Probabilities
# ============================================================================


def bob_guess_prob(beta_ab: float) -> float:
    """Bob guesses A = B xor ab and is right with probability beta(A,B)."""
    if not 0.5 <= beta_ab <= 1.0:
        raise DomainError(f"beta(A,B) must lie in [1/2, 1], got {beta_ab}")
    return beta_ab


def eve_guess_prob(proc: EveProcedure) -> float:
    """Eve always feeds Alice's announced setting, so only P00 and P11 count."""
    return (proc.pij[0][0] + proc.pij[1][1]) / 2


def strategy_from_procedure(proc: EveProcedure) -> EveStrategy:
    """Turn a guessing procedure into a CHSH strategy against Alice.

    Without knowing Alice's setting Eve commits to the input with the better
    diagonal entry: input 0 and E = G when P00 >= P11, otherwise input 1 and
    E = G xor e.
    """
    p00, p11 = proc.pij[0][0], proc.pij[1][1]
    if p00 >= p11:
        return EveStrategy(input_choice=0, output_rule=OutputRule.E_EQUALS_G, achieved_beta_ae=p00 / 2 + 0.25)
    return EveStrategy(input_choice=1, output_rule=OutputRule.E_EQUALS_G_XOR_e, achieved_beta_ae=p11 / 2 + 0.25)


def strategy_row_probabilities(proc: EveProcedure, strategy: EveStrategy) -> List[float]:
    """P(A xor E = ae | a, e) for (a, e) = (0,0), (1,0), (0,1), (1,1)."""
    i = strategy.input_choice
    xor_e = strategy.output_rule is OutputRule.E_EQUALS_G_XOR_e
    rows = []
    for a, e in ((0, 0), (1, 0), (0, 1), (1, 1)):
        hit = proc.pij[i][a]
        # E = A exactly when G = A, unless the rule flips E on e = 1.
        p_equal = 1 - hit if (xor_e and e == 1) else hit
        rows.append(p_equal if (a & e) == 0 else 1 - p_equal)
    return rows


def strategy_box(proc: EveProcedure, strategy: EveStrategy) -> BipartiteBox:
    """Alice-Eve box P(A,E|a,e) induced by the strategy, Alice's bit uniform."""
    i = strategy.input_choice
    xor_e = strategy.output_rule is OutputRule.E_EQUALS_G_XOR_e
    probs = np.zeros((2,) * 4)
    for a, e, A in np.ndindex(2, 2, 2):
        hit = proc.pij[i][a]
        flip = int(xor_e and e == 1)
        probs[a, e, A, A ^ flip] += 0.5 * hit
        probs[a, e, A, A ^ flip ^ 1] += 0.5 * (1 - hit)
    return BipartiteBox(probs)


def strategy_chsh_brute_force(proc: EveProcedure, strategy: EveStrategy) -> float:
    return chsh_value(strategy_box(proc, strategy))


def eve_chsh_lower_bound(p_e: float) -> float:
    if not 0.0 <= p_e <= 1.0:
        raise DomainError(f"P_E must lie in [0, 1], got {p_e}")
    return p_e / 2 + 0.25


def max_eve_prob(f: MonogamyFunction, beta_ab: float) -> float:
    """Largest P_E compatible with P_E/2 + 1/4 <= f(beta(A,B)), clamped to [0, 1]."""
    return float(np.clip(2 * f(beta_ab) - 0.5, 0.0, 1.0))


def secure(f: MonogamyFunction, beta_ab: float) -> SecurityVerdict:
    p_b = bob_guess_prob(beta_ab)
    p_e = max_eve_prob(f, beta_ab)
    verdict = SecurityVerdict(
        monogamy=f.selector,
        p_b=p_b,
        p_e_max=p_e,
        margin=p_b - p_e,
        secure=p_b > p_e,
        critical_beta=critical_beta(f),
    )
    logger.debug(f"{f.name} at beta={beta_ab:.6f}: P_B={p_b:.6f} P_E<={p_e:.6f} secure={verdict.secure}")
    return verdict


# ============================================================================
# Information-Theoretic Diagnostics
# ============================================================================


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"binary entropy needs x in [0, 1], got {x}")
    return float((entr(x) + entr(1 - x)) / np.log(2))


def mutual_information_bsc(p: float) -> float:
    """I(A:G) for a uniform bit guessed correctly with probability p."""
    return 1 - binary_entropy(p)


def key_rate_proxy(p_b: float, p_e: float) -> float:
    """One-way rate proxy h(P_E) - h(P_B); diagnostic only."""
    for name, value in (("p_b", p_b), ("p_e", p_e)):
        if not 0.5 <= value <= 1.0:
            raise DomainError(f"{name} must lie in [1/2, 1], got {value}")
    return binary_entropy(p_e) - binary_entropy(p_b)
