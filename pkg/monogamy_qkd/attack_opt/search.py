"""Enumeration and grid-search oracles.

Classical CHSH bound by enumerating local deterministic strategies, and the
best eavesdropping procedure a monogamy bound still permits.
"""

import itertools
import logging
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel

from monogamy_qkd.boxes import chsh_value, deterministic_box
from monogamy_qkd.monogamy import MonogamyFunction
from monogamy_qkd.errors import DomainError
from monogamy_qkd.security import EveProcedure, eve_guess_prob

logger = logging.getLogger(__name__)

# The four functions {0,1} -> {0,1}, as (value at 0, value at 1)
RESPONSE_FUNCTIONS = ((0, 0), (0, 1), (1, 0), (1, 1))


class DeterministicStrategy(BaseModel):
    f_x: Tuple[int, int]
    f_y: Tuple[int, int]
    beta: float


def enumerate_deterministic_strategies() -> List[DeterministicStrategy]:
    return [
        DeterministicStrategy(f_x=f_x, f_y=f_y, beta=chsh_value(deterministic_box(f_x, f_y)))
        for f_x, f_y in itertools.product(RESPONSE_FUNCTIONS, repeat=2)
    ]


def brute_force_classical_bound() -> float:
    return max(s.beta for s in enumerate_deterministic_strategies())


def best_procedure_under_monogamy(
    f: MonogamyFunction, beta_ab: float, search_step: float
) -> Tuple[EveProcedure, float]:
    """Largest symmetric procedure (P00 = P11 = t) that f still allows.

    The procedure induces beta(A,E) = t/2 + 1/4, which must stay below
    f(beta_ab); returns the procedure and its guessing probability.
    """
    if not 0.0 < search_step <= 0.1:
        raise DomainError(f"search step must lie in (0, 0.1], got {search_step}")
    bound = f(beta_ab)

    ts = search_step * np.arange(int(np.floor(1.0 / search_step + 1e-9)) + 1)
    ts = np.unique(np.append(np.minimum(ts, 1.0), 1.0))
    allowed = ts[ts / 2 + 0.25 <= bound + 1e-12]
    t = float(allowed.max()) if allowed.size else 0.0

    procedure = EveProcedure.symmetric(t)
    p_e = eve_guess_prob(procedure)
    logger.debug(f"{f.name} at beta={beta_ab:.6f}: best grid procedure t={t:.6f}")
    return procedure, p_e
