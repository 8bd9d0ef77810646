"""Independent oracles: NS-polytope linear programs and brute-force searches."""
from .ns_polytope import (
    LinearProgram,
    LPResult,
    TightnessRow,
    max_chsh_ae_given_ab,
    monogamy_program,
    tightness_table,
    verify_ns_monogamy_tightness,
)
from .search import (
    DeterministicStrategy,
    best_procedure_under_monogamy,
    brute_force_classical_bound,
    enumerate_deterministic_strategies,
)

__all__ = [
    "LinearProgram",
    "LPResult",
    "TightnessRow",
    "max_chsh_ae_given_ab",
    "monogamy_program",
    "tightness_table",
    "verify_ns_monogamy_tightness",
    "DeterministicStrategy",
    "best_procedure_under_monogamy",
    "brute_force_classical_bound",
    "enumerate_deterministic_strategies",
]
