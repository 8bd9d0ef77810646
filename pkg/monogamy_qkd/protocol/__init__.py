"""CHSH key-distribution protocol simulation."""
from .sampling import RoundRecord, sample_round
from .simulator import (
    AttackReport,
    ProtocolConfig,
    SimulationReport,
    run_protocol,
    simulate_attack,
)

__all__ = [
    "RoundRecord",
    "sample_round",
    "AttackReport",
    "ProtocolConfig",
    "SimulationReport",
    "run_protocol",
    "simulate_attack",
]
