"""Monte Carlo simulation of the CHSH key-distribution protocol.

Alice and Bob measure many copies of a source box with uniformly random
settings, announce a Bernoulli-chosen subset to estimate beta(A,B), and
keep Alice's outcomes on the remaining rounds as key. The estimate is
then judged against the adversary's monogamy bound.
"""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel

from monogamy_qkd.attack_opt import best_procedure_under_monogamy
from monogamy_qkd.box_store import box_to_json
from monogamy_qkd.boxes import BipartiteBox, chsh_value
from monogamy_qkd.config import (
    DEFAULT_WORKERS,
    MIN_ESTIMATION_ROUNDS,
    MIN_ROUNDS,
    SIGMA_SLACK,
)
from monogamy_qkd.errors import ConfigError, DomainError
from monogamy_qkd.monogamy import MonogamyFunction
from monogamy_qkd.protocol.sampling import RoundBlock, block_seeds, block_sizes, sample_block
from monogamy_qkd.security import (
    EveProcedure,
    SecurityVerdict,
    key_rate_proxy,
    max_eve_prob,
    secure,
)

logger = logging.getLogger(__name__)


# ============================================================================
# Models
# ============================================================================


@dataclass(frozen=True)
class ProtocolConfig:
    """Everything that determines a simulated run, bit for bit.

    ``adversary`` may be given as a selector string ("ns", "qm", "p:1.1").
    """

    source: BipartiteBox
    rounds: int
    estimation_fraction: float
    seed: int
    adversary: MonogamyFunction

    def __post_init__(self):
        if isinstance(self.adversary, str):
            object.__setattr__(self, "adversary", MonogamyFunction.from_selector(self.adversary))
        if not isinstance(self.source, BipartiteBox):
            raise ConfigError("the protocol source must be a bipartite box")
        if self.rounds < MIN_ROUNDS:
            raise ConfigError(f"need at least {MIN_ROUNDS} rounds, got {self.rounds}")
        if not 0.0 < self.estimation_fraction < 1.0:
            raise ConfigError(f"estimation fraction must lie in (0, 1), got {self.estimation_fraction}")
        if self.rounds * self.estimation_fraction < MIN_ESTIMATION_ROUNDS:
            raise ConfigError(f"expected estimation rounds fall below {MIN_ESTIMATION_ROUNDS}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def echo(self) -> Dict[str, Any]:
        return {
            "source": box_to_json(self.source),
            "rounds": self.rounds,
            "estimation_fraction": self.estimation_fraction,
            "seed": self.seed,
            "adversary": self.adversary.selector,
        }


class AttackReport(BaseModel):
    procedure: EveProcedure
    eve_rounds: int
    eve_rate: float
    eve_stderr: float
    p_e_bound: float
    consistent: bool


class SimulationReport(BaseModel):
    config: Dict[str, Any]
    rounds: int
    estimation_rounds: int
    beta_hat: float
    beta_stderr: float
    p_b_hat: float
    p_e_bound: Optional[float] = None
    verdict: Optional[SecurityVerdict] = None
    out_of_range: bool = False
    key_bits: int
    key_rate_proxy: Optional[float] = None
    attack: Optional[AttackReport] = None

    @property
    def secure(self) -> bool:
        return self.verdict is not None and self.verdict.secure


# ============================================================================
# Block Processing
# ============================================================================


@dataclass
class _Tally:
    estimation_rounds: int = 0
    wins: int = 0
    key_bits: int = 0
    eve_hits: int = 0

    def __iadd__(self, other: "_Tally") -> "_Tally":
        self.estimation_rounds += other.estimation_rounds
        self.wins += other.wins
        self.key_bits += other.key_bits
        self.eve_hits += other.eve_hits
        return self


def _tally(block: RoundBlock, eve_diagonal: Optional[np.ndarray]) -> _Tally:
    est = block.is_estimation
    won = (block.A ^ block.B) == (block.a & block.b)
    key = ~est
    eve_hits = 0
    if eve_diagonal is not None:
        # Eve feeds the announced setting, so her hit rate is P_aa.
        eve_hits = int(np.sum(key & (block.eve_uniform < eve_diagonal[block.a])))
    return _Tally(
        estimation_rounds=int(np.sum(est)),
        wins=int(np.sum(won & est)),
        key_bits=int(np.sum(key)),
        eve_hits=eve_hits,
    )


def _write_rounds_csv(path: Union[str, Path], blocks) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["a", "b", "A", "B", "is_estimation"])
        for block in blocks:
            for row in zip(block.a, block.b, block.A, block.B, block.is_estimation.astype(int)):
                writer.writerow([int(v) for v in row])


def _run_blocks(
    cfg: ProtocolConfig,
    workers: int,
    eve_diagonal: Optional[np.ndarray] = None,
    rounds_csv: Optional[Union[str, Path]] = None,
) -> _Tally:
    sizes = block_sizes(cfg.rounds)
    seeds = block_seeds(cfg.seed, cfg.rounds)
    keep_blocks = rounds_csv is not None

    def process(job: Tuple[int, np.random.SeedSequence]):
        size, seed_seq = job
        block = sample_block(cfg.source, size, cfg.estimation_fraction, np.random.default_rng(seed_seq))
        return _tally(block, eve_diagonal), (block if keep_blocks else None)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(process, zip(sizes, seeds)))

    total = _Tally()
    for tally, _ in results:
        total += tally
    if keep_blocks:
        _write_rounds_csv(rounds_csv, [block for _, block in results])
        logger.info(f"Wrote {cfg.rounds} round records to {rounds_csv}")
    return total


def _binomial_stderr(rate: float, n: int) -> float:
    return math.sqrt(rate * (1 - rate) / n)


def _build_report(cfg: ProtocolConfig, tally: _Tally) -> SimulationReport:
    if tally.estimation_rounds == 0:
        raise ConfigError("no round was selected for parameter estimation")
    beta_hat = tally.wins / tally.estimation_rounds
    beta_stderr = _binomial_stderr(beta_hat, tally.estimation_rounds)

    verdict = None
    p_e_bound = None
    rate = None
    out_of_range = False
    try:
        verdict = secure(cfg.adversary, beta_hat)
        p_e_bound = verdict.p_e_max
        rate = key_rate_proxy(verdict.p_b, min(1.0, max(0.5, p_e_bound)))
    except DomainError as e:
        out_of_range = True
        logger.warning(f"beta_hat={beta_hat:.6f} outside {cfg.adversary.name} domain: {e}")

    return SimulationReport(
        config=cfg.echo(),
        rounds=cfg.rounds,
        estimation_rounds=tally.estimation_rounds,
        beta_hat=beta_hat,
        beta_stderr=beta_stderr,
        p_b_hat=beta_hat,
        p_e_bound=p_e_bound,
        verdict=verdict,
        out_of_range=out_of_range,
        key_bits=tally.key_bits,
        key_rate_proxy=rate,
    )


# ============================================================================
# Public Entry Points
# ============================================================================


def run_protocol(
    cfg: ProtocolConfig,
    workers: int = DEFAULT_WORKERS,
    rounds_csv: Optional[Union[str, Path]] = None,
) -> SimulationReport:
    """Simulate the protocol and judge the estimated beta(A,B)."""
    tally = _run_blocks(cfg, workers, rounds_csv=rounds_csv)
    report = _build_report(cfg, tally)
    logger.info(
        f"Protocol run finished: beta_hat={report.beta_hat:.6f} +/- {report.beta_stderr:.6f}, "
        f"{report.key_bits} key bits, secure={report.secure}"
    )
    return report


def simulate_attack(
    cfg: ProtocolConfig,
    procedure: Optional[EveProcedure] = None,
    search_step: float = 1e-4,
    workers: int = DEFAULT_WORKERS,
    rounds_csv: Optional[Union[str, Path]] = None,
) -> SimulationReport:
    """Run the protocol with Eve guessing every key bit.

    Without an explicit ``procedure`` Eve uses the best one the adversary's
    monogamy bound allows at the source's true CHSH value.
    """
    source_beta = chsh_value(cfg.source)
    if procedure is None:
        procedure, _ = best_procedure_under_monogamy(cfg.adversary, source_beta, search_step)
    bound = max_eve_prob(cfg.adversary, source_beta)

    diagonal = np.array([procedure.pij[0][0], procedure.pij[1][1]])
    tally = _run_blocks(cfg, workers, eve_diagonal=diagonal, rounds_csv=rounds_csv)
    report = _build_report(cfg, tally)

    if tally.key_bits == 0:
        raise ConfigError("no key rounds left for Eve to attack")
    eve_rate = tally.eve_hits / tally.key_bits
    eve_stderr = _binomial_stderr(eve_rate, tally.key_bits)
    attack = AttackReport(
        procedure=procedure,
        eve_rounds=tally.key_bits,
        eve_rate=eve_rate,
        eve_stderr=eve_stderr,
        p_e_bound=bound,
        consistent=eve_rate <= bound + SIGMA_SLACK * eve_stderr,
    )
    logger.info(f"Attack finished: Eve rate {eve_rate:.6f} +/- {eve_stderr:.6f} (bound {bound:.6f})")
    return report.model_copy(update={"attack": attack})
