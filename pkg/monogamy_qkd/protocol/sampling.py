"""Round sampling and the RNG stream-splitting scheme.

A run of N rounds with seed s is cut into ceil(N / STREAM_BLOCK_ROUNDS)
blocks. Block k draws from ``default_rng(SeedSequence(s).spawn(n_blocks)[k])``
and, within a block, draws in a fixed order: Alice's settings, Bob's
settings, the outcome uniform, the estimation uniform, Eve's uniform.
Results therefore do not depend on how many threads process the blocks.
"""

import math
from dataclasses import dataclass
from typing import List

import numpy as np
from pydantic import BaseModel

from monogamy_qkd.boxes import BipartiteBox
from monogamy_qkd.config import STREAM_BLOCK_ROUNDS


class RoundRecord(BaseModel):
    a: int
    b: int
    A: int
    B: int
    is_estimation: bool


@dataclass(frozen=True)
class RoundBlock:
    a: np.ndarray
    b: np.ndarray
    A: np.ndarray
    B: np.ndarray
    is_estimation: np.ndarray
    eve_uniform: np.ndarray

    def __len__(self) -> int:
        return self.a.size


def _outcome_cdf(box: BipartiteBox) -> np.ndarray:
    # [x][y][X*2+Y]
    return np.cumsum(box.probs.reshape(2, 2, 4), axis=-1)


def sample_round(box: BipartiteBox, rng: np.random.Generator, estimation_fraction: float = 0.0) -> RoundRecord:
    """One protocol round: uniform settings, outcomes drawn from the box."""
    a = int(rng.integers(2))
    b = int(rng.integers(2))
    u = rng.random()
    outcome = int(np.sum(u >= _outcome_cdf(box)[a, b, :3]))
    return RoundRecord(
        a=a,
        b=b,
        A=outcome >> 1,
        B=outcome & 1,
        is_estimation=bool(rng.random() < estimation_fraction),
    )


def sample_block(box: BipartiteBox, n: int, estimation_fraction: float, rng: np.random.Generator) -> RoundBlock:
    a = rng.integers(0, 2, size=n)
    b = rng.integers(0, 2, size=n)
    u = rng.random(n)
    outcome = np.sum(u[:, None] >= _outcome_cdf(box)[a, b][:, :3], axis=1)
    is_estimation = rng.random(n) < estimation_fraction
    eve_uniform = rng.random(n)
    return RoundBlock(
        a=a,
        b=b,
        A=outcome >> 1,
        B=outcome & 1,
        is_estimation=is_estimation,
        eve_uniform=eve_uniform,
    )


def block_sizes(rounds: int) -> List[int]:
    n_blocks = max(1, math.ceil(rounds / STREAM_BLOCK_ROUNDS))
    sizes = [STREAM_BLOCK_ROUNDS] * (n_blocks - 1)
    sizes.append(rounds - STREAM_BLOCK_ROUNDS * (n_blocks - 1))
    return sizes


def block_seeds(seed: int, rounds: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(len(block_sizes(rounds)))
