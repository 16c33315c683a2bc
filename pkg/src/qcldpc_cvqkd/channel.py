"""BIAWGN channel and LLR initialisation for syndrome-based reconciliation.

Bits map to BPSK symbols as ``0 -> +1``, ``1 -> -1`` with unit energy, so a
linear SNR gives noise variance ``1/snr``.  Each trial draws from its own
Philox substream keyed by ``(master_seed, trial)``; the same trial index at
different SNRs sees the same word and the same unit-variance noise draw
(common random numbers), which keeps sweep curves smooth and makes paired
comparisons exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qc_code import QCCode, syndrome


@dataclass(frozen=True)
class ChannelParams:
    snr: float

    def __post_init__(self) -> None:
        if not self.snr > 0:
            raise ValueError(f"snr must be positive, got {self.snr}")

    @property
    def sigma2(self) -> float:
        return 1.0 / self.snr

    @property
    def sigma(self) -> float:
        return sigma_from_snr(self.snr)


@dataclass(frozen=True, eq=False)
class Trial:
    u: np.ndarray
    r: np.ndarray
    s: np.ndarray
    seed: int
    index: int = 0


def sigma_from_snr(snr: float) -> float:
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    return math.sqrt(1.0 / snr)


def snr_from_db(db: float) -> float:
    return 10.0 ** (db / 10.0)


def trial_rng(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


def bpsk(u) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(u, dtype=np.float64)


def draw(n: int, seed: int, index: int) -> tuple[np.ndarray, np.ndarray]:
    """Word bits and a standard-normal noise vector for one trial."""
    rng = trial_rng(seed, index)
    u = rng.integers(0, 2, size=n, dtype=np.uint8)
    z = rng.standard_normal(n)
    return u, z


def run_trial(code: QCCode, params: ChannelParams, seed: int, index: int = 0) -> Trial:
    u, z = draw(code.n, seed, index)
    r = bpsk(u) + params.sigma * z
    return Trial(u=u, r=r, s=syndrome(code, u), seed=seed, index=index)


def run_trials(code: QCCode, params: ChannelParams, seed: int, indices) -> Trial:
    """Batched :func:`run_trial`; fields gain a leading frame axis."""
    indices = list(indices)
    us = np.empty((len(indices), code.n), dtype=np.uint8)
    zs = np.empty((len(indices), code.n))
    for k, idx in enumerate(indices):
        us[k], zs[k] = draw(code.n, seed, idx)
    r = bpsk(us) + params.sigma * zs
    return Trial(u=us, r=r, s=syndrome(code, us), seed=seed, index=np.array(indices))


def init_llr(r, sigma2: float) -> np.ndarray:
    if not sigma2 > 0:
        raise ValueError(f"noise variance must be positive, got {sigma2}")
    return 2.0 * np.asarray(r, dtype=np.float64) / sigma2
