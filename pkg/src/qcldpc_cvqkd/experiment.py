"""Seeded FER sweeps (decoder with and without erase) and shipped fixtures."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.stats import binomtest

from .channel import ChannelParams, init_llr, run_trials
from .decoder import DecoderConfig, FixedArithmetic, decode_batch
from .erasure import (DELTA_W8, DELTA_W10, ERASE_COST_RATE_01, ERASE_COST_RATE_02,
                      EraseConfig, EraseCostModel, erase)
from .qc_code import QCCode, expand, load_base
from .quantize import W8, W10, FixedFormat

SWEEP_SCHEMA = "fer-sweep/1"
SWEEP_COLUMNS = ("snr", "frames", "failures_raw", "failures_after_erase", "fer_raw",
                 "fer_erased", "n_err", "wilson_ci")


@dataclass(frozen=True)
class Fixture:
    """A shipped code with its reference operating parameters."""

    name: str
    base_file: str
    p: int
    t_max: int
    fmt: FixedFormat
    delta: float
    snr_range: tuple[float, float]
    erase_cost: EraseCostModel

    def code(self) -> QCCode:
        with resources.files(__package__).joinpath("data", self.base_file).open() as fh:
            base = load_base(fh)
        return expand(base)


FIXTURES = {
    "rate0.2": Fixture("rate0.2", "rate02_n8000_z100.base", 25, 13, W8, DELTA_W8,
                       (0.355, 0.389), ERASE_COST_RATE_02),
    "rate0.1": Fixture("rate0.1", "rate01_n9600_z80.base", 20, 25, W10, DELTA_W10,
                       (0.155, 0.180), ERASE_COST_RATE_01),
    "toy": Fixture("toy", "toy_2x3_z4.base", 2, 5, W8, DELTA_W8,
                    (0.5, 1.0), ERASE_COST_RATE_02),
}


def data_path(name: str):
    return resources.files(__package__).joinpath("data", name)


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class SweepConfig:
    snrs: tuple[float, ...]
    frames: int = 100
    seed: int = 0
    t_max: int = 13
    arithmetic: object = "float"
    erase: EraseConfig | None = None
    delta: float | None = None
    batch: int = 50
    workers: int = 1
    first_trial: int = 0

    def __post_init__(self) -> None:
        snrs = tuple(float(s) for s in self.snrs)
        if not snrs:
            raise ValueError("SNR grid is empty")
        if any(b <= a for a, b in zip(snrs, snrs[1:])):
            raise ValueError("SNR grid must be strictly increasing")
        if self.frames < 1 or self.batch < 1 or self.workers < 1:
            raise ValueError("frames, batch and workers must be at least 1")
        object.__setattr__(self, "snrs", snrs)

    @property
    def n_err_delta(self) -> float | None:
        """Threshold for the N_err count (the erase threshold unless set)."""
        if self.delta is not None:
            return self.delta
        return None if self.erase is None else self.erase.delta

    def decoder_config(self) -> DecoderConfig:
        return DecoderConfig(t_max=self.t_max, arithmetic=self.arithmetic)


@dataclass(eq=False)
class SweepPoint:
    snr: float
    frames: int
    failures_raw: int
    failures_after_erase: int
    n_err: int
    fail_raw: np.ndarray = field(repr=False, default=None)
    fail_erased: np.ndarray = field(repr=False, default=None)

    @property
    def fer_raw(self) -> float:
        return self.failures_raw / self.frames

    @property
    def fer_erased(self) -> float:
        return self.failures_after_erase / self.frames

    @property
    def wilson_ci(self) -> tuple[float, float]:
        return wilson_interval(self.failures_after_erase, self.frames)


def _run_chunk(args):
    code, snr, indices, cfg = args
    return _frames(code, snr, indices, cfg)


def _frames(code: QCCode, snr: float, indices, cfg: SweepConfig):
    """Per-frame (raw failure, erased failure, counted in N_err)."""
    tr = run_trials(code, ChannelParams(snr), cfg.seed, indices)
    res = decode_batch(code, init_llr(tr.r, 1.0 / snr), tr.s, cfg.decoder_config())
    err = res.u_hat != tr.u
    fail_raw = err.any(axis=1)
    fail_er = fail_raw.copy()
    in_nerr = np.zeros_like(fail_raw)
    delta = cfg.n_err_delta
    for k in np.nonzero(fail_raw)[0]:
        rel = res.reliabilities[k]
        if delta is not None:
            in_nerr[k] = rel[err[k]].max() < delta
        if cfg.erase is not None and not res.success[k]:
            out = erase(code, res.u_hat[k], tr.s[k], rel, cfg.erase)
            fail_er[k] = not (out.success and np.array_equal(out.corrected, tr.u[k]))
    return fail_raw, fail_er, in_nerr


def run_point(code: QCCode, snr: float, cfg: SweepConfig) -> SweepPoint:
    idx = list(range(cfg.first_trial, cfg.first_trial + cfg.frames))
    chunks = [idx[i:i + cfg.batch] for i in range(0, len(idx), cfg.batch)]
    if cfg.workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            parts = list(ex.map(_run_chunk, [(code, snr, c, cfg) for c in chunks]))
    else:
        parts = [_frames(code, snr, c, cfg) for c in chunks]
    fr = np.concatenate([p[0] for p in parts])
    fe = np.concatenate([p[1] for p in parts])
    ne = np.concatenate([p[2] for p in parts])
    return SweepPoint(snr=snr, frames=cfg.frames, failures_raw=int(fr.sum()),
                      failures_after_erase=int(fe.sum()), n_err=int(ne.sum()),
                      fail_raw=fr, fail_erased=fe)


def fer_sweep(code: QCCode, cfg: SweepConfig, progress=None) -> list[SweepPoint]:
    out = []
    for snr in cfg.snrs:
        pt = run_point(code, snr, cfg)
        if progress is not None:
            progress(pt)
        out.append(pt)
    return out


def snr_grid(lo: float, hi: float, step: float) -> tuple[float, ...]:
    n = int(round((hi - lo) / step))
    return tuple(round(lo + i * step, 10) for i in range(n + 1))


def write_sweep_csv(points, fh) -> None:
    fh.write(f"# schema: {SWEEP_SCHEMA}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for pt in points:
        lo, hi = pt.wilson_ci
        w.writerow([f"{pt.snr:.6g}", pt.frames, pt.failures_raw, pt.failures_after_erase,
                    f"{pt.fer_raw:.6f}", f"{pt.fer_erased:.6f}", pt.n_err, f"{lo:.6f};{hi:.6f}"])


def sweep_csv(points) -> str:
    buf = io.StringIO()
    write_sweep_csv(points, buf)
    return buf.getvalue()


def read_sweep_csv(fh) -> list[SweepPoint]:
    lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    if not rows:
        raise ValueError("sweep file has no data rows")
    missing = set(SWEEP_COLUMNS) - set(rows[0])
    if missing:
        raise ValueError(f"sweep file lacks columns {sorted(missing)}")
    return [SweepPoint(snr=float(r["snr"]), frames=int(r["frames"]),
                       failures_raw=int(r["failures_raw"]),
                       failures_after_erase=int(r["failures_after_erase"]),
                       n_err=int(r["n_err"])) for r in rows]


def fixed_arithmetic(fmt: FixedFormat | None, guard_bits: int | None = None):
    if fmt is None:
        return "float"
    return FixedArithmetic(fmt) if guard_bits is None else FixedArithmetic(fmt, guard_bits)


__all__ = [
    "FIXTURES", "Fixture", "SweepConfig", "SweepPoint", "fer_sweep", "run_point",
    "wilson_interval", "write_sweep_csv", "read_sweep_csv", "sweep_csv", "snr_grid",
    "fixed_arithmetic", "data_path", "W8", "W10",
]
