"""Layered belief-propagation syndrome decoder.

One layer is one block-row of the QC matrix.  For every check ``m`` in the
layer and every neighbour ``n``::

    Lq_nm = Lq_n - Lr_mn                       (variable-to-check)
    Lr_mn = (1 - 2 s_m) * prod sgn(Lq_n'm) * phi(sum phi(|Lq_n'm|))
    Lq_n  = Lq_nm + Lr_mn                      (total update)

with ``n'`` ranging over the other neighbours of ``m``, ``Lr = 0`` before the
first iteration and ``phi(x) = -ln(tanh(x/2))``.  After each full iteration
bit ``n`` decides to 1 iff ``Lq_n < 0``.

Inside a block-row every variable is touched by at most one check, so a
whole layer is processed as a ``(frames, Z, degree)`` array.  The check
update uses prefix/suffix sums along the degree axis; results therefore do
not depend on how many rows or frames are processed together, which the
datapath model relies on for bit-exact comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .quantize import FixedFormat, phi_real, phi_table, quantize_array
from .qc_code import QCCode, syndrome

# Magnitudes are clamped before phi so that phi(0) and phi(inf) stay finite.
PHI_X_MIN = 1e-12
PHI_X_MAX = 40.0

DEFAULT_GUARD_BITS = 4


def _exclusive_sums(x: np.ndarray) -> np.ndarray:
    """``out[..., j] = sum(x[..., k] for k != j)`` accumulated left-to-right."""
    d = x.shape[-1]
    prefix = np.zeros_like(x)
    suffix = np.zeros_like(x)
    for j in range(1, d):
        prefix[..., j] = prefix[..., j - 1] + x[..., j - 1]
    for j in range(d - 2, -1, -1):
        suffix[..., j] = suffix[..., j + 1] + x[..., j + 1]
    return prefix + suffix


def _exclusive_signs(x: np.ndarray) -> np.ndarray:
    """Product of the other entries' signs, with ``sgn(0) = +1``."""
    sg = np.where(x < 0, -1, 1).astype(np.int8)
    total = np.prod(sg, axis=-1, keepdims=True, dtype=np.int8)
    return total * sg


class FloatArithmetic:
    """Double-precision reference arithmetic."""

    name = "float"
    dtype = np.float64

    def prepare(self, llr) -> np.ndarray:
        return np.array(llr, dtype=np.float64)

    def zeros(self, shape) -> np.ndarray:
        return np.zeros(shape, dtype=np.float64)

    def vnu(self, lq, lr):
        return lq - lr

    def total(self, lqnm, lr):
        return lqnm + lr

    def cnu(self, lqnm: np.ndarray, s: np.ndarray) -> np.ndarray:
        """Check update on ``(..., d)`` inputs with syndrome bits ``s`` of shape ``(...)``."""
        mags = np.clip(np.abs(lqnm), PHI_X_MIN, PHI_X_MAX)
        excl = _exclusive_sums(phi_real(mags))
        out = phi_real(np.clip(excl, PHI_X_MIN, PHI_X_MAX))
        sign = _exclusive_signs(lqnm) * (1 - 2 * s.astype(np.int8))[..., None]
        return sign * out

    def reliability(self, lq) -> np.ndarray:
        return np.abs(lq)

    def to_real(self, v):
        return np.asarray(v, dtype=np.float64)

    def __repr__(self) -> str:
        return "FloatArithmetic()"


class FixedArithmetic:
    """Saturating integer arithmetic in a :class:`FixedFormat`.

    Messages are integer codes; ``phi`` is a table lookup in both
    directions.  The phi terms are summed in the table's phi domain
    (``guard_bits`` extra fraction bits) and the sum saturates at that
    domain's maximum before the inverse lookup.
    """

    dtype = np.int32

    def __init__(self, fmt: FixedFormat, guard_bits: int = DEFAULT_GUARD_BITS):
        self.fmt = fmt
        self.guard_bits = guard_bits
        self.max = fmt.max_code
        self.table = phi_table(fmt, guard_bits)
        self.sum_max = self.table.sum_max

    @property
    def name(self) -> str:
        return f"fixed{self.fmt.w}"

    def prepare(self, llr) -> np.ndarray:
        return quantize_array(llr, self.fmt)

    def zeros(self, shape) -> np.ndarray:
        return np.zeros(shape, dtype=np.int32)

    def vnu(self, lq, lr):
        return np.clip(lq - lr, -self.max, self.max)

    def total(self, lqnm, lr):
        return np.clip(lqnm + lr, -self.max, self.max)

    def cnu(self, lqnm: np.ndarray, s: np.ndarray) -> np.ndarray:
        ph = self.table.forward(np.abs(lqnm))
        excl = np.minimum(_exclusive_sums(ph), self.sum_max)
        out = self.table.inverse(excl)
        sign = _exclusive_signs(lqnm) * (1 - 2 * s.astype(np.int8))[..., None]
        return (sign * out).astype(np.int32)

    def reliability(self, lq) -> np.ndarray:
        return np.abs(lq)

    def to_real(self, v):
        return self.fmt.to_real(v)

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, FixedArithmetic) and other.fmt == self.fmt
                and other.guard_bits == self.guard_bits)

    def __hash__(self) -> int:
        return hash((self.fmt, self.guard_bits))

    def __repr__(self) -> str:
        return f"FixedArithmetic({self.fmt}, guard_bits={self.guard_bits})"


FLOAT = FloatArithmetic()


def make_arithmetic(spec) -> FloatArithmetic | FixedArithmetic:
    """``"float"``, a :class:`FixedFormat`, or an existing arithmetic object."""
    if spec is None or spec == "float":
        return FLOAT
    if isinstance(spec, FixedFormat):
        return FixedArithmetic(spec)
    if isinstance(spec, (FloatArithmetic, FixedArithmetic)):
        return spec
    raise ValueError(f"unknown arithmetic {spec!r}")


@dataclass(frozen=True)
class DecoderConfig:
    t_max: int = 13
    arithmetic: object = "float"
    early_exit: bool = True

    def __post_init__(self) -> None:
        if self.t_max < 1:
            raise ValueError("t_max must be at least 1")
        object.__setattr__(self, "arithmetic", make_arithmetic(self.arithmetic))


@dataclass(eq=False)
class DecodeResult:
    u_hat: np.ndarray
    success: bool
    iterations: int
    reliabilities: np.ndarray
    lq: np.ndarray


@dataclass(eq=False)
class BatchDecodeResult:
    """Per-frame results stacked along axis 0."""

    u_hat: np.ndarray
    success: np.ndarray
    iterations: np.ndarray
    reliabilities: np.ndarray
    lq: np.ndarray

    def __len__(self) -> int:
        return len(self.success)

    def __getitem__(self, k: int) -> DecodeResult:
        return DecodeResult(self.u_hat[k], bool(self.success[k]), int(self.iterations[k]),
                            self.reliabilities[k], self.lq[k])


def vnu_message(lq_n, lr_prev, arith=FLOAT):
    return arith.vnu(np.asarray(lq_n), np.asarray(lr_prev))


def total_update(lq_nm, lr_new, arith=FLOAT):
    return arith.total(np.asarray(lq_nm), np.asarray(lr_new))


def cnu_message(neighbors, s_m: int, arith=FLOAT):
    """Message to one target from the *other* neighbours of a check."""
    others = np.asarray(neighbors)
    if others.ndim != 1 or others.size == 0:
        raise ValueError("check update needs at least one other neighbour")
    # Append a dummy target with zero input; its exclusive message is the answer.
    dummy = arith.prepare([0.0]) if isinstance(arith, FixedArithmetic) else np.zeros(1)
    row = np.concatenate([others.astype(arith.dtype), dummy.astype(arith.dtype)])[None, :]
    # The dummy's own sign (+) must not alter the product.
    return arith.cnu(row, np.array([s_m]))[0, -1]


def hard_decision(lq) -> np.ndarray:
    return (np.asarray(lq) < 0).astype(np.uint8)


LayerHook = Callable[[int, int, np.ndarray], None]


def decode_batch(code: QCCode, llr, s, cfg: DecoderConfig,
                 on_layer: LayerHook | None = None) -> BatchDecodeResult:
    """Decode ``(frames, n)`` channel LLRs against ``(frames, m)`` target syndromes.

    Frames that satisfy their syndrome after an iteration stop early unless
    ``cfg.early_exit`` is false.  ``on_layer(t, layer, lr_new)`` is called
    after every layer update with the frames still running.
    """
    llr = np.atleast_2d(np.asarray(llr, dtype=np.float64))
    s = np.atleast_2d(np.asarray(s, dtype=np.uint8))
    B = llr.shape[0]
    if llr.shape[1] != code.n:
        raise ValueError(f"llr length {llr.shape[1]} != n = {code.n}")
    if s.shape != (B, code.m):
        raise ValueError(f"syndrome shape {s.shape} != ({B}, {code.m})")

    ar = cfg.arithmetic
    Z = code.Z
    lq = ar.prepare(llr)
    lr = {r: ar.zeros((B, Z, code.layer_cols[r].shape[1])) for r in code.layers}
    s_layers = {r: s[:, r * Z:(r + 1) * Z] for r in code.layers}

    out_lq = np.empty_like(lq)
    out_iter = np.full(B, cfg.t_max, dtype=np.int64)
    out_ok = np.zeros(B, dtype=bool)
    alive = np.arange(B)

    for t in range(1, cfg.t_max + 1):
        for r in code.layers:
            idx = code.layer_cols[r]
            lqnm = ar.vnu(lq[:, idx], lr[r])
            lr_new = ar.cnu(lqnm, s_layers[r])
            lq[:, idx] = ar.total(lqnm, lr_new)
            lr[r] = lr_new
            if on_layer is not None:
                on_layer(t, r, lr_new)
        if cfg.early_exit:
            done = np.all(syndrome(code, hard_decision(lq)) == s, axis=1)
            if done.any():
                out_lq[alive[done]] = lq[done]
                out_iter[alive[done]] = t
                out_ok[alive[done]] = True
                keep = ~done
                alive = alive[keep]
                lq = lq[keep]
                lr = {r: v[keep] for r, v in lr.items()}
                s = s[keep]
                s_layers = {r: v[keep] for r, v in s_layers.items()}
                if alive.size == 0:
                    break
    if alive.size:
        out_lq[alive] = lq
        out_ok[alive] = np.all(syndrome(code, hard_decision(lq)) == s, axis=1)

    u_hat = hard_decision(out_lq)
    return BatchDecodeResult(u_hat=u_hat, success=out_ok, iterations=out_iter,
                             reliabilities=ar.reliability(out_lq), lq=out_lq)


def decode(code: QCCode, llr, s, cfg: DecoderConfig,
           on_layer: LayerHook | None = None) -> DecodeResult:
    llr = np.asarray(llr, dtype=np.float64)
    s = np.asarray(s, dtype=np.uint8)
    if llr.ndim != 1 or s.ndim != 1:
        raise ValueError("decode takes a single frame; use decode_batch for batches")
    return decode_batch(code, llr[None], s[None], cfg, on_layer)[0]
