"""Fixed-point number system used by the limited-precision decoder.

A format ``(w, I, F)`` stores a sign bit, ``I`` integer bits and ``F``
fraction bits.  Values are integer codes in the symmetric range
``[-(2**(w-1) - 1), 2**(w-1) - 1]``; the real value is ``code / 2**F``.
All arithmetic saturates.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class FixedFormat:
    """Width/integer/fraction split of a fixed-point number."""

    w: int
    i_bits: int
    f_bits: int

    def __post_init__(self) -> None:
        if self.i_bits < 0 or self.f_bits < 0:
            raise ValueError("integer and fraction bit counts must be non-negative")
        if self.w != 1 + self.i_bits + self.f_bits:
            raise ValueError(
                f"width {self.w} != 1 + {self.i_bits} + {self.f_bits}"
            )
        if self.w < 2 or self.w > 31:
            raise ValueError(f"unsupported width {self.w}")

    @classmethod
    def from_width(cls, w: int, i_bits: int) -> "FixedFormat":
        return cls(w, i_bits, w - 1 - i_bits)

    @property
    def max_code(self) -> int:
        return (1 << (self.w - 1)) - 1

    @property
    def scale(self) -> int:
        return 1 << self.f_bits

    @property
    def lsb(self) -> float:
        return 1.0 / self.scale

    def to_real(self, code):
        return np.asarray(code) / self.scale

    def __str__(self) -> str:
        return f"w={self.w} (I={self.i_bits}, F={self.f_bits})"


# Formats used by the two reference decoders.
W8 = FixedFormat(8, 4, 3)
W10 = FixedFormat(10, 4, 5)


@dataclass(frozen=True)
class QValue:
    """A single integer-coded fixed-point value."""

    code: int
    fmt: FixedFormat

    def __post_init__(self) -> None:
        if abs(self.code) > self.fmt.max_code:
            raise ValueError(f"code {self.code} outside range of {self.fmt}")

    @property
    def real(self) -> float:
        return self.code / self.fmt.scale

    def __add__(self, other: "QValue") -> "QValue":
        return sat_add(self, other)

    def __sub__(self, other: "QValue") -> "QValue":
        return sat_sub(self, other)


def saturate(codes, fmt: FixedFormat):
    """Clip integer codes to the symmetric range of ``fmt``."""
    return np.clip(codes, -fmt.max_code, fmt.max_code)


def quantize_array(x, fmt: FixedFormat) -> np.ndarray:
    """Vectorised :func:`quantize` returning an ``int32`` code array.

    ``np.rint`` rounds half to even.
    """
    scaled = np.rint(np.asarray(x, dtype=np.float64) * fmt.scale)
    return saturate(scaled, fmt).astype(np.int32)


def quantize(x: float, fmt: FixedFormat) -> QValue:
    return QValue(int(quantize_array(x, fmt)), fmt)


def dequantize(q: QValue) -> float:
    return q.real


def _check_same(a: QValue, b: QValue) -> None:
    if a.fmt != b.fmt:
        raise ValueError(f"format mismatch: {a.fmt} vs {b.fmt}")


def sat_add(a: QValue, b: QValue) -> QValue:
    _check_same(a, b)
    return QValue(int(saturate(a.code + b.code, a.fmt)), a.fmt)


def sat_sub(a: QValue, b: QValue) -> QValue:
    _check_same(a, b)
    return QValue(int(saturate(a.code - b.code, a.fmt)), a.fmt)


def phi_real(x):
    """``-ln(tanh(x/2))`` evaluated stably for ``x > 0``.

    Uses ``log1p(2 / expm1(x))``, which avoids the cancellation in
    ``tanh`` near 1 for large arguments.  The function is its own inverse.
    """
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore", divide="ignore"):
        return np.log1p(2.0 / np.expm1(x))


class PhiTable:
    """Quantised lookup of the check-node kernel ``phi``.

    The check update works in a "phi domain" with ``guard_bits`` more
    fraction bits than the message format (same integer bits).  ``forward``
    maps a message magnitude code to a phi-domain code, ``inverse`` maps a
    (saturated) phi-domain sum back to a message code.  Endpoints: message
    code 0 maps to the largest phi-domain code (the singularity is clamped)
    and results that would round to zero are floored to one LSB, so no
    message becomes an absorbing zero.  With ``guard_bits=0`` both
    directions use the same table, ``table``.
    """

    # Larger domains are evaluated on demand instead of tabulated.
    MAX_TABLE = 1 << 22

    def __init__(self, fmt: FixedFormat, guard_bits: int = 0):
        if guard_bits < 0:
            raise ValueError("guard_bits must be non-negative")
        self.fmt = fmt
        self.guard_bits = guard_bits
        self.domain = FixedFormat(fmt.w + guard_bits, fmt.i_bits, fmt.f_bits + guard_bits)
        self._fwd = self._build(fmt, self.domain)
        self._inv = self._build(self.domain, fmt)

    @classmethod
    def _eval(cls, codes, src: FixedFormat, dst: FixedFormat) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        with np.errstate(divide="ignore"):
            vals = phi_real(codes / src.scale)
        out = np.rint(vals * dst.scale)
        out = np.where(codes == 0, dst.max_code, np.clip(out, 1, dst.max_code))
        return out.astype(np.int64)

    @classmethod
    def _build(cls, src: FixedFormat, dst: FixedFormat) -> np.ndarray | None:
        if src.max_code + 1 > cls.MAX_TABLE:
            return None
        table = cls._eval(np.arange(src.max_code + 1), src, dst)
        table.flags.writeable = False
        return table

    def forward(self, codes) -> np.ndarray:
        """Message magnitude codes to phi-domain codes."""
        if self._fwd is not None:
            return self._fwd[codes]
        return self._eval(codes, self.fmt, self.domain)

    def inverse(self, codes) -> np.ndarray:
        """Phi-domain codes (already saturated) to message codes."""
        if self._inv is not None:
            return self._inv[codes]
        return self._eval(codes, self.domain, self.fmt)

    @property
    def table(self) -> np.ndarray:
        """Same-format table (message code to message code)."""
        cached = self.__dict__.get("_table")
        if cached is None:
            cached = self._eval(np.arange(self.fmt.max_code + 1), self.fmt, self.fmt)
            cached.flags.writeable = False
            self.__dict__["_table"] = cached
        return cached

    @property
    def clamp_max(self) -> int:
        return int(self.forward(0))

    @property
    def sum_max(self) -> int:
        return self.domain.max_code

    def lookup(self, codes) -> np.ndarray:
        """Same-format lookup on non-negative codes; inputs above range saturate."""
        return self.table[np.minimum(np.asarray(codes), self.fmt.max_code)]

    def __len__(self) -> int:
        return self.fmt.max_code + 1


@lru_cache(maxsize=16)
def phi_table(fmt: FixedFormat, guard_bits: int = 0) -> PhiTable:
    return PhiTable(fmt, guard_bits)


def phi(q: QValue, tbl: PhiTable | None = None) -> QValue:
    """Quantised ``phi`` of a non-negative value, in the value's own format."""
    if q.code < 0:
        raise ValueError("phi is defined on magnitudes; got a negative code")
    tbl = tbl or phi_table(q.fmt)
    if tbl.fmt != q.fmt:
        raise ValueError(f"format mismatch: {tbl.fmt} vs {q.fmt}")
    return QValue(int(tbl.table[q.code]), q.fmt)


def parse_format(spec: str) -> FixedFormat:
    """Parse ``"w,I"`` or ``"w,I,F"``."""
    parts = [int(p) for p in spec.split(",")]
    if len(parts) == 2:
        return FixedFormat.from_width(*parts)
    if len(parts) == 3:
        return FixedFormat(*parts)
    raise ValueError(f"cannot parse fixed-point format {spec!r}")

