"""Quasi-cyclic parity-check matrices: base matrices, lifting and syndromes."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp


class BaseMatrixError(ValueError):
    """Malformed base matrix or base-matrix file."""

    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {col}" if col is not None else "") + ": "
        super().__init__(where + msg)
        self.line = line
        self.col = col


@dataclass(frozen=True, eq=False)
class BaseMatrix:
    """Grid of circulant shifts; ``-1`` marks a zero block."""

    shifts: np.ndarray
    Z: int

    def __post_init__(self) -> None:
        arr = np.array(self.shifts, dtype=np.int64)
        if arr.ndim != 2 or arr.size == 0:
            raise BaseMatrixError("shift grid must be a non-empty 2-D array")
        if self.Z < 1:
            raise BaseMatrixError(f"lifting size must be positive, got {self.Z}")
        if np.any(arr < -1) or np.any(arr >= self.Z):
            bad = np.argwhere((arr < -1) | (arr >= self.Z))[0]
            raise BaseMatrixError(
                f"shift {arr[tuple(bad)]} at block ({bad[0]}, {bad[1]}) outside [-1, {self.Z})"
            )
        if np.any((arr >= 0).sum(axis=1) == 0):
            raise BaseMatrixError(f"block-row {int(np.argmin((arr >= 0).sum(axis=1)))} is empty")
        if np.any((arr >= 0).sum(axis=0) == 0):
            raise BaseMatrixError(f"block-column {int(np.argmin((arr >= 0).sum(axis=0)))} is empty")
        arr.flags.writeable = False
        object.__setattr__(self, "shifts", arr)

    @property
    def rows(self) -> int:
        return self.shifts.shape[0]

    @property
    def cols(self) -> int:
        return self.shifts.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BaseMatrix):
            return NotImplemented
        return self.Z == other.Z and np.array_equal(self.shifts, other.shifts)

    def __hash__(self) -> int:
        return hash((self.Z, self.shifts.tobytes(), self.shifts.shape))

    def blocks(self) -> Iterable[tuple[int, int, int]]:
        """Yield ``(block_row, block_col, shift)`` for non-zero blocks, row-major."""
        for r, c in zip(*np.nonzero(self.shifts >= 0)):
            yield int(r), int(c), int(self.shifts[r, c])


@dataclass(frozen=True, eq=False)
class QCCode:
    """Lifted parity-check matrix with its layered schedule.

    ``layer_cols[r]`` is a ``(Z, d_r)`` array: row ``i`` lists the variable
    indices of check ``r*Z + i`` in ascending block-column order.
    """

    base: BaseMatrix
    layers: tuple[int, ...]
    rate: float
    layer_cols: tuple[np.ndarray, ...] = field(repr=False)
    H: sp.csr_matrix = field(repr=False)

    @property
    def Z(self) -> int:
        return self.base.Z

    @property
    def n(self) -> int:
        return self.base.cols * self.base.Z

    @property
    def m(self) -> int:
        return self.base.rows * self.base.Z

    @property
    def n_total(self) -> int:
        return int(self.H.nnz)

    def check_support(self, row: int) -> np.ndarray:
        r, i = divmod(row, self.Z)
        return self.layer_cols[r][i]

    def column_support(self, col: int) -> np.ndarray:
        Hc = self.Hc
        return Hc.indices[Hc.indptr[col]:Hc.indptr[col + 1]]

    @property
    def Hc(self) -> sp.csc_matrix:
        cached = self.__dict__.get("_Hc")
        if cached is None:
            cached = self.H.tocsc()
            cached.sort_indices()
            object.__setattr__(self, "_Hc", cached)
        return cached

    def layer_rows(self, layer: int) -> slice:
        return slice(layer * self.Z, (layer + 1) * self.Z)


def expand(base: BaseMatrix, layers: Iterable[int] | None = None,
           rate: float | None = None) -> QCCode:
    """Lift ``base`` to a sparse parity-check matrix.

    Row ``r*Z + i`` has a one in column ``c*Z + (i + shift) % Z`` for every
    block ``(r, c)`` with a non-negative shift.  ``rate`` defaults to the
    design rate ``1 - rows/cols``.
    """
    Z = base.Z
    layer_cols = []
    rows_idx, cols_idx = [], []
    i = np.arange(Z)
    for r in range(base.rows):
        cs = [c * Z + (i + a) % Z for c, a in enumerate(base.shifts[r]) if a >= 0]
        lc = np.stack(cs, axis=1).astype(np.int64)
        lc.flags.writeable = False
        layer_cols.append(lc)
        rows_idx.append(np.repeat(r * Z + i, lc.shape[1]))
        cols_idx.append(lc.ravel())
    rows_idx = np.concatenate(rows_idx)
    cols_idx = np.concatenate(cols_idx)
    H = sp.csr_matrix(
        (np.ones(len(rows_idx), dtype=np.uint8), (rows_idx, cols_idx)),
        shape=(base.rows * Z, base.cols * Z),
    )
    H.sort_indices()
    if layers is None:
        layers = range(base.rows)
    layers = tuple(int(x) for x in layers)
    if sorted(layers) != list(range(base.rows)):
        raise BaseMatrixError("layer order must be a permutation of block-rows")
    if rate is None:
        rate = 1.0 - base.rows / base.cols
    return QCCode(base=base, layers=layers, rate=float(rate),
                  layer_cols=tuple(layer_cols), H=H)


def as_bits(word, length: int | None = None, name: str = "word") -> np.ndarray:
    bits = np.asarray(word, dtype=np.uint8)
    if bits.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if length is not None and bits.size != length:
        raise ValueError(f"{name} has length {bits.size}, expected {length}")
    return bits


def syndrome(code: QCCode, word) -> np.ndarray:
    """``H @ word`` over GF(2).

    Accepts a single word of length ``n`` or a ``(frames, n)`` batch.
    """
    w = np.asarray(word, dtype=np.uint8)
    if w.shape[-1] != code.n:
        raise ValueError(f"word has length {w.shape[-1]}, expected {code.n}")
    if w.ndim == 1:
        return (code.H @ w.astype(np.int32) & 1).astype(np.uint8)
    return ((code.H @ w.T.astype(np.int32)).T & 1).astype(np.uint8)


def stats(code: QCCode) -> dict:
    row_w = np.diff(code.H.indptr)
    col_w = np.diff(code.Hc.indptr)
    n_total = int(row_w.sum())
    return {
        "n": code.n,
        "m": code.m,
        "n_total": n_total,
        "n_avr": n_total / code.m,
        "row_hist": dict(sorted(zip(*map(lambda a: a.tolist(), np.unique(row_w, return_counts=True))))),
        "col_hist": dict(sorted(zip(*map(lambda a: a.tolist(), np.unique(col_w, return_counts=True))))),
    }


def _open_text(src):
    if isinstance(src, (str, os.PathLike)):
        with open(src) as fh:
            return fh.read()
    return src.read()


def parse_base(text: str) -> BaseMatrix:
    lines = [(k + 1, ln.split("#", 1)[0].split()) for k, ln in enumerate(text.splitlines())]
    lines = [(k, toks) for k, toks in lines if toks]
    if not lines:
        raise BaseMatrixError("empty base-matrix file")

    def ints(k, toks):
        out = []
        for j, t in enumerate(toks):
            try:
                out.append(int(t))
            except ValueError:
                raise BaseMatrixError(f"non-integer token {t!r}", k, j + 1) from None
        return out

    k0, head = lines[0]
    if len(head) != 3:
        raise BaseMatrixError("header must be 'rows cols Z'", k0)
    rows, cols, Z = ints(k0, head)
    if rows < 1 or cols < 1 or Z < 1:
        raise BaseMatrixError("rows, cols and Z must be positive", k0)
    body = lines[1:]
    if len(body) != rows:
        raise BaseMatrixError(f"expected {rows} rows, found {len(body)}",
                              body[-1][0] if body else k0)
    grid = []
    for k, toks in body:
        vals = ints(k, toks)
        if len(vals) != cols:
            raise BaseMatrixError(f"expected {cols} entries, found {len(vals)}", k)
        for j, v in enumerate(vals):
            if v < -1 or v >= Z:
                raise BaseMatrixError(f"shift {v} outside [-1, {Z})", k, j + 1)
        grid.append(vals)
    try:
        return BaseMatrix(np.array(grid), Z)
    except BaseMatrixError as exc:
        raise BaseMatrixError(str(exc)) from None


def load_base(src) -> BaseMatrix:
    """Read a base matrix from a path or text stream.

    Format: a header line ``rows cols Z`` followed by ``rows`` lines of
    ``cols`` integers; ``-1`` is the zero block.  ``#`` starts a comment.
    """
    return parse_base(_open_text(src))


def format_base(base: BaseMatrix) -> str:
    width = max(len(str(int(v))) for v in base.shifts.ravel())
    out = io.StringIO()
    out.write(f"{base.rows} {base.cols} {base.Z}\n")
    for row in base.shifts:
        out.write(" ".join(f"{int(v):>{width}d}" for v in row) + "\n")
    return out.getvalue()


def save_base(base: BaseMatrix, dst) -> None:
    text = format_base(base)
    if isinstance(dst, (str, os.PathLike)):
        with open(dst, "w") as fh:
            fh.write(text)
    else:
        dst.write(text)


def format_support(code: QCCode) -> str:
    """One line per check: its weight followed by its column indices."""
    out = io.StringIO()
    out.write(f"{code.m} {code.n}\n")
    H = code.H
    for r in range(code.m):
        cols = H.indices[H.indptr[r]:H.indptr[r + 1]]
        out.write(f"{len(cols)} " + " ".join(map(str, cols.tolist())) + "\n")
    return out.getvalue()


def dense(code: QCCode) -> np.ndarray:
    return code.H.toarray().astype(np.uint8)
