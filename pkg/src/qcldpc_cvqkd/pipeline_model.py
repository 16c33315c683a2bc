"""Functional model of the decoder datapath and its throughput.

Variable messages live in two RAMs.  With parallelism ``p`` the variables
are cut into words of ``p`` consecutive indices; even words go to RAM_L and
odd words to RAM_R, so any two consecutive words can be read in one cycle.
For a circulant block with shift ``a = q*p + o`` the ``p`` checks of
sub-block ``c`` need ``p`` consecutive variables starting at lane ``o`` of
word ``(c - 1 + q) mod k`` (``k = Z/p``), i.e. the tail of one word and the
head of the next.

Per cycle the model reads one word pair, rotates the ``2p`` window by
``shift_num`` to extract the needed lanes (shift-right unit), and keeps the
untouched lanes of both words for write-back.  After the check update the
shift-left unit merges the new values back into the two words, which land
in RAM ``latency`` cycles after the group's last read.  Two sub-blocks of
the same block share a word, so without care a late write-back of stale
pass-through lanes overwrites fresh data.  The c-rule forwards the fresh
lanes from the previous sub-block (and from sub-block 1 for the last one)
into the write-back words.

Every RAM lane carries the id of the group that produced it.  A read that
consumes a stale lane, or a landing write that replaces a lane by an older
version, is a hazard.  With ``interlock`` the model stalls instead of
raising on stale reads.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .decoder import BatchDecodeResult, DecoderConfig, hard_decision
from .qc_code import QCCode, stats, syndrome

BANK_NAMES = ("RAM_L", "RAM_R")


class PipelineError(ValueError):
    pass


class HazardError(RuntimeError):
    """Read-after-write or overwrite hazard in the modelled datapath."""

    def __init__(self, kind: str, cycle: int, bank: int, address: int):
        super().__init__(f"{kind} hazard at cycle {cycle}, {BANK_NAMES[bank]} address {address}")
        self.kind = kind
        self.cycle = cycle
        self.bank = bank
        self.address = address


# --------------------------------------------------------------------------
# memory layout and shift units


@dataclass(frozen=True)
class MemoryLayout:
    """Word/bank/address/lane mapping of the variable-message RAMs."""

    n: int
    p: int

    def __post_init__(self) -> None:
        if self.p < 1 or self.n < 1:
            raise PipelineError("n and p must be positive")
        if self.n % self.p:
            raise PipelineError(f"p={self.p} does not divide n={self.n}")
        if (self.n // self.p) % 2:
            raise PipelineError(f"n/p = {self.n // self.p} must be even")

    @property
    def words(self) -> int:
        return self.n // self.p

    @property
    def depth(self) -> int:
        return self.words // 2

    def word_of(self, idx):
        return np.asarray(idx) // self.p

    def locate(self, idx: int) -> tuple[int, int, int]:
        """``(bank, address, lane)`` of variable ``idx`` (0-based)."""
        if not 0 <= idx < self.n:
            raise IndexError(f"variable {idx} outside [0, {self.n})")
        w, lane = divmod(int(idx), self.p)
        return w % 2, w // 2, lane

    def bank_contents(self, bank: int) -> np.ndarray:
        """``(depth, p)`` array of the variable indices stored in ``bank``."""
        w = np.arange(bank, self.words, 2)
        return w[:, None] * self.p + np.arange(self.p)[None, :]


def build_layout(n: int, p: int) -> MemoryLayout:
    return MemoryLayout(n, p)


@dataclass(frozen=True, eq=False)
class ShiftRightOut:
    lane_out: np.ndarray
    left_half: np.ndarray
    right_half: np.ndarray


def _split_shift(shift_num: int, p: int) -> tuple[int, int]:
    if not 0 <= shift_num < 2 * p:
        raise PipelineError(f"shift_num {shift_num} outside [0, {2 * p})")
    return divmod(int(shift_num), p)


def shift_right(window, shift_num: int) -> ShiftRightOut:
    """Extract ``p`` lanes from a ``2p`` window ``(RAM_L word, RAM_R word)``.

    ``shift_num // p`` says which bank holds the lower word and
    ``shift_num % p`` is the starting lane inside it.  The halves are the
    lanes of the lower and upper word that were not extracted, kept in
    place and zero elsewhere.
    """
    window = np.asarray(window)
    if window.shape[-1] % 2:
        raise PipelineError("window width must be even")
    p = window.shape[-1] // 2
    hi, o = _split_shift(shift_num, p)
    lane_out = np.roll(window, -shift_num, axis=-1)[..., :p]
    lower = window[..., hi * p:(hi + 1) * p]
    upper = window[..., (1 - hi) * p:(2 - hi) * p]
    lanes = np.arange(p)
    zero = np.zeros((), dtype=window.dtype)
    left_half = np.where(lanes < o, lower, zero)
    right_half = np.where(lanes >= o, upper, zero)
    return ShiftRightOut(lane_out, left_half, right_half)


def shift_left(left_half, new, right_half, shift_num: int) -> tuple[np.ndarray, np.ndarray]:
    """Merge ``p`` updated lanes back into the two words; returns ``(word_L, word_R)``."""
    left_half = np.asarray(left_half)
    new = np.asarray(new)
    right_half = np.asarray(right_half)
    p = new.shape[-1]
    if left_half.shape != new.shape or right_half.shape != new.shape:
        raise PipelineError("shift-left inputs must have equal shapes")
    hi, o = _split_shift(shift_num, p)
    lanes = np.arange(p)
    rolled = np.roll(new, o, axis=-1)
    lower = np.where(lanes < o, left_half, rolled)
    upper = np.where(lanes < o, rolled, right_half)
    return (lower, upper) if hi == 0 else (upper, lower)


def c_rule_inputs(c: int, k: int, shift_num: int, left_half, right_half,
                  new_prev=None, new_first=None, forwarding: bool = True):
    """Write-back halves for sub-block ``c`` of ``k`` with forwarding applied.

    For ``c > 1`` the lower word's low lanes come from sub-block ``c - 1``;
    for ``c = k`` the upper word's high lanes come from sub-block 1.
    """
    if not 1 <= c <= k:
        raise PipelineError(f"c={c} outside 1..{k}")
    left_half = np.array(left_half)
    right_half = np.array(right_half)
    if not forwarding:
        return left_half, right_half
    p = left_half.shape[-1]
    _, o = _split_shift(shift_num, p)
    lanes = np.arange(p)
    if c > 1:
        if new_prev is None:
            raise PipelineError("sub-block c > 1 needs the previous sub-block's values")
        left_half = np.where(lanes < o, np.roll(np.asarray(new_prev), o, axis=-1), left_half)
    if c == k and k > 1:
        if new_first is None:
            raise PipelineError("last sub-block needs sub-block 1's values")
        right_half = np.where(lanes >= o, np.roll(np.asarray(new_first), o, axis=-1), right_half)
    return left_half, right_half


# --------------------------------------------------------------------------
# address schedule


@dataclass(frozen=True)
class RomEntry:
    layer: int
    c: int
    block_col: int
    lower_word: int
    upper_word: int
    addr_l: int
    addr_r: int
    shift_num: int


@dataclass(frozen=True, eq=False)
class AddressSchedule:
    """Read ROM for one iteration, grouped by ``(layer, c)``."""

    k: int
    p: int
    rom: tuple[RomEntry, ...]
    groups: tuple[tuple[int, int, tuple[RomEntry, ...]], ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.rom)


def build_schedule(code: QCCode, layout: MemoryLayout) -> AddressSchedule:
    p = layout.p
    Z = code.Z
    if layout.n != code.n:
        raise PipelineError(f"layout covers {layout.n} variables, code has {code.n}")
    if Z % p:
        raise PipelineError(f"p={p} does not divide Z={Z}")
    k = Z // p
    if k % 2:
        raise PipelineError(f"k = Z/p = {k} must be even so word pairs alternate banks")
    groups = []
    rom = []
    shifts = code.base.shifts
    for r in code.layers:
        cols = np.nonzero(shifts[r] >= 0)[0]
        for c in range(1, k + 1):
            entries = []
            for bc in cols.tolist():
                q, o = divmod(int(shifts[r, bc]), p)
                lower = bc * k + (c - 1 + q) % k
                upper = bc * k + (c + q) % k
                hi = lower % 2
                addr_l, addr_r = (lower // 2, upper // 2) if hi == 0 else (upper // 2, lower // 2)
                entries.append(RomEntry(r, c, bc, lower, upper, addr_l, addr_r, hi * p + o))
            groups.append((r, c, tuple(entries)))
            rom.extend(entries)
    return AddressSchedule(k=k, p=p, rom=tuple(rom), groups=tuple(groups))


def cycles_per_iteration(code: QCCode, p: int) -> int:
    """Read cycles of one iteration: per layer ``ceil(edges / p)``."""
    if p < 1:
        raise PipelineError("p must be positive")
    return sum(math.ceil(code.layer_cols[r].size / p) for r in code.layers)


# --------------------------------------------------------------------------
# cycle simulation


@dataclass(frozen=True)
class PipelineConfig:
    latency: int = 4
    forwarding: bool = True
    interlock: bool = True

    def __post_init__(self) -> None:
        if self.latency < 0:
            raise PipelineError("latency must be non-negative")


@dataclass(eq=False)
class _Write:
    land: int
    bank: int
    addr: int
    values: np.ndarray
    versions: np.ndarray


@dataclass(eq=False)
class PipelineState:
    """RAM contents, lane versions and in-flight writes for a batch of frames."""

    ram: np.ndarray          # (2, frames, depth, p)
    ver: np.ndarray          # (2, depth, p)
    golden: np.ndarray       # (n,) latest logical version per variable
    lr: dict
    s: np.ndarray
    arith: object
    pending: deque = field(default_factory=deque)
    cycle: int = 0
    stalls: int = 0
    next_group: int = 1
    iterations: int = 0


def init_state(code: QCCode, layout: MemoryLayout, llr, s, arith) -> PipelineState:
    llr = np.atleast_2d(np.asarray(llr, dtype=np.float64))
    s = np.atleast_2d(np.asarray(s, dtype=np.uint8))
    lq = arith.prepare(llr)
    B = lq.shape[0]
    ram = np.empty((2, B, layout.depth, layout.p), dtype=lq.dtype)
    for bank in (0, 1):
        ram[bank] = lq[:, layout.bank_contents(bank)]
    lr = {r: arith.zeros((B, code.Z, code.layer_cols[r].shape[1])) for r in code.layers}
    return PipelineState(
        ram=ram, ver=np.zeros((2, layout.depth, layout.p), dtype=np.int64),
        golden=np.zeros(code.n, dtype=np.int64), lr=lr, s=s, arith=arith,
    )


def _land(state: PipelineState, before: int) -> None:
    """Commit in-flight writes whose landing cycle is earlier than ``before``."""
    pend = state.pending
    while pend and pend[0].land < before:
        w = pend.popleft()
        if np.any(w.versions < state.ver[w.bank, w.addr]):
            raise HazardError("overwrite", w.land, w.bank, w.addr)
        state.ram[w.bank, :, w.addr] = w.values
        state.ver[w.bank, w.addr] = w.versions


def drain(state: PipelineState) -> None:
    if state.pending:
        last = state.pending[-1].land
        _land(state, last + 1)
        state.cycle = max(state.cycle, last + 1)


def lq_values(state: PipelineState, layout: MemoryLayout, include_pending: bool = True) -> np.ndarray:
    """Per-variable ``Lq`` as if all in-flight writes had landed."""
    ram = state.ram.copy()
    if include_pending:
        for w in state.pending:
            ram[w.bank, :, w.addr] = w.values
    B = ram.shape[1]
    out = np.empty((B, layout.n), dtype=ram.dtype)
    for bank in (0, 1):
        out[:, layout.bank_contents(bank)] = ram[bank]
    return out


def _read(state, layout, e: RomEntry, t: int, fresh_mask, cfg):
    """Read one word pair at cycle ``t`` (stalling if needed); returns data and the cycle used."""
    p = layout.p
    lanes_l = np.arange(p) + 2 * e.addr_l * p
    lanes_r = np.arange(p) + (2 * e.addr_r + 1) * p
    want = state.golden[np.concatenate([lanes_l, lanes_r])]
    for _ in range(2):
        _land(state, t)
        ver = np.concatenate([state.ver[0, e.addr_l], state.ver[1, e.addr_r]])
        stale = (ver != want) & fresh_mask
        if not stale.any():
            vals = np.concatenate([state.ram[0, :, e.addr_l], state.ram[1, :, e.addr_r]], axis=-1)
            return vals, ver, t
        bank, addr = (0, e.addr_l) if stale[:p].any() else (1, e.addr_r)
        if not cfg.interlock:
            raise HazardError("read-after-write", t, bank, addr)
        lands = [w.land for w in state.pending
                 if (w.bank, w.addr) in ((0, e.addr_l), (1, e.addr_r))]
        if not lands:
            break
        new_t = max(lands) + 1
        state.stalls += new_t - t
        t = new_t
    raise PipelineError(f"stale data at cycle {t} with no pending write to wait for")


def _window_masks(e: RomEntry, c: int, k: int, p: int, cfg: PipelineConfig):
    """Lanes of the bank-ordered window that must be current when read."""
    hi, o = divmod(e.shift_num, p)
    lanes = np.arange(p)
    consumed_lower = lanes >= o
    consumed_upper = lanes < o
    if cfg.interlock:
        fwd_lower = (lanes < o) if (cfg.forwarding and c > 1) else np.zeros(p, bool)
        fwd_upper = (lanes >= o) if (cfg.forwarding and c == k and k > 1) else np.zeros(p, bool)
        need_lower = ~fwd_lower
        need_upper = ~fwd_upper
    else:
        need_lower, need_upper = consumed_lower, consumed_upper
    return np.concatenate([need_lower, need_upper] if hi == 0 else [need_upper, need_lower])


def simulate_layer(code: QCCode, layout: MemoryLayout, schedule: AddressSchedule,
                   state: PipelineState, layer: int, cfg: PipelineConfig = PipelineConfig()) -> None:
    p, k, Z = layout.p, schedule.k, code.Z
    ar = state.arith
    saved: dict[int, dict] = {}
    for r, c, entries in schedule.groups:
        if r != layer:
            continue
        g = state.next_group
        state.next_group += 1
        rows = slice((c - 1) * p, c * p)
        t = state.cycle
        reads = []
        for e in entries:
            mask = _window_masks(e, c, k, p, cfg)
            vals, ver, t = _read(state, layout, e, t, mask, cfg)
            reads.append((e, shift_right(vals, e.shift_num), shift_right(ver, e.shift_num)))
            t += 1
        t_last = t - 1

        lq = np.stack([sr.lane_out for _, sr, _ in reads], axis=-1)
        lqnm = ar.vnu(lq, state.lr[layer][:, rows])
        lr_new = ar.cnu(lqnm, state.s[:, layer * Z + (c - 1) * p:layer * Z + c * p])
        new = ar.total(lqnm, lr_new)
        state.lr[layer][:, rows] = lr_new

        new_ver = np.full(p, g, dtype=np.int64)
        for j, (e, sr, sv) in enumerate(reads):
            prev = saved.get(e.block_col)
            nv = new[:, :, j]
            fwd = dict(forwarding=cfg.forwarding)
            lh, rh = c_rule_inputs(
                c, k, e.shift_num, sr.left_half, sr.right_half,
                new_prev=None if prev is None else prev["prev"][0],
                new_first=None if prev is None else prev["first"][0], **fwd)
            lvh, rvh = c_rule_inputs(
                c, k, e.shift_num, sv.left_half, sv.right_half,
                new_prev=None if prev is None else prev["prev"][1],
                new_first=None if prev is None else prev["first"][1], **fwd)
            word_l, word_r = shift_left(lh, nv, rh, e.shift_num)
            ver_l, ver_r = shift_left(lvh, new_ver, rvh, e.shift_num)
            land = t_last + cfg.latency + j
            state.pending.append(_Write(land, 0, e.addr_l, word_l, ver_l))
            state.pending.append(_Write(land, 1, e.addr_r, word_r, ver_r))
            if prev is None:
                saved[e.block_col] = {"first": (nv, new_ver), "prev": (nv, new_ver)}
            else:
                prev["prev"] = (nv, new_ver)
        state.golden[code.layer_cols[layer][rows].ravel()] = g
        state.cycle = t_last + 1


def simulate_iteration(code: QCCode, layout: MemoryLayout, schedule: AddressSchedule,
                       state: PipelineState, cfg: PipelineConfig = PipelineConfig()) -> PipelineState:
    """Run one full layered iteration through the modelled datapath (in place)."""
    for r in code.layers:
        simulate_layer(code, layout, schedule, state, r, cfg)
    state.iterations += 1
    return state


def run_pipeline_decode(code: QCCode, llr, s, dcfg: DecoderConfig, p: int,
                        cfg: PipelineConfig = PipelineConfig()) -> tuple[BatchDecodeResult, PipelineState]:
    """``t_max`` modelled iterations without early exit, as a decode result."""
    layout = build_layout(code.n, p)
    schedule = build_schedule(code, layout)
    state = init_state(code, layout, llr, s, dcfg.arithmetic)
    for _ in range(dcfg.t_max):
        simulate_iteration(code, layout, schedule, state, cfg)
    drain(state)
    lq = lq_values(state, layout)
    u_hat = hard_decision(lq)
    ok = np.all(syndrome(code, u_hat) == state.s, axis=1)
    res = BatchDecodeResult(u_hat=u_hat, success=ok,
                            iterations=np.full(len(ok), dcfg.t_max, dtype=np.int64),
                            reliabilities=dcfg.arithmetic.reliability(lq), lq=lq)
    return res, state


# --------------------------------------------------------------------------
# throughput


@dataclass(frozen=True)
class ThroughputModel:
    """Inputs of the throughput equations.

    ``d_e`` is the erase-module delay in clock cycles; ``n_total`` defaults
    to ``(1 - R) * N * N_avr``.
    """

    f: float
    p: int
    t_max: int
    n: int
    rate: float
    n_avr: float
    d_e: float = 0.0
    decoders: int = 1
    n_total: float | None = None

    def __post_init__(self) -> None:
        for name in ("f", "p", "t_max", "n", "n_avr"):
            if not getattr(self, name) > 0:
                raise PipelineError(f"{name} must be positive")
        if not 0 <= self.rate < 1:
            raise PipelineError("rate must lie in [0, 1)")
        if self.d_e < 0:
            raise PipelineError("d_e must be non-negative")
        if self.decoders < 1:
            raise PipelineError("decoders must be at least 1")

    @property
    def edges(self) -> float:
        if self.n_total is not None:
            return float(self.n_total)
        return (1 - self.rate) * self.n * self.n_avr

    @property
    def k_cycles(self) -> float:
        return self.edges / self.p

    @property
    def d_e_normalized(self) -> float:
        """``d_e`` in the units of ``(1 - R) * N_avr * t_max`` (cycles times ``p/N``)."""
        return self.d_e * self.p / self.n

    @classmethod
    def for_code(cls, code: QCCode, f: float, p: int, t_max: int,
                 erase_iterations: float = 0.0, decoders: int = 1) -> "ThroughputModel":
        """Model for ``code`` with the erase delay given in iteration equivalents.

        One iteration is ``n_total / p`` cycles here, the same ``K`` the
        throughput equations use, so a delay of ``X`` iterations acts like
        ``t_max + X`` iterations.
        """
        st = stats(code)
        k = st["n_total"] / p
        return cls(f=f, p=p, t_max=t_max, n=code.n, rate=round(code.rate, 12),
                   n_avr=st["n_avr"], d_e=erase_iterations * k, decoders=decoders,
                   n_total=st["n_total"])


def throughput(model: ThroughputModel) -> dict:
    """Bit throughputs (bit/s) from the three throughput equations.

    ``T_eq6 = f N / (K t_max)``, ``T_eq7 = f p / ((1-R) N_avr t_max)`` and
    ``T_eq8 = f p / ((1-R) N_avr t_max + D_e p / N)``; ``T_total`` is
    ``decoders * T_eq8``.
    """
    k = model.k_cycles
    base = (1 - model.rate) * model.n_avr * model.t_max
    if k <= 0 or base <= 0:
        raise PipelineError("zero denominator in throughput")
    t6 = model.f * model.n / (k * model.t_max)
    t7 = model.f * model.p / base
    t8 = model.f * model.p / (base + model.d_e_normalized)
    return {"K": k, "T_eq6": t6, "T_eq7": t7, "T_eq8": t8, "T_total": model.decoders * t8}


def bram_estimate_kbits(n: int, n_total: int, m: int, width: int) -> dict:
    """Words-times-width storage estimate in kbit per RAM."""
    var = n * width / 1000
    chk = n_total * width / 1000
    syn = m / 1000
    return {"variable": var, "check": chk, "syndrome": syn, "total": var + chk + syn}
