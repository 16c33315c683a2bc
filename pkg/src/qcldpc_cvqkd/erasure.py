"""Residual error-bit erasure after a failed decode.

Bits whose final reliability ``|Lq|`` is below a threshold are suspicious.
The eraser then does a greedy syndrome-weight descent restricted to the
suspicious bits: with residual ``e = s XOR H u_hat`` it repeatedly flips the
suspicious bit whose column lowers ``weight(e)`` the most, until ``e`` is
zero, no flip helps, or the flip budget runs out.  Only the decoder outputs
and ``H`` are used; no channel data is consulted.

Two alternatives are available through ``EraseConfig.mode``: ``"peel"``
treats the suspicious bits as erasures and resolves them check by check
(a check with a single erased bit fixes that bit), and ``"exhaustive"``
searches all subsets of a small suspicious set for the smallest one that
explains the residual.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .qc_code import QCCode, syndrome

# Reference thresholds in message codes.
DELTA_W8 = 40
DELTA_W10 = 180


class EraseContractError(ValueError):
    pass


@dataclass(frozen=True)
class EraseCostModel:
    """Clock cost of one erase run in decode-iteration equivalents.

    ``base`` covers the fixed work (syndrome of ``u_hat`` and the
    suspicious-set scan), ``per_recompute`` each incremental syndrome
    update.  The fixture presets charge a flat ``base`` matching a
    fixed-latency hardware block.
    """

    base: float = 2.4
    per_recompute: float = 0.0


ERASE_COST_RATE_02 = EraseCostModel(2.4, 0.0)
ERASE_COST_RATE_01 = EraseCostModel(3.0, 0.0)


@dataclass(frozen=True)
class EraseConfig:
    delta: float = DELTA_W8
    max_flips: int = 1000
    max_suspicious: int | None = None
    mode: str = "greedy"
    exhaustive_limit: int = 20

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.max_flips < 0:
            raise ValueError("max_flips must be non-negative")
        if self.mode not in ("greedy", "exhaustive", "peel"):
            raise ValueError(f"unknown erase mode {self.mode!r}")


@dataclass(eq=False)
class EraseOutcome:
    corrected: np.ndarray
    success: bool
    flips_applied: list[int] = field(default_factory=list)
    suspicious_size: int = 0
    recomputations: int = 0
    weight_trace: list[int] = field(default_factory=list)
    cycles_estimate: float | None = None


def suspicious_set(reliabilities, delta: float, max_size: int | None = None) -> np.ndarray:
    """Indices with reliability strictly below ``delta``, ascending.

    With ``max_size`` only the least reliable ``max_size`` are kept (still
    returned in ascending index order).
    """
    rel = np.asarray(reliabilities)
    idx = np.nonzero(rel < delta)[0]
    if max_size is not None and idx.size > max_size:
        keep = np.lexsort((idx, rel[idx]))[:max_size]
        idx = np.sort(idx[keep])
    return idx


def _greedy(Hs, weights, rel_s, e, budget):
    """Greedy descent on the residual; returns (local flip indices, weights).

    ``cnt[j]`` is the number of unsatisfied checks on column ``j``, so the
    weight reduction of flipping ``j`` is ``2 cnt[j] - weights[j]``.  Each
    flip only touches the columns sharing a check with the flipped one.
    """
    e = e.astype(np.int64)
    flips: list[int] = []
    trace = [int(e.sum())]
    if Hs.shape[1] == 0:
        return flips, trace
    rows = Hs.tocsr()
    cnt = np.asarray(Hs.T @ e).astype(np.int64)
    order_key = np.lexsort((np.arange(len(rel_s)), rel_s))
    rank = np.empty_like(order_key)
    rank[order_key] = np.arange(len(order_key))
    for _ in range(budget):
        if trace[-1] == 0:
            break
        gain = 2 * cnt - weights
        best = gain.max()
        if best <= 0:
            break
        cand = np.nonzero(gain == best)[0]
        j = int(cand[np.argmin(rank[cand])])
        for i in Hs.indices[Hs.indptr[j]:Hs.indptr[j + 1]].tolist():
            e[i] ^= 1
            cnt[rows.indices[rows.indptr[i]:rows.indptr[i + 1]]] += 1 if e[i] else -1
        flips.append(j)
        trace.append(trace[-1] - int(best))
    return flips, trace


def _exhaustive(Hs, e, max_size):
    """Smallest subset of columns whose XOR equals ``e`` (None if none <= max_size)."""
    cols = []
    for j in range(Hs.shape[1]):
        v = 0
        for i in Hs.indices[Hs.indptr[j]:Hs.indptr[j + 1]].tolist():
            v |= 1 << i
        cols.append(v)
    target = 0
    for i in np.nonzero(e)[0].tolist():
        target |= 1 << i
    if target == 0:
        return []
    for size in range(1, min(max_size, len(cols)) + 1):
        for combo in itertools.combinations(range(len(cols)), size):
            acc = 0
            for j in combo:
                acc ^= cols[j]
            if acc == target:
                return list(combo)
    return None


def _peel(code: QCCode, u_hat, s_target, S):
    """Treat ``S`` as erased and resolve checks with one erased bit, repeatedly.

    Returns the recovered word, or None if some erased bit stays unresolved
    or the syndrome is still violated.
    """
    H, Hc = code.H, code.Hc
    erased = np.zeros(code.n, dtype=bool)
    erased[S] = True
    x = u_hat.copy()
    x[S] = 0
    t = syndrome(code, x) ^ s_target
    cnt = np.diff(H[:, S].tocsr().indptr) if S.size else np.zeros(code.m, dtype=np.int64)
    cnt = cnt.astype(np.int64)
    queue = deque(np.nonzero(cnt == 1)[0].tolist())
    while queue:
        r = queue.popleft()
        if cnt[r] != 1:
            continue
        cols = H.indices[H.indptr[r]:H.indptr[r + 1]]
        j = int(cols[erased[cols]][0])
        erased[j] = False
        x[j] = t[r]
        rows = Hc.indices[Hc.indptr[j]:Hc.indptr[j + 1]]
        if x[j]:
            t[rows] ^= 1
        cnt[rows] -= 1
        queue.extend(rows[cnt[rows] == 1].tolist())
    if erased.any() or t.any():
        return None
    return x


def erase(code: QCCode, u_hat, s_target, reliabilities, cfg: EraseConfig,
          cost: EraseCostModel | None = None, p: int | None = None) -> EraseOutcome:
    """Try to correct a failed frame by flipping suspicious bits.

    On failure the original ``u_hat`` is returned unchanged.  Passing the
    datapath parallelism ``p`` fills in ``cycles_estimate`` (clock cycles
    under ``cost``, or the rate preset when ``cost`` is None).
    """
    u_hat = np.asarray(u_hat, dtype=np.uint8)
    s_target = np.asarray(s_target, dtype=np.uint8)
    e = syndrome(code, u_hat) ^ s_target
    if not e.any():
        raise EraseContractError("erase called on a frame whose syndrome already matches")
    rel = np.asarray(reliabilities)
    S = suspicious_set(rel, cfg.delta, cfg.max_suspicious)
    Hs = code.Hc[:, S].tocsc()
    Hs.sort_indices()
    weights = np.diff(Hs.indptr)

    if cfg.mode == "peel":
        x = _peel(code, u_hat, s_target, S)
        ok = x is not None
        diff = np.nonzero(x != u_hat)[0] if ok else np.array([], dtype=np.int64)
        pos = np.searchsorted(S, diff)
        local = pos.tolist()
        trace = [int(e.sum())] + ([0] if ok else [])
    elif cfg.mode == "exhaustive" and S.size <= cfg.exhaustive_limit:
        sol = _exhaustive(Hs, e, cfg.max_flips)
        local = sol or []
        trace = [int(e.sum())]
        ok = sol is not None
    else:
        local, trace = _greedy(Hs, weights, rel[S], e, cfg.max_flips)
        ok = bool(trace[-1] == 0)

    flips = [int(S[j]) for j in local]
    corrected = u_hat.copy()
    if ok:
        for j in flips:
            corrected[j] ^= 1
    out = EraseOutcome(corrected=corrected, success=ok, flips_applied=flips,
                       suspicious_size=int(S.size), recomputations=len(flips) + 1,
                       weight_trace=trace)
    if p is not None:
        out.cycles_estimate = cycle_cost_clocks(out, code, p, cost)
    return out


def default_cost_model(code: QCCode) -> EraseCostModel:
    """Preset matching the code's rate (the lower-rate preset below 0.15)."""
    return ERASE_COST_RATE_01 if code.rate < 0.15 else ERASE_COST_RATE_02


def cycle_cost(outcome: EraseOutcome, code: QCCode,
               model: EraseCostModel | None = None) -> float:
    """Cost of one erase run in decode-iteration equivalents."""
    if model is None:
        model = default_cost_model(code)
    extra = max(outcome.recomputations - 1, 0)
    return model.base + model.per_recompute * extra


def cycle_cost_clocks(outcome: EraseOutcome, code: QCCode, p: int,
                      model: EraseCostModel | None = None) -> float:
    """:func:`cycle_cost` converted to clock cycles at parallelism ``p``."""
    from .pipeline_model import cycles_per_iteration

    return cycle_cost(outcome, code, model) * cycles_per_iteration(code, p)


def max_error_reliability(reliabilities, u_hat, u) -> float:
    """Largest reliability among wrongly decided bits (-inf if none)."""
    err = np.asarray(u_hat) != np.asarray(u)
    if not err.any():
        return float("-inf")
    return float(np.asarray(reliabilities)[err].max())


def n_err_statistic(reliabilities, u_hat, u, delta: float) -> int:
    """Number of failed frames whose erroneous bits all lie below ``delta``.

    Arguments are ``(frames, n)`` arrays; frames decoded correctly are
    ignored.
    """
    rel = np.atleast_2d(reliabilities)
    u_hat = np.atleast_2d(u_hat)
    u = np.atleast_2d(u)
    count = 0
    for k in range(rel.shape[0]):
        err = u_hat[k] != u[k]
        if err.any() and rel[k][err].max() < delta:
            count += 1
    return count
