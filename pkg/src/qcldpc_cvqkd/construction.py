"""QC multi-edge-type LDPC construction by progressive edge growth.

Degree distributions are given per node class as a fraction of the code
length ``n`` and a degree per edge type.  Construction works on the
block graph: class fractions are rounded to whole block-columns /
block-rows, the check side is rebalanced so every edge type has as many
check sockets as variable sockets, and edges are then placed one block at a
time.  Each placement picks the block-row and circulant shift whose
check node is farthest from the variable node in the current lifted graph,
so short cycles are avoided where possible.
"""

from __future__ import annotations

import logging
import os
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .qc_code import BaseMatrix, QCCode, expand

log = logging.getLogger(__name__)


class ConstructionError(ValueError):
    pass


@dataclass(frozen=True)
class NodeClass:
    fraction: float
    degrees: tuple[int, ...]

    @property
    def total_degree(self) -> int:
        return sum(self.degrees)


@dataclass(frozen=True)
class MetDegreeDistribution:
    edge_types: int
    var_classes: tuple[NodeClass, ...]
    chk_classes: tuple[NodeClass, ...]
    rate: float
    threshold_sigma: float | None = None
    name: str = ""

    @property
    def check_fraction(self) -> float:
        return sum(c.fraction for c in self.chk_classes)

    def edges_per_type(self, side: str) -> np.ndarray:
        classes = self.var_classes if side == "var" else self.chk_classes
        return np.array([sum(c.fraction * c.degrees[t] for c in classes)
                         for t in range(self.edge_types)])


@dataclass
class ValidationReport:
    ok: bool
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    var_counts: list[int] = field(default_factory=list)
    chk_counts: list[int] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        lines = ["valid" if self.ok else "INVALID"]
        lines += [f"error: {e}" for e in self.errors]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines)


# Reference distributions, coefficients as fractions of n.
MET_RATE_01 = MetDegreeDistribution(
    edge_types=3,
    var_classes=(NodeClass(0.075, (2, 21, 0)), NodeClass(0.05, (3, 20, 0)),
                 NodeClass(0.875, (0, 0, 1))),
    chk_classes=(NodeClass(0.025, (12, 0, 0)), NodeClass(0.825, (0, 3, 1)),
                 NodeClass(0.05, (0, 2, 1))),
    rate=0.1, threshold_sigma=2.56, name="rate-0.1",
)

MET_RATE_02 = MetDegreeDistribution(
    edge_types=3,
    var_classes=(NodeClass(0.1244, (2, 8, 0)), NodeClass(0.1253, (3, 10, 0)),
                 NodeClass(0.7503, (0, 0, 1))),
    chk_classes=(NodeClass(0.0341, (12, 0, 0)), NodeClass(0.0156, (11, 0, 0)),
                 NodeClass(0.027, (0, 2, 1)), NodeClass(0.7476, (0, 3, 1))),
    rate=0.2, threshold_sigma=1.71, name="rate-0.2",
)


def largest_remainder(quotas, total: int) -> np.ndarray:
    """Round non-negative ``quotas`` to integers summing to ``total``."""
    q = np.asarray(quotas, dtype=np.float64)
    base = np.floor(q + 1e-9).astype(np.int64)
    short = total - int(base.sum())
    if short < 0 or short > len(q):
        raise ConstructionError(f"cannot round {q.tolist()} to total {total}")
    rem = q - base
    # Stable: earlier classes win ties.
    order = sorted(range(len(q)), key=lambda k: (-round(rem[k], 12), k))
    for k in order[:short]:
        base[k] += 1
    return base


def validate_distribution(dist: MetDegreeDistribution, n: int | None = None,
                          tol: float = 1e-6) -> ValidationReport:
    """Check fractions, edge balance per type and rate consistency.

    Without ``n`` the balance is checked on the fractional edge counts
    (within ``tol``).  With ``n`` the class fractions are rounded to node
    counts and the integer socket counts must match exactly.
    """
    rep = ValidationReport(ok=True)
    if not dist.var_classes or not dist.chk_classes:
        rep.ok = False
        rep.errors.append("empty node class list")
        return rep
    for side, classes in (("variable", dist.var_classes), ("check", dist.chk_classes)):
        for k, c in enumerate(classes):
            if c.fraction < 0:
                rep.errors.append(f"{side} class {k} has negative fraction")
            if len(c.degrees) != dist.edge_types or min(c.degrees) < 0:
                rep.errors.append(f"{side} class {k} has malformed degrees {c.degrees}")
    if rep.errors:
        rep.ok = False
        return rep
    vsum = sum(c.fraction for c in dist.var_classes)
    if abs(vsum - 1.0) > tol:
        rep.errors.append(f"variable fractions sum to {vsum:.6f}, not 1")
    if abs((1.0 - dist.check_fraction) - dist.rate) > tol:
        rep.warnings.append(
            f"check fractions sum to {dist.check_fraction:.6f}; implied rate "
            f"{1 - dist.check_fraction:.4f} differs from declared {dist.rate}")
    if n is None:
        ev, ec = dist.edges_per_type("var"), dist.edges_per_type("chk")
        for t in range(dist.edge_types):
            if abs(ev[t] - ec[t]) > tol:
                rep.errors.append(
                    f"edge type {t + 1} imbalanced: variable side {ev[t]:.6f}n, "
                    f"check side {ec[t]:.6f}n")
    else:
        vc = largest_remainder([c.fraction * n for c in dist.var_classes], n)
        m = int(round(n * dist.check_fraction))
        cc = largest_remainder([c.fraction * n for c in dist.chk_classes], m)
        rep.var_counts, rep.chk_counts = vc.tolist(), cc.tolist()
        for t in range(dist.edge_types):
            sv = sum(int(k) * c.degrees[t] for k, c in zip(vc, dist.var_classes))
            sc = sum(int(k) * c.degrees[t] for k, c in zip(cc, dist.chk_classes))
            if sv != sc:
                rep.errors.append(
                    f"edge type {t + 1} imbalanced at n={n}: {sv} variable sockets, "
                    f"{sc} check sockets")
    rep.ok = not rep.errors
    return rep


# -- distribution files ---------------------------------------------------

def parse_distribution(text: str) -> MetDegreeDistribution:
    """Parse the text format::

        edge_types 3
        rate 0.2
        sigma 1.71            # optional
        var 0.1244 2 8 0
        chk 0.0341 12 0 0
    """
    k = None
    rate = None
    sigma = None
    name = ""
    var, chk = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        toks = raw.split("#", 1)[0].split()
        if not toks:
            continue
        key, args = toks[0], toks[1:]
        try:
            if key == "edge_types":
                k = int(args[0])
            elif key == "rate":
                rate = float(args[0])
            elif key == "sigma":
                sigma = float(args[0])
            elif key == "name":
                name = " ".join(args)
            elif key in ("var", "chk"):
                cls = NodeClass(float(args[0]), tuple(int(a) for a in args[1:]))
                (var if key == "var" else chk).append(cls)
            else:
                raise ConstructionError(f"line {lineno}: unknown key {key!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ConstructionError):
                raise
            raise ConstructionError(f"line {lineno}: {exc}") from None
    if k is None:
        raise ConstructionError("missing 'edge_types' line")
    for cls in var + chk:
        if len(cls.degrees) != k:
            raise ConstructionError(f"class {cls} does not list {k} degrees")
    if rate is None:
        rate = 1.0 - sum(c.fraction for c in chk)
    return MetDegreeDistribution(k, tuple(var), tuple(chk), rate, sigma, name)


def format_distribution(dist: MetDegreeDistribution) -> str:
    lines = []
    if dist.name:
        lines.append(f"name {dist.name}")
    lines.append(f"edge_types {dist.edge_types}")
    lines.append(f"rate {dist.rate:g}")
    if dist.threshold_sigma is not None:
        lines.append(f"sigma {dist.threshold_sigma:g}")
    for key, classes in (("var", dist.var_classes), ("chk", dist.chk_classes)):
        for c in classes:
            lines.append(f"{key} {c.fraction:g} " + " ".join(map(str, c.degrees)))
    return "\n".join(lines) + "\n"


def load_distribution(src) -> MetDegreeDistribution:
    if isinstance(src, (str, os.PathLike)):
        with open(src) as fh:
            return parse_distribution(fh.read())
    return parse_distribution(src.read())


# -- block-level degree plan ------------------------------------------------

@dataclass
class BlockPlan:
    """Per-block degree targets; ``var_deg[c][t]`` / ``chk_deg[r][t]``."""

    var_deg: np.ndarray
    chk_deg: np.ndarray
    var_class: np.ndarray
    chk_class: np.ndarray
    notes: list[str] = field(default_factory=list)


def plan_blocks(dist: MetDegreeDistribution, n: int, Z: int) -> BlockPlan:
    """Round class fractions to blocks and rebalance check degrees.

    Check-row degrees of each edge type are nudged by one, lowest (for a
    deficit) or highest (for a surplus) current degree first, until the
    check sockets equal the variable sockets.
    """
    rep = validate_distribution(dist)
    if not dist.var_classes or not dist.chk_classes:
        raise ConstructionError("empty node class list")
    if n % Z:
        raise ConstructionError(f"n={n} is not a multiple of Z={Z}")
    cols = n // Z
    rows = int(round(cols * (1.0 - dist.rate)))
    notes = list(rep.warnings) + list(rep.errors)

    vquota = [c.fraction * cols for c in dist.var_classes]
    vcount = largest_remainder(vquota, cols)
    cfrac = dist.check_fraction
    cquota = [c.fraction / cfrac * rows for c in dist.chk_classes]
    ccount = largest_remainder(cquota, rows)
    for side, q, cnt in (("variable", vquota, vcount), ("check", cquota, ccount)):
        if not np.allclose(q, cnt, atol=1e-9):
            msg = f"{side} class block counts {cnt.tolist()} rounded from {np.round(q, 3).tolist()}"
            log.warning(msg)
            notes.append(msg)

    var_class = np.repeat(np.arange(len(vcount)), vcount)
    chk_class = np.repeat(np.arange(len(ccount)), ccount)
    var_deg = np.array([dist.var_classes[k].degrees for k in var_class], dtype=np.int64)
    chk_deg = np.array([dist.chk_classes[k].degrees for k in chk_class], dtype=np.int64)

    for t in range(dist.edge_types):
        need = int(var_deg[:, t].sum()) - int(chk_deg[:, t].sum())
        if need:
            notes.append(f"edge type {t + 1}: check sockets adjusted by {need:+d}")
        carriers = np.nonzero(chk_deg[:, t] > 0)[0]
        if need and carriers.size == 0:
            raise ConstructionError(f"edge type {t + 1} has no check class to carry it")
        while need > 0:
            r = min(carriers, key=lambda j: (chk_deg[j, t], j))
            chk_deg[r, t] += 1
            need -= 1
        while need < 0:
            r = max(carriers, key=lambda j: (chk_deg[j, t], -j))
            chk_deg[r, t] -= 1
            need += 1
        n_carry = int(np.count_nonzero(var_deg[:, t]))
        if chk_deg[:, t].max() > n_carry:
            raise ConstructionError(
                f"edge type {t + 1}: check degree {chk_deg[:, t].max()} exceeds the "
                f"{n_carry} block-columns carrying that type")
    for c in range(cols):
        if var_deg[c].sum() > rows:
            raise ConstructionError(f"variable degree {var_deg[c].sum()} exceeds {rows} block-rows")
    if np.any(chk_deg.sum(axis=1) == 0):
        raise ConstructionError("rebalancing emptied a check block-row")
    return BlockPlan(var_deg, chk_deg, var_class, chk_class, notes)


# -- PEG -------------------------------------------------------------------

def _check_distances(entries, rows: int, cols: int, Z: int, var_block: int) -> np.ndarray:
    """Tanner-graph distance from variable ``var_block*Z`` to every check node.

    ``entries`` is a list of ``(r, c, shift)``.  Unreachable checks get a
    large sentinel.
    """
    inf = np.iinfo(np.int64).max // 4
    dist = np.full(rows * Z, inf, dtype=np.int64)
    if not entries:
        return dist
    e = np.array(entries, dtype=np.int64)
    i = np.arange(Z)
    rr = (e[:, 0:1] * Z + i).ravel()
    cc = (e[:, 1:2] * Z + (i + e[:, 2:3]) % Z).ravel()
    H = sp.csr_matrix((np.ones(rr.size, dtype=np.int8), (rr, cc)), shape=(rows * Z, cols * Z))
    Ht = H.T.tocsr()
    seen_v = np.zeros(cols * Z, dtype=bool)
    seen_c = np.zeros(rows * Z, dtype=bool)
    front = np.zeros(cols * Z, dtype=np.int8)
    front[var_block * Z] = 1
    seen_v[var_block * Z] = True
    depth = 1
    while True:
        chk = (H @ front) > 0
        chk &= ~seen_c
        if not chk.any():
            break
        dist[chk] = depth
        seen_c |= chk
        var = (Ht @ chk.astype(np.int8)) > 0
        var &= ~seen_v
        if not var.any():
            break
        seen_v |= var
        front = var.astype(np.int8)
        depth += 2
    return dist


def qc_peg(dist: MetDegreeDistribution, n: int, Z: int, seed: int = 0) -> BaseMatrix:
    """Build a base matrix realising ``dist`` at length ``n`` with lifting ``Z``.

    Variable block-columns are processed in increasing degree, degree-one
    columns last.  For every edge of edge type ``t`` the candidates are the
    block-rows with spare type-``t`` capacity that are not yet connected to
    the column; each candidate shift is scored by the distance from the
    column's first variable node to the check node it would join (the new
    cycle length is that distance plus one).  The farthest wins, ties going
    to the lower current row degree, then lower row index, then a seeded
    random shift.
    """
    plan = plan_blocks(dist, n, Z)
    rng = np.random.default_rng(seed)
    cols, rows = len(plan.var_deg), len(plan.chk_deg)
    shifts = -np.ones((rows, cols), dtype=np.int64)
    cap = plan.chk_deg.copy()
    row_deg = np.zeros(rows, dtype=np.int64)
    entries: list[tuple[int, int, int]] = []

    totals = plan.var_deg.sum(axis=1)
    order = sorted(range(cols), key=lambda c: (totals[c] == 1, totals[c], c))
    alphas = np.arange(Z)
    for c in order:
        for t in range(dist.edge_types):
            for _ in range(int(plan.var_deg[c, t])):
                cand = [r for r in range(rows) if cap[r, t] > 0 and shifts[r, c] < 0]
                if not cand:
                    raise ConstructionError(
                        f"no block-row left for edge type {t + 1} of block-column {c}")
                d = _check_distances(entries, rows, cols, Z, c)
                best = None
                for r in cand:
                    # shift a joins variable c*Z to check r*Z + (-a mod Z)
                    dd = d[r * Z + (-alphas) % Z]
                    top = dd.max()
                    key = (-top, row_deg[r], r)
                    if best is None or key < best[0]:
                        best = (key, r, np.nonzero(dd == top)[0])
                _, r, ok = best
                a = int(rng.choice(ok))
                shifts[r, c] = a
                cap[r, t] -= 1
                row_deg[r] += 1
                entries.append((r, c, a))
    return BaseMatrix(shifts, Z)


def realized_distribution(base: BaseMatrix, plan: BlockPlan, dist: MetDegreeDistribution
                          ) -> MetDegreeDistribution:
    """Distribution actually realised by a constructed base matrix.

    Edge types are read from the plan (which block belongs to which type);
    block degrees are counted from ``base``.
    """
    cols, rows = base.cols, base.rows
    mask = base.shifts >= 0
    if not np.array_equal(mask.sum(axis=0), plan.var_deg.sum(axis=1)):
        raise ConstructionError("base matrix column degrees differ from the plan")
    if not np.array_equal(mask.sum(axis=1), plan.chk_deg.sum(axis=1)):
        raise ConstructionError("base matrix row degrees differ from the plan")

    def group(deg):
        out: dict[tuple[int, ...], int] = {}
        for row in deg:
            out[tuple(int(x) for x in row)] = out.get(tuple(int(x) for x in row), 0) + 1
        return out

    vg, cg = group(plan.var_deg), group(plan.chk_deg)
    return MetDegreeDistribution(
        edge_types=dist.edge_types,
        var_classes=tuple(NodeClass(k / cols, d) for d, k in vg.items()),
        chk_classes=tuple(NodeClass(k / cols, d) for d, k in cg.items()),
        rate=1.0 - rows / cols,
        threshold_sigma=dist.threshold_sigma,
        name=(dist.name + " realised").strip(),
    )


# -- girth -----------------------------------------------------------------

def girth(code: QCCode, cap: int = 12) -> int | None:
    """Shortest cycle of the Tanner graph, or ``None`` if it is ``>= cap``.

    A BFS is run from one variable node per block-column: the cyclic
    automorphism of a QC code maps every node of a block-column onto that
    representative, so this covers every cycle.
    """
    if cap < 4 or cap % 2:
        raise ValueError("cap must be an even number >= 4")
    H = code.H
    Hc = code.Hc
    n = code.n
    best = cap
    # Nodes: variables 0..n-1, checks n..n+m-1.
    for root in range(0, n, code.Z):
        dist = {root: 0}
        parent = {root: -1}
        q = deque([root])
        while q:
            u = q.popleft()
            du = dist[u]
            if 2 * du + 1 >= best:
                break
            if u < n:
                nbrs = Hc.indices[Hc.indptr[u]:Hc.indptr[u + 1]] + n
            else:
                nbrs = H.indices[H.indptr[u - n]:H.indptr[u - n + 1]]
            for v in nbrs.tolist():
                if v == parent[u]:
                    continue
                if v in dist:
                    best = min(best, du + dist[v] + 1)
                else:
                    dist[v] = du + 1
                    parent[v] = u
                    q.append(v)
    return best if best < cap else None


def construct_code(dist: MetDegreeDistribution, n: int, Z: int, seed: int = 0) -> QCCode:
    base = qc_peg(dist, n, Z, seed)
    return expand(base, rate=1.0 - base.rows / base.cols)
