import io

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcldpc_cvqkd.construction import (MET_RATE_01, MET_RATE_02, ConstructionError,
                                       MetDegreeDistribution, NodeClass, construct_code,
                                       format_distribution, girth, largest_remainder,
                                       load_distribution, parse_distribution, plan_blocks,
                                       qc_peg, realized_distribution, validate_distribution)
from qcldpc_cvqkd.qc_code import BaseMatrix, expand


def nx_girth(code):
    """Shortest Tanner-graph cycle via networkx (inf when acyclic)."""
    H = code.H.tocoo()
    g = nx.Graph()
    g.add_edges_from((("v", int(c)), ("c", int(r))) for r, c in zip(H.row, H.col))
    return nx.girth(g)


TOY = MetDegreeDistribution(
    edge_types=2,
    var_classes=(NodeClass(0.5, (2, 0)), NodeClass(0.5, (0, 3))),
    chk_classes=(NodeClass(0.25, (4, 0)), NodeClass(0.25, (0, 6))),
    rate=0.5,
)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_girth_matches_networkx(seed):
    rng = np.random.default_rng(seed)
    Z = int(rng.integers(3, 7))
    shifts = rng.integers(-1, Z, size=(3, 5))
    shifts[:, 0] = np.maximum(shifts[:, 0], 0)
    shifts[0] = np.maximum(shifts[0], 0)
    code = expand(BaseMatrix(shifts, Z))
    ref = nx_girth(code)
    got = girth(code, cap=40)
    assert (got is None and ref == float("inf")) or got == ref


def test_girth_cap(small_code):
    assert girth(small_code, cap=4) is None
    with pytest.raises(ValueError):
        girth(small_code, cap=5)


def test_table_iv_fractions():
    assert validate_distribution(MET_RATE_01).ok
    # The tabulated rate-0.2 check fractions imply rate 0.1757 and leave the
    # sockets of every edge type unbalanced; the block planner rebalances them.
    rep = validate_distribution(MET_RATE_02)
    assert not rep.ok
    assert any("implied rate 0.1757" in w for w in rep.warnings)
    assert [e.split(":")[0] for e in rep.errors] == ["edge type 1 imbalanced",
                                                     "edge type 2 imbalanced",
                                                     "edge type 3 imbalanced"]


def test_validation_reports_imbalance():
    bad = MetDegreeDistribution(
        edge_types=1, var_classes=(NodeClass(1.0, (3,)),),
        chk_classes=(NodeClass(0.5, (4,)),), rate=0.5)
    rep = validate_distribution(bad)
    assert not rep.ok and "imbalanced" in rep.errors[0]
    rep = validate_distribution(MetDegreeDistribution(1, (NodeClass(0.9, (3,)),),
                                                      (NodeClass(0.5, (6,)),), 0.5))
    assert not rep.ok and "sum to" in rep.errors[0]


def test_validation_with_n_counts_sockets():
    rep = validate_distribution(TOY, n=40)
    assert rep.ok and rep.var_counts == [20, 20] and rep.chk_counts == [10, 10]


def test_largest_remainder():
    assert largest_remainder([1.5, 1.5, 1.0], 4).tolist() in ([2, 1, 1], [1, 2, 1])
    assert largest_remainder([2.2, 3.3, 4.5], 10).tolist() == [2, 3, 5]
    with pytest.raises(ConstructionError):
        largest_remainder([0.2, 0.3, 0.5], 10)


def test_distribution_roundtrip():
    text = format_distribution(MET_RATE_02)
    again = parse_distribution(text)
    assert again == MET_RATE_02
    assert load_distribution(io.StringIO(text)) == MET_RATE_02


def test_distribution_parse_errors():
    with pytest.raises(ConstructionError, match="edge_types"):
        parse_distribution("var 1.0 3\n")
    with pytest.raises(ConstructionError, match="line 2"):
        parse_distribution("edge_types 1\nbogus 1\n")
    with pytest.raises(ConstructionError):
        parse_distribution("edge_types 2\nvar 1.0 3\n")


def test_toy_construction_is_valid_and_deterministic():
    a = qc_peg(TOY, 48, 4, seed=3)
    b = qc_peg(TOY, 48, 4, seed=3)
    assert a == b
    plan = plan_blocks(TOY, 48, 4)
    assert validate_distribution(realized_distribution(a, plan, TOY), n=a.cols).ok
    code = construct_code(TOY, 48, 4, seed=3)
    assert code.base == a and code.rate == pytest.approx(0.5)


def test_rate02_fixture_scale_construction():
    base = qc_peg(MET_RATE_02, 8000, 100, seed=0)
    plan = plan_blocks(MET_RATE_02, 8000, 100)
    assert validate_distribution(realized_distribution(base, plan, MET_RATE_02), n=base.cols).ok
    assert girth(expand(base)) >= 6


def test_infeasible_block_degree_raises():
    # Type-1 checks need 12 distinct type-1 block-columns; Z = 100 leaves only 10.
    with pytest.raises(ConstructionError, match="exceeds"):
        plan_blocks(MET_RATE_01, 8000, 100)


def test_n_must_be_multiple_of_z():
    with pytest.raises(ConstructionError):
        plan_blocks(TOY, 50, 4)


def test_shipped_fixtures_have_girth_six(rate02_code, rate01_code):
    assert girth(rate02_code) >= 6
    assert girth(rate01_code) >= 6
