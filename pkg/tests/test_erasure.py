import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcldpc_cvqkd.erasure import (ERASE_COST_RATE_01, ERASE_COST_RATE_02, EraseConfig,
                                  EraseContractError, EraseCostModel, cycle_cost,
                                  cycle_cost_clocks, default_cost_model, erase,
                                  max_error_reliability, n_err_statistic, suspicious_set)
from qcldpc_cvqkd.experiment import FIXTURES
from qcldpc_cvqkd.pipeline_model import cycles_per_iteration
from qcldpc_cvqkd.qc_code import syndrome


_CODE = {}


def _rate02():
    # Hypothesis tests cannot take function-scoped fixtures.
    if "c" not in _CODE:
        _CODE["c"] = FIXTURES["rate0.2"].code()
    return _CODE["c"]


def corrupted(code, positions, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.integers(0, 2, code.n, dtype=np.uint8)
    u_hat = u.copy()
    u_hat[list(positions)] ^= 1
    rel = np.full(code.n, 100.0)
    rel[list(positions)] = 1.0
    return u, u_hat, syndrome(code, u), rel


def test_suspicious_set_is_strict_and_sorted():
    rel = np.array([5.0, 1.0, 3.0, 3.0, 0.5])
    assert suspicious_set(rel, 3.0).tolist() == [1, 4]
    assert suspicious_set(rel, 3.5).tolist() == [1, 2, 3, 4]
    assert suspicious_set(rel, 3.5, max_size=2).tolist() == [1, 4]
    assert suspicious_set(rel, 0.1).size == 0


def test_contract_violation_raises(small_code):
    u, _, s, rel = corrupted(small_code, [])
    with pytest.raises(EraseContractError):
        erase(small_code, u, s, rel, EraseConfig(delta=2.0))


@pytest.mark.parametrize("mode", ["greedy", "peel", "exhaustive"])
def test_single_error_is_corrected(rate02_code, mode):
    u, u_hat, s, rel = corrupted(rate02_code, [1234])
    out = erase(rate02_code, u_hat, s, rel, EraseConfig(delta=2.0, mode=mode))
    assert out.success and out.flips_applied == [1234]
    assert np.array_equal(out.corrected, u)
    assert out.suspicious_size == 1


def test_greedy_picks_true_errors_among_decoys(rate02_code):
    u, u_hat, s, rel = corrupted(rate02_code, [10, 4000, 7999])
    rel[[55, 3100]] = 1.5  # reliable-looking but still suspicious correct bits
    out = erase(rate02_code, u_hat, s, rel, EraseConfig(delta=2.0))
    assert out.success and sorted(out.flips_applied) == [10, 4000, 7999]
    assert np.array_equal(out.corrected, u)
    assert out.weight_trace[-1] == 0


def test_error_outside_suspicious_set_fails_and_rolls_back(rate02_code):
    u, u_hat, s, rel = corrupted(rate02_code, [10, 20])
    rel[20] = 50.0
    for mode in ("greedy", "peel", "exhaustive"):
        out = erase(rate02_code, u_hat, s, rel, EraseConfig(delta=2.0, mode=mode))
        assert not out.success
        assert np.array_equal(out.corrected, u_hat)


def test_flip_budget(rate02_code):
    u, u_hat, s, rel = corrupted(rate02_code, [10, 4000, 7999])
    out = erase(rate02_code, u_hat, s, rel, EraseConfig(delta=2.0, max_flips=2))
    assert not out.success and len(out.weight_trace) == 3


def test_exhaustive_finds_smallest_explanation(small_code):
    u, u_hat, s, rel = corrupted(small_code, [3, 17])
    out = erase(small_code, u_hat, s, rel, EraseConfig(delta=2.0, mode="exhaustive"))
    assert out.success and sorted(out.flips_applied) == [3, 17]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 7999), min_size=1, max_size=12, unique=True),
       st.lists(st.integers(0, 7999), max_size=30, unique=True))
def test_greedy_descent_is_strictly_monotone(errors, decoys):
    code = _rate02()
    u, u_hat, s, rel = corrupted(code, errors)
    rel[decoys] = np.minimum(rel[decoys], 1.9)
    out = erase(code, u_hat, s, rel, EraseConfig(delta=2.0))
    trace = out.weight_trace
    assert all(b < a for a, b in zip(trace, trace[1:]))
    if out.success:
        assert np.array_equal(syndrome(code, out.corrected), s)
    else:
        assert np.array_equal(out.corrected, u_hat)


def test_cost_model(rate02_code, rate01_code):
    assert default_cost_model(rate02_code) == ERASE_COST_RATE_02
    assert default_cost_model(rate01_code) == ERASE_COST_RATE_01
    u, u_hat, s, rel = corrupted(rate02_code, [5, 9])
    out = erase(rate02_code, u_hat, s, rel, EraseConfig(delta=2.0), p=25)
    assert cycle_cost(out, rate02_code) == pytest.approx(2.4)
    # two flips: three syndrome evaluations, two of them incremental
    assert cycle_cost(out, rate02_code, EraseCostModel(1.0, 0.5)) == pytest.approx(2.0)
    assert out.cycles_estimate == pytest.approx(2.4 * cycles_per_iteration(rate02_code, 25))
    assert cycle_cost_clocks(out, rate02_code, 25) == out.cycles_estimate


def test_error_statistics():
    rel = np.array([[1.0, 9.0, 2.0], [1.0, 1.0, 1.0], [5.0, 1.0, 1.0]])
    u = np.zeros((3, 3), dtype=np.uint8)
    u_hat = np.array([[1, 0, 1], [0, 0, 0], [1, 0, 0]], dtype=np.uint8)
    assert n_err_statistic(rel, u_hat, u, delta=3.0) == 1
    assert max_error_reliability(rel[2], u_hat[2], u[2]) == 5.0
    assert max_error_reliability(rel[1], u_hat[1], u[1]) == float("-inf")


def test_config_validation():
    with pytest.raises(ValueError):
        EraseConfig(delta=0)
    with pytest.raises(ValueError):
        EraseConfig(mode="magic")
