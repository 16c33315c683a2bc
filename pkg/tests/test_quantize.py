import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcldpc_cvqkd.quantize import (W8, W10, FixedFormat, PhiTable, QValue, parse_format,
                                   phi, phi_real, phi_table, quantize, quantize_array,
                                   sat_add, sat_sub, saturate)


def test_reference_formats():
    assert (W8.w, W8.i_bits, W8.f_bits, W8.max_code, W8.lsb) == (8, 4, 3, 127, 0.125)
    assert (W10.w, W10.f_bits, W10.max_code) == (10, 5, 511)


def test_width_must_add_up():
    with pytest.raises(ValueError):
        FixedFormat(8, 4, 4)
    assert FixedFormat.from_width(8, 4) == W8


def test_quantize_rounds_and_saturates():
    assert quantize(1.06, W8).code == 8
    assert quantize(100.0, W8).code == 127
    assert quantize(-100.0, W8).code == -127
    assert quantize(0.0625, W8).code == 0  # half to even
    assert quantize(0.1875, W8).code == 2


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_quantize_is_saturated_nearest(x):
    q = quantize(x, W8)
    assert abs(q.code) <= W8.max_code
    if abs(x) < W8.max_code * W8.lsb:
        assert abs(q.real - x) <= W8.lsb / 2 + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(-127, 127), st.integers(-127, 127))
def test_saturating_arithmetic(a, b):
    qa, qb = QValue(a, W8), QValue(b, W8)
    assert sat_add(qa, qb).code == max(-127, min(127, a + b))
    assert sat_sub(qa, qb).code == max(-127, min(127, a - b))
    assert (qa + qb).code == sat_add(qa, qb).code


def test_format_mismatch_rejected():
    with pytest.raises(ValueError):
        sat_add(QValue(1, W8), QValue(1, W10))


def test_qvalue_range_checked():
    with pytest.raises(ValueError):
        QValue(128, W8)


def test_phi_is_involution():
    x = np.linspace(0.05, 15, 200)
    assert np.allclose(phi_real(phi_real(x)), x, rtol=1e-9)
    assert phi_real(1.0) == pytest.approx(-math.log(math.tanh(0.5)))


def test_phi_large_argument_is_accurate():
    # -ln(tanh(x/2)) ~ 2 exp(-x) for large x
    assert phi_real(30.0) == pytest.approx(2 * math.exp(-30.0), rel=1e-9)


def test_phi_table_endpoints():
    tbl = phi_table(W8)
    assert tbl.table[0] == W8.max_code
    assert tbl.table.min() >= 1
    assert len(tbl) == 128
    assert np.all(np.diff(tbl.table) <= 0)


def test_phi_table_entries_are_rounded_phi():
    tbl = PhiTable(W10)
    codes = np.arange(1, 512)
    expect = np.clip(np.rint(phi_real(codes / 32) * 32), 1, 511)
    assert np.array_equal(tbl.table[1:], expect)


def test_guard_bits_widen_phi_domain():
    tbl = PhiTable(W8, guard_bits=4)
    assert tbl.domain == FixedFormat(12, 4, 7)
    assert tbl.clamp_max == tbl.domain.max_code
    assert tbl.sum_max == 2047
    # Round trip through the wide domain lands near the identity.
    mid = np.arange(4, 40)
    assert np.max(np.abs(tbl.inverse(tbl.forward(mid)) - mid)) <= 1


def test_phi_rejects_negative():
    with pytest.raises(ValueError):
        phi(QValue(-1, W8))
    assert phi(QValue(8, W8)).code == int(phi_table(W8).table[8])


def test_saturate_and_quantize_array():
    assert saturate(np.array([-300, 5, 300]), W8).tolist() == [-127, 5, 127]
    assert quantize_array([0.5, -0.5, 40.0], W8).tolist() == [4, -4, 127]


def test_parse_format():
    assert parse_format("8,4") == W8
    assert parse_format("10,4,5") == W10
    with pytest.raises(ValueError):
        parse_format("8")
