import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcldpc_cvqkd.qc_code import (BaseMatrix, BaseMatrixError, dense, expand, format_base,
                                  format_support, load_base, parse_base, stats, syndrome)


_SMALL = expand(BaseMatrix(np.array([[0, 3, -1, 5, 1, -1],
                                      [2, -1, 7, 0, -1, 4],
                                      [-1, 6, 1, -1, 3, 2]]), 8))


def test_toy_expansion_matches_hand_lifted_matrix(toy_code):
    # Base "1 0 2 / 3 -1 1", Z = 4: row i of block (r, c) has its one at (i + a) % 4.
    H = dense(toy_code)
    assert H.shape == (8, 12)
    for i in range(4):
        assert H[i, :4].tolist() == [int(j == (i + 1) % 4) for j in range(4)]
        assert H[i, 4:8].tolist() == [int(j == i) for j in range(4)]
        assert H[4 + i, :4].tolist() == [int(j == (i + 3) % 4) for j in range(4)]
        assert H[4 + i, 4:8].tolist() == [0, 0, 0, 0]
    assert toy_code.rate == pytest.approx(1 - 2 / 3)


def test_every_circulant_is_a_permutation(small_code):
    H = dense(small_code)
    Z = small_code.Z
    for r, c, _ in small_code.base.blocks():
        blk = H[r * Z:(r + 1) * Z, c * Z:(c + 1) * Z]
        assert (blk.sum(axis=0) == 1).all() and (blk.sum(axis=1) == 1).all()


def test_layer_cols_agree_with_H(small_code):
    for row in range(small_code.m):
        H = small_code.H
        assert small_code.check_support(row).tolist() == \
            H.indices[H.indptr[row]:H.indptr[row + 1]].tolist()


def test_column_support_is_transpose(small_code):
    H = dense(small_code)
    for col in range(small_code.n):
        assert small_code.column_support(col).tolist() == np.nonzero(H[:, col])[0].tolist()


def test_stats(small_code):
    st_ = stats(small_code)
    assert st_["n_total"] == 4 * 3 * 8
    assert st_["n_avr"] == 4.0
    assert st_["row_hist"] == {4: 24}


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=48, max_size=48),
       st.lists(st.integers(0, 1), min_size=48, max_size=48))
def test_syndrome_is_linear_and_matches_dense(a, b):
    code = _SMALL
    a = np.array(a, dtype=np.uint8)
    b = np.array(b, dtype=np.uint8)
    assert np.array_equal(syndrome(code, a ^ b), syndrome(code, a) ^ syndrome(code, b))
    assert np.array_equal(syndrome(code, a), dense(code).astype(int) @ a % 2)


def test_batched_syndrome(small_code):
    rng = np.random.default_rng(1)
    w = rng.integers(0, 2, (5, small_code.n), dtype=np.uint8)
    batch = syndrome(small_code, w)
    for k in range(5):
        assert np.array_equal(batch[k], syndrome(small_code, w[k]))


def test_syndrome_rejects_wrong_length(small_code):
    with pytest.raises(ValueError):
        syndrome(small_code, np.zeros(small_code.n + 1, dtype=np.uint8))


def test_base_roundtrip(small_code):
    text = format_base(small_code.base)
    assert parse_base(text) == small_code.base
    assert load_base(io.StringIO(text)) == small_code.base


def test_parse_reports_line_and_column():
    with pytest.raises(BaseMatrixError, match="line 2, column 3"):
        parse_base("1 3 4\n0 1 x\n")
    with pytest.raises(BaseMatrixError, match="outside"):
        parse_base("1 2 4\n0 4\n")
    with pytest.raises(BaseMatrixError, match="expected 2 rows"):
        parse_base("2 2 4\n0 1\n")
    with pytest.raises(BaseMatrixError, match="header"):
        parse_base("2 2\n0 1\n")


def test_empty_rows_and_columns_rejected():
    with pytest.raises(BaseMatrixError, match="block-row"):
        BaseMatrix(np.array([[0, 1], [-1, -1]]), 4)
    with pytest.raises(BaseMatrixError, match="block-column"):
        BaseMatrix(np.array([[0, -1], [1, -1]]), 4)


def test_comments_are_ignored():
    base = parse_base("# header\n1 2 3  # rows cols Z\n0 2\n")
    assert base.shifts.tolist() == [[0, 2]]


def test_layer_order_must_be_permutation(small_code):
    with pytest.raises(BaseMatrixError):
        expand(small_code.base, layers=[0, 0, 1])
    code = expand(small_code.base, layers=[2, 0, 1])
    assert code.layers == (2, 0, 1)


def test_format_support(toy_code):
    lines = format_support(toy_code).splitlines()
    assert lines[0] == "8 12"
    assert len(lines) == 9
    assert lines[1].split()[0] == "3"
