import io

import numpy as np
import pytest

from qcldpc_cvqkd.erasure import EraseConfig
from qcldpc_cvqkd.experiment import (FIXTURES, SweepConfig, fer_sweep, fixed_arithmetic,
                                     read_sweep_csv, run_point, snr_grid, sweep_csv,
                                     wilson_interval)
from qcldpc_cvqkd.qc_code import stats


def test_fixtures_match_their_parameters():
    for name, fx in FIXTURES.items():
        code = fx.code()
        assert code.Z % fx.p == 0 and (code.Z // fx.p) % 2 == 0, name
    st_ = stats(FIXTURES["rate0.2"].code())
    assert (st_["n"], st_["m"]) == (8000, 6400)
    assert stats(FIXTURES["rate0.1"].code())["n"] == 9600


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.4038, abs=1e-4) and hi == pytest.approx(0.5962, abs=1e-4)
    assert wilson_interval(0, 10)[0] == 0.0


def test_snr_grid():
    assert snr_grid(0.355, 0.36, 0.001) == (0.355, 0.356, 0.357, 0.358, 0.359, 0.36)


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(snrs=())
    with pytest.raises(ValueError):
        SweepConfig(snrs=(0.3, 0.2))
    with pytest.raises(ValueError):
        SweepConfig(snrs=(0.3,), frames=0)


def test_sweep_is_independent_of_batching_and_workers(rate02_code):
    base = dict(snrs=(0.37,), frames=12, seed=4, arithmetic=fixed_arithmetic(FIXTURES["rate0.2"].fmt),
                erase=EraseConfig(40))
    a = run_point(rate02_code, 0.37, SweepConfig(batch=12, **base))
    b = run_point(rate02_code, 0.37, SweepConfig(batch=5, **base))
    c = run_point(rate02_code, 0.37, SweepConfig(batch=4, workers=2, **base))
    for other in (b, c):
        assert np.array_equal(a.fail_raw, other.fail_raw)
        assert np.array_equal(a.fail_erased, other.fail_erased)
        assert a.n_err == other.n_err


def test_erase_never_hurts(rate02_code):
    cfg = SweepConfig(snrs=(0.37, 0.38), frames=20, seed=1,
                      arithmetic=fixed_arithmetic(FIXTURES["rate0.2"].fmt), erase=EraseConfig(40))
    for pt in fer_sweep(rate02_code, cfg):
        assert not np.any(pt.fail_erased & ~pt.fail_raw)
        assert pt.failures_after_erase <= pt.failures_raw


def test_csv_roundtrip(rate02_code):
    cfg = SweepConfig(snrs=(0.36, 0.39), frames=6, seed=2)
    pts = fer_sweep(rate02_code, cfg)
    text = sweep_csv(pts)
    assert text.startswith("# schema: fer-sweep/1\n")
    back = read_sweep_csv(io.StringIO(text))
    assert [(p.snr, p.failures_raw, p.failures_after_erase) for p in back] == \
        [(p.snr, p.failures_raw, p.failures_after_erase) for p in pts]
    with pytest.raises(ValueError, match="lacks columns"):
        read_sweep_csv(io.StringIO("snr,frames\n0.3,1\n"))
    with pytest.raises(ValueError, match="no data"):
        read_sweep_csv(io.StringIO("# schema: fer-sweep/1\n"))
