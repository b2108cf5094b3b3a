import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reclasso_arx.arx import (
    SeriesSet,
    _ic,
    build_lag_design,
    fit_ols,
    ic_lag_select,
    ic_score,
    random_walk_forecast,
    sample_mean_forecast,
)
from reclasso_arx.errors import RankDeficient, SeriesTooShort
from reclasso_arx.solver import LassoProblem, coordinate_descent


def test_pure_ar_design():
    d = build_lag_design(SeriesSet(y=[1, 2, 3, 4]), 2, 0)
    np.testing.assert_array_equal(d.y, [3, 4])
    np.testing.assert_array_equal(d.Z, [[2, 1], [3, 2]])
    assert d.first_index == 3
    assert d.last_index == 4


def test_arx_design():
    d = build_lag_design(SeriesSet(y=[1, 2, 3], x=[[10, 20, 30]]), 1, 1)
    np.testing.assert_array_equal(d.y, [2, 3])
    np.testing.assert_array_equal(d.Z, [[1, 10], [2, 20]])


def test_design_width_for_simulation_size():
    rng = np.random.default_rng(0)
    s = SeriesSet(y=rng.standard_normal(250), x=rng.standard_normal((10, 250)))
    d = build_lag_design(s, 12, 12)
    # p + k*s columns; no intercept and no contemporaneous exogenous terms
    assert d.n_features == 12 + 10 * 12
    assert d.Z.shape[0] == 250 - 13 + 1
    assert d.column_names()[:2] == ["y.L1", "y.L2"]
    assert d.column_names()[12] == "x1.L1"


def test_design_too_short():
    with pytest.raises(SeriesTooShort):
        build_lag_design(SeriesSet(y=[1.0, 2.0, 3.0]), 2, 0)
    with pytest.raises(ValueError):
        build_lag_design(SeriesSet(y=[1.0, 2.0, 3.0]), 0, 0)


def test_design_width_for_application_size():
    # three targets plus 86 related series: each target sees 88 exogenous
    rng = np.random.default_rng(1)
    s = SeriesSet(y=rng.standard_normal(40), x=rng.standard_normal((88, 40)))
    assert build_lag_design(s, 12, 12).n_features == 1068


def test_design_start_override():
    s = SeriesSet(y=np.arange(10.0))
    d = build_lag_design(s, 1, 0, start=4)
    assert d.first_index == 4
    assert d.y[0] == 3.0
    with pytest.raises(ValueError):
        build_lag_design(s, 2, 0, start=2)


def test_row_lookup_and_through():
    d = build_lag_design(SeriesSet(y=np.arange(1.0, 11.0)), 2, 0)
    assert d.row(3) == 0
    with pytest.raises(IndexError):
        d.row(2)
    Z, y = d.through(5)
    assert y.tolist() == [3.0, 4.0, 5.0]


@given(st.integers(0, 2**32 - 1), st.integers(0, 4), st.integers(0, 4), st.integers(0, 3))
def test_rows_are_hand_shifted_values(seed, p, s, k):
    if p + k * s == 0:
        return
    rng = np.random.default_rng(seed)
    T = 20
    series = SeriesSet(y=rng.standard_normal(T), x=rng.standard_normal((k, T)))
    d = build_lag_design(series, p, s)
    for t in range(d.first_index, T + 1):
        row = d.Z[d.row(t)]
        # y_t is y[t-1]; lag j of time t is y_{t-j}
        expect = [series.y[t - j - 1] for j in range(1, p + 1)]
        for i in range(k):
            expect += [series.x[i, t - j - 1] for j in range(1, s + 1)]
        np.testing.assert_array_equal(row, expect)
        assert d.y[d.row(t)] == series.y[t - 1]


def test_series_validation():
    with pytest.raises(ValueError):
        SeriesSet(y=[1.0, 2.0], x=[[1.0, 2.0, 3.0]])
    with pytest.raises(ValueError):
        SeriesSet(y=[1.0, np.inf])
    assert SeriesSet(y=[1.0, 2.0], x=[[1.0, 2.0]]).labels == ["y", "x1"]


# --- OLS ---------------------------------------------------------------------------

def test_ols_exactly_determined():
    d = build_lag_design(SeriesSet(y=[1, 2, 3, 4]), 2, 0)
    # [[2,1],[3,2]] phi = [3,4] -> phi = (2, -1)
    np.testing.assert_allclose(fit_ols(d), [2.0, -1.0], atol=1e-12)


def test_ols_noiseless_recovery():
    rng = np.random.default_rng(3)
    Z = rng.standard_normal((50, 6))
    phi = rng.standard_normal(6)
    np.testing.assert_allclose(fit_ols((Z, Z @ phi)), phi, atol=1e-8)


def test_ols_agrees_with_unpenalized_cd():
    rng = np.random.default_rng(4)
    Z = rng.standard_normal((40, 5))
    y = rng.standard_normal(40)
    cd = coordinate_descent(LassoProblem(Z, y, 0.0), tol=1e-13).phi
    phi = fit_ols((Z, y))
    np.testing.assert_allclose(cd, phi, atol=1e-6)
    assert np.max(np.abs(Z.T @ (y - Z @ phi))) <= 1e-6 * np.max(np.abs(Z.T @ y))


def test_ols_rank_deficient():
    Z = np.ones((5, 2))
    with pytest.raises(RankDeficient):
        fit_ols((Z, np.arange(5.0)))
    with pytest.raises(RankDeficient):
        fit_ols((np.ones((1, 2)), np.ones(1)))


# --- information criteria -------------------------------------------------------------

def test_ic_formulas():
    assert _ic(1.0, 2, 100, "aic") == pytest.approx(0.04)
    assert _ic(1.0, 2, 100, "bic") == pytest.approx(math.log(100) * 2 / 100)
    assert _ic(1.0, 2, 100, "bic") == pytest.approx(0.0921, abs=1e-4)
    with pytest.raises(ValueError):
        _ic(1.0, 2, 100, "hqic")


def test_ic_score_uses_mean_squared_residual():
    rng = np.random.default_rng(5)
    s = SeriesSet(y=rng.standard_normal(60))
    d = build_lag_design(s, 2, 0)
    resid = d.y - d.Z @ fit_ols(d)
    sigma = np.mean(resid ** 2)
    assert ic_score(d, "aic") == pytest.approx(math.log(sigma) + 4 / 60)


def _ar1(rng, T, phi=0.8):
    y = np.zeros(T + 100)
    e = rng.standard_normal(T + 100)
    for t in range(1, T + 100):
        y[t] = phi * y[t - 1] + e[t]
    return y[100:]


def test_bic_recovers_ar1_order():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        s = SeriesSet(y=_ar1(rng, 200))
        hits += ic_lag_select(s, 4, 0, "bic") == (1, 0)
    assert hits >= 90


def test_bic_more_parsimonious_than_aic():
    ok = 0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        y = _ar1(rng, 120, 0.5)
        x = rng.standard_normal((2, 120))
        s = SeriesSet(y=y, x=x)
        pa, sa = ic_lag_select(s, 4, 3, "aic")
        pb, sb = ic_lag_select(s, 4, 3, "bic")
        ok += pb + 2 * sb <= pa + 2 * sa
    assert ok >= 95


def test_white_noise_prefers_small_models():
    small = 0
    for seed in range(30):
        rng = np.random.default_rng(2000 + seed)
        s = SeriesSet(y=rng.standard_normal(150), x=rng.standard_normal((1, 150)))
        p, q = ic_lag_select(s, 3, 3, "bic")
        small += p + q == 1
    assert small > 15


def test_single_candidate_grid():
    rng = np.random.default_rng(6)
    s = SeriesSet(y=rng.standard_normal(50), x=rng.standard_normal((1, 50)))
    assert ic_lag_select(s, 3, 3, "aic", candidates=[(1, 1)]) == (1, 1)


def test_ic_lag_select_too_short():
    with pytest.raises(SeriesTooShort):
        ic_lag_select(SeriesSet(y=np.arange(4.0)), 4, 0)


# --- naive forecasts ----------------------------------------------------------------

def test_naive_forecasts():
    assert sample_mean_forecast([1, 2, 3]) == 2.0
    assert sample_mean_forecast([7.5] * 9) == 7.5
    assert random_walk_forecast([1, 2, 3]) == 3.0
    assert random_walk_forecast([5]) == 5.0
    with pytest.raises(ValueError):
        sample_mean_forecast([])
    with pytest.raises(ValueError):
        random_walk_forecast([])


def test_sample_mean_against_compensated_sum():
    rng = np.random.default_rng(7)
    y = rng.standard_normal(100) * 1e3
    assert sample_mean_forecast(y) == pytest.approx(math.fsum(y) / 100, abs=1e-12)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_random_walk_is_last_element(values):
    assert random_walk_forecast(values) == values[-1]
