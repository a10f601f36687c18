import numpy as np
import pytest

import hawkspec.crossval as crossval
from hawkspec.contrasts import ContrastKind, ml_nll, ols_contrast, sls_contrast, sp_distance, whittle_nll
from hawkspec.core import (
    CrossValidationFailure,
    DomainError,
    EstimationFailure,
    ObservationWindow,
    RngStream,
    pattern_from_times,
    thin,
)
from hawkspec.crossval import (
    CvGrid,
    block_loocv,
    cell_split,
    estimate,
    pthin_cv,
    select_cell,
    thinned_objectives,
)
from hawkspec.hawkes import simulate
from hawkspec.optimize import FeasibleRegion, default_starts, fit_objective, minimize
from hawkspec.spectral import PeriodogramKind, fourier_grid, periodogram, rescale_train

SMALL_GRID = CvGrid((0.5, 0.8), (2.0 ** -4, 1.0), 2)


@pytest.fixture
def pattern_50(true_params):
    return simulate(true_params, ObservationWindow(0.0, 50.0), rng=RngStream(17))


def test_cv_grid_validation():
    with pytest.raises(DomainError):
        CvGrid((0.0, 0.5))
    with pytest.raises(DomainError):
        CvGrid(kappa_values=(-1.0,))
    with pytest.raises(DomainError):
        CvGrid(n_thinnings=0)
    with pytest.raises(DomainError):
        CvGrid(p_values=())
    assert len(CvGrid().kappa_values) == 18
    assert CvGrid().kappa_values[0] == 2.0 ** -14


def test_select_cell_breaks_ties_towards_least_penalty_then_smallest_p():
    errors = np.ones((2, 3))
    assert select_cell(errors, (0.1, 1.0, 10.0), (0.3, 0.8)) == (0, 0)
    assert select_cell(errors, (1.0, 0.1, 10.0), (0.8, 0.3)) == (1, 1)
    errors[1, 2] = 0.5
    assert select_cell(errors, (0.1, 1.0, 10.0)) == (1, 2)


def test_select_cell_skips_failed_cells():
    errors = np.array([[np.nan, 2.0], [np.nan, np.nan]])
    assert select_cell(errors, (0.1, 1.0)) == (0, 1)
    with pytest.raises(CrossValidationFailure):
        select_cell(np.full((2, 2), np.nan), (0.1, 1.0))


def test_cell_split_is_shared_across_kappas(pattern_50):
    a = cell_split(pattern_50, 0.5, RngStream(1), j=3, ip=0)
    b = cell_split(pattern_50, 0.5, RngStream(1), j=3, ip=0)
    c = cell_split(pattern_50, 0.5, RngStream(1), j=4, ip=0)
    np.testing.assert_array_equal(a.retained.times, b.retained.times)
    assert not np.array_equal(a.retained.times, c.retained.times)


@pytest.mark.parametrize("kind", [ContrastKind.SLS, ContrastKind.SP])
def test_thinned_objectives_rescale_periodograms(kind, pattern_50):
    split = thin(pattern_50, 0.6, RngStream(2))
    train, test = thinned_objectives(kind, split, fourier_grid(50.0, 2.0), pattern_50.rate())
    assert train.pg.kind is PeriodogramKind.RESCALED_TRAIN
    assert test.pg.kind is PeriodogramKind.RESCALED_TEST
    assert train.m_hat == test.m_hat == pattern_50.rate()


def test_whittle_thinned_objectives_stay_raw(pattern_50):
    split = thin(pattern_50, 0.6, RngStream(2))
    train, test = thinned_objectives(ContrastKind.SL, split, fourier_grid(50.0, 2.0), pattern_50.rate())
    assert train.pg.kind is PeriodogramKind.RAW
    assert train.thinning_scale == 0.6
    assert test.thinning_scale == pytest.approx(0.4)


def test_pthin_cv_report_shapes_and_selection(pattern_50):
    grid = fourier_grid(50.0, 2.0)
    report = pthin_cv(pattern_50, ContrastKind.SLS, SMALL_GRID, grid, RngStream(5))
    assert report.errors.shape == (2, 2, 2)
    assert report.estimates.shape == (2, 2, 2, 3)
    assert report.selected_p in SMALL_GRID.p_values
    assert report.selected_kappa in SMALL_GRID.kappa_values
    means = report.mean_errors
    assert means[report.selected] == np.nanmin(means)
    np.testing.assert_allclose(report.final_estimate, report.per_thinning_estimates.mean(axis=0))
    mu, alpha, _ = report.final_estimate
    assert 0 < alpha < 1 and mu > 0


def test_pthin_cv_is_reproducible(pattern_50):
    grid = fourier_grid(50.0, 2.0)
    a = pthin_cv(pattern_50, ContrastKind.SL, SMALL_GRID, grid, RngStream(5))
    b = pthin_cv(pattern_50, ContrastKind.SL, SMALL_GRID, grid, RngStream(5))
    np.testing.assert_array_equal(a.errors, b.errors)
    np.testing.assert_array_equal(a.final_estimate, b.final_estimate)
    assert a.selected == b.selected


def test_fixed_p_cross_validation(pattern_50):
    report = pthin_cv(pattern_50, ContrastKind.SP, CvGrid((0.7,), (0.01, 1.0), 2), fourier_grid(50.0, 2.0),
                      RngStream(0))
    assert report.selected_p == 0.7


def test_pthin_cv_rejects_temporal_and_empty(pattern_50):
    grid = fourier_grid(50.0, 2.0)
    with pytest.raises(DomainError):
        pthin_cv(pattern_50, ContrastKind.ML, SMALL_GRID, grid, RngStream(0))
    with pytest.raises(EstimationFailure):
        pthin_cv(pattern_from_times([], end=50.0), ContrastKind.SLS, SMALL_GRID, grid, RngStream(0))


@pytest.mark.parametrize("kind", [ContrastKind.ML, ContrastKind.OLS, ContrastKind.SLS])
def test_block_loocv(kind, pattern_50):
    grid = fourier_grid(50.0, 2.0) if kind.is_spectral else None
    report = block_loocv(pattern_50, kind, (0.0, 0.5), 4, grid, RngStream(3))
    assert report.errors.shape == (1, 2, 4)
    assert report.selected_p is None
    assert report.selected_kappa in (0.0, 0.5)
    assert np.all(np.isfinite(report.final_estimate))


def test_block_loocv_input_checks(pattern_50):
    with pytest.raises(DomainError):
        block_loocv(pattern_50, ContrastKind.ML, (), 4, None, RngStream(0))
    with pytest.raises(DomainError):
        block_loocv(pattern_50, ContrastKind.ML, (0.1,), 1, None, RngStream(0))
    with pytest.raises(DomainError):
        block_loocv(pattern_50, ContrastKind.SLS, (0.1,), 4, None, RngStream(0))


SPECTRAL_CONTRASTS = {ContrastKind.SLS: sls_contrast, ContrastKind.SP: sp_distance, ContrastKind.SL: whittle_nll}
TEMPORAL_CONTRASTS = {ContrastKind.OLS: ols_contrast, ContrastKind.ML: ml_nll}


def plain_fit(kind, pattern, grid):
    """Unpenalised fit straight from the contrast function, as (mu, alpha, beta)."""
    m_hat = pattern.rate()
    if kind.is_spectral:
        pg = periodogram(pattern, grid, m_hat)
        region = FeasibleRegion.default()
        result = minimize(lambda th: SPECTRAL_CONTRASTS[kind](pg, grid, m_hat, th), region, default_starts(region))
        alpha, beta = result.theta_hat
        return np.array([m_hat * (1.0 - alpha), alpha, beta])
    region = FeasibleRegion.default(free_mu=True)
    result = minimize(lambda th: TEMPORAL_CONTRASTS[kind](pattern, th), region, default_starts(region, m_hat))
    return result.theta_hat


@pytest.mark.parametrize("kind", list(ContrastKind))
def test_zero_ridge_loocv_refits_the_plain_estimator(kind, true_params):
    grid = fourier_grid(100.0, 2.0)
    for i in range(10):
        pattern = simulate(true_params, ObservationWindow(0.0, 100.0), rng=RngStream(30).derive(i))
        report = block_loocv(pattern, kind, (0.0,), 4, grid, RngStream(i))
        assert report.selected_kappa == 0.0
        np.testing.assert_allclose(report.final_estimate, plain_fit(kind, pattern, grid), rtol=0, atol=1e-6)


@pytest.mark.parametrize("kind", [ContrastKind.SLS, ContrastKind.SP, ContrastKind.SL])
def test_zero_ridge_thinning_fits_match_direct_minimisation(kind, pattern_50):
    grid = fourier_grid(50.0, 2.0)
    rng = RngStream(12)
    m_hat = pattern_50.rate()
    report = pthin_cv(pattern_50, kind, CvGrid((0.7,), (0.0,), 3), grid, rng)
    region = FeasibleRegion.default()
    direct = []
    for j in range(3):
        train, _ = thinned_objectives(kind, cell_split(pattern_50, 0.7, rng, j, 0), grid, m_hat)
        alpha, beta = minimize(train.contrast, region, default_starts(region)).theta_hat
        direct.append([m_hat * (1.0 - alpha), alpha, beta])
    assert report.valid.all()
    np.testing.assert_allclose(report.estimates[0, 0], direct, rtol=0, atol=1e-6)
    np.testing.assert_allclose(report.final_estimate, np.mean(direct, axis=0), rtol=0, atol=1e-6)


def test_single_cell_grid_reports_its_only_fit(pattern_50):
    grid = fourier_grid(50.0, 2.0)
    rng = RngStream(9)
    report = pthin_cv(pattern_50, ContrastKind.SLS, CvGrid((0.6,), (0.25,), 1), grid, rng)
    assert report.selected == (0, 0)
    np.testing.assert_array_equal(report.final_estimate, report.estimates[0, 0, 0])
    train, _ = thinned_objectives(ContrastKind.SLS, cell_split(pattern_50, 0.6, rng, 0, 0), grid, pattern_50.rate())
    refit = fit_objective(train.with_kappa(0.25), rng.derive("fit", 0, 0, 0))
    np.testing.assert_allclose(report.final_estimate, train.full_theta(refit.theta_hat), rtol=0, atol=1e-12)


def test_block_loocv_trains_on_three_quarters(pattern_100, monkeypatch):
    seen = []
    original = crossval._block_objective

    def recording(method, pattern, half_width):
        seen.append(pattern)
        return original(method, pattern, half_width)

    monkeypatch.setattr(crossval, "_block_objective", recording)
    block_loocv(pattern_100, ContrastKind.SLS, (0.0,), 4, fourier_grid(100.0, 2.0), RngStream(0))
    trains, tests = seen[0::2], seen[1::2]
    assert len(trains) == len(tests) == 4
    assert [p.window.length() for p in trains] == pytest.approx([75.0] * 4)
    assert [p.window.length() for p in tests] == pytest.approx([25.0] * 4)
    for train, test in zip(trains, tests):
        assert train.window.start == test.window.start == 0.0
        assert train.count() + test.count() == pattern_100.count()


def test_thinned_train_and_test_come_from_disjoint_events(pattern_50):
    grid = fourier_grid(50.0, 2.0)
    m_hat = pattern_50.rate()
    for j in range(5):
        split = cell_split(pattern_50, 0.5, RngStream(4), j, 0)
        retained, rejected = split.retained.times, split.rejected.times
        assert np.intersect1d(retained, rejected).size == 0
        np.testing.assert_array_equal(np.sort(np.concatenate([retained, rejected])), pattern_50.times)
        train, _ = thinned_objectives(ContrastKind.SLS, split, grid, m_hat)
        expected = rescale_train(periodogram(split.retained, grid, 0.5 * m_hat), 0.5, m_hat)
        np.testing.assert_array_equal(train.pg.values, expected.values)


def test_unpenalised_sls_and_sp_share_their_minimiser(true_params):
    grid = fourier_grid(100.0, 2.0)
    for i in range(20):
        pattern = simulate(true_params, ObservationWindow(0.0, 100.0), rng=RngStream(40).derive(i))
        sls = estimate(pattern, ContrastKind.SLS, 0.0, grid, RngStream(0)).theta
        sp = estimate(pattern, ContrastKind.SP, 0.0, grid, RngStream(0)).theta
        np.testing.assert_allclose(sls, sp, rtol=0, atol=1e-3)
