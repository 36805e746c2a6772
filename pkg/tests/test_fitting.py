import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prwcs.fitting import FitError, fit_cosine, fit_cosine_arrays
from prwcs.tables import ResultTable

GRID = np.radians(np.arange(0.0, 360.0 + 1e-9, 22.5))


def model(phi, a, v, phi0, b, l=1):
    return a * (1 + v * np.cos(2 * l * (phi - phi0))) / 2 + b


@pytest.mark.parametrize("l", [1, 2, 3])
def test_exact_curve_recovered(l):
    y = model(GRID, 1000.0, 1.0, 0.0, 0.0, l)
    fit = fit_cosine_arrays(GRID, y, l=l)
    assert fit.visibility >= 0.999
    assert fit.amplitude == pytest.approx(1000.0, rel=1e-10)
    assert abs(fit.phase_offset) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.floats(10, 1e4), st.floats(0.05, 1.0), st.floats(-0.7, 0.7), st.floats(0, 200))
def test_generating_parameters_recovered(a, v, phi0, b):
    y = model(GRID, a, v, phi0, b)
    fit = fit_cosine_arrays(GRID, y, baseline=b)
    assert fit.amplitude == pytest.approx(a, rel=1e-4)
    assert fit.visibility == pytest.approx(v, rel=1e-4)
    d = (fit.phase_offset - phi0 + math.pi / 2) % math.pi - math.pi / 2
    assert abs(d) < 1e-6


def test_visibility_is_max_min_ratio():
    fit = fit_cosine_arrays(GRID, model(GRID, 100.0, 0.6, 0.2, 0.0))
    assert fit.visibility == pytest.approx((fit.maximum - fit.minimum) / (fit.maximum + fit.minimum), rel=1e-12)


def test_constant_input_has_zero_visibility():
    fit = fit_cosine_arrays(GRID, np.full(GRID.shape, 50.0), yerr=np.full(GRID.shape, 7.0))
    assert abs(fit.visibility) < 1e-12
    assert abs(fit.visibility) <= 3 * fit.visibility_err


def test_noisy_fit_errors_are_calibrated():
    rng = np.random.default_rng(0)
    truth = model(GRID, 8000.0, 0.98, 0.0, 0.0)
    pulls = []
    for _ in range(200):
        y = rng.normal(truth, np.sqrt(truth + 10))
        fit = fit_cosine_arrays(GRID, y, np.sqrt(truth + 10))
        pulls.append((fit.visibility - 0.98) / fit.visibility_err)
    assert abs(np.mean(pulls)) < 0.3 and 0.8 < np.std(pulls) < 1.2


def test_baseline_error_propagates():
    y = model(GRID, 100.0, 0.9, 0.0, 10.0)
    a = fit_cosine_arrays(GRID, y, np.ones_like(y), baseline=10.0)
    b = fit_cosine_arrays(GRID, y, np.ones_like(y), baseline=10.0, baseline_err=5.0)
    assert b.errors[1] > a.errors[1] and b.errors[3] == 5.0
    assert b.covariance.shape == (4, 4)


def test_covariance_symmetric_psd():
    rng = np.random.default_rng(3)
    y = model(GRID, 500.0, 0.7, 0.1, 0.0) + rng.normal(0, 5, GRID.shape)
    cov = fit_cosine_arrays(GRID, y).covariance
    np.testing.assert_allclose(cov, cov.T, atol=1e-12)
    assert np.linalg.eigvalsh(cov).min() > -1e-9


def test_fit_is_deterministic():
    y = model(GRID, 500.0, 0.7, 0.1, 0.0) + np.linspace(-3, 3, len(GRID))
    f1, f2 = fit_cosine_arrays(GRID, y), fit_cosine_arrays(GRID, y)
    assert f1.to_dict() == f2.to_dict()


@pytest.mark.parametrize(
    "phi, y",
    [
        (np.zeros(10), np.arange(10.0)),
        (GRID[:5], np.ones(5)),
        (GRID, np.ones(3)),
    ],
)
def test_bad_inputs(phi, y):
    with pytest.raises(FitError):
        fit_cosine_arrays(phi, y)


def test_fit_from_table():
    deg = np.degrees(GRID)
    y = model(GRID, 100.0, 1.0, 0.0, 0.0)
    table = ResultTable(("phi_deg", "absolute_cc", "stderr"), list(zip(deg, y, np.sqrt(y + 1))))
    fit = fit_cosine(table, l=1)
    assert fit.visibility == pytest.approx(1.0, abs=1e-9)
    assert fit.curve(0.0) == pytest.approx(100.0)
    d = fit.to_dict()
    assert set(d) >= {"amplitude", "visibility_err", "covariance", "reduced_chi_square"}
