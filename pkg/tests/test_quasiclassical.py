import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import poisson

from prwcs import DomainError
from prwcs.quasiclassical import (
    CoherentAmplitude,
    FieldScale,
    PhotonDistribution,
    coherent_fock_amplitudes,
    mean_field,
    number_stddev,
    poisson_pmf,
    poisson_tail,
    poisson_table,
    quantum_classical_ratio,
    truncation_level,
)


@pytest.mark.parametrize(
    "mu, n, expected",
    [
        (0.0, 0, 1.0),
        (0.0, 3, 0.0),
        (0.03, 0, math.exp(-0.03)),
        (0.03, 2, math.exp(-0.03) * 0.03**2 / 2),
        (1.0, 1, math.exp(-1.0)),
    ],
)
def test_poisson_pmf_values(mu, n, expected):
    assert poisson_pmf(mu, n) == pytest.approx(expected, rel=1e-14, abs=0)


@given(st.floats(1e-6, 50.0), st.integers(0, 120))
def test_poisson_pmf_matches_scipy(mu, n):
    assert poisson_pmf(mu, n) == pytest.approx(poisson.pmf(n, mu), rel=1e-10, abs=1e-300)


def test_poisson_pmf_large_n_is_finite():
    # naive mu**n / n! overflows here
    p = poisson_pmf(200.0, 200)
    assert p == pytest.approx(poisson.pmf(200, 200.0), rel=1e-10)


@pytest.mark.parametrize("mu, n", [(-0.1, 0), (0.1, -1)])
def test_poisson_pmf_domain(mu, n):
    with pytest.raises(DomainError):
        poisson_pmf(mu, n)


@given(st.floats(1e-4, 10.0))
def test_table_sums_to_one(mu):
    n = truncation_level(mu, 1e-13)
    assert math.fsum(poisson_table(mu, n)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("mu, eps", [(0.01, 1e-12), (0.1, 1e-12), (1.0, 1e-9), (5.0, 1e-15), (1e-3, 1e-18)])
def test_truncation_level_is_minimal(mu, eps):
    n = truncation_level(mu, eps)
    assert poisson.sf(n, mu) <= eps * (1 + 1e-6)
    if n > 0:
        assert poisson.sf(n - 1, mu) > eps


def test_poisson_tail_tiny_values():
    assert poisson_tail(0.001, 5) == pytest.approx(poisson.sf(5, 0.001), rel=1e-10)


def test_photon_distribution():
    d = PhotonDistribution.poisson(0.1, eps=1e-12)
    assert d.mean == 0.1
    assert d.tail <= 1e-12
    assert d.pmf[0] == pytest.approx(math.exp(-0.1))


@given(st.floats(1e-3, 4.0), st.floats(0, 2 * math.pi))
def test_coherent_amplitudes_norm_and_mean(mu, phase):
    a = CoherentAmplitude.from_mu(mu, phase)
    n = truncation_level(mu, 1e-14)
    c = coherent_fock_amplitudes(a, n)
    probs = np.abs(c) ** 2
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert (np.arange(n + 1) * probs).sum() == pytest.approx(mu, rel=1e-9)
    # annihilation eigenvalue: sqrt(n+1) c_{n+1} = alpha c_n
    np.testing.assert_allclose(np.sqrt(np.arange(1, n + 1)) * c[1:], a.alpha * c[:-1], atol=1e-12)


def test_mean_field_sine():
    a = CoherentAmplitude(2.0, 0.0)
    scale = FieldScale(0.5, math.pi / 2)
    assert mean_field(a, scale) == pytest.approx(2.0)
    assert mean_field(a, FieldScale(0.5, 0.0)) == pytest.approx(0.0)


@pytest.mark.parametrize("mu, ratio", [(1e-2, 10.0), (1e-4, 100.0), (1.0, 1.0), (0.25, 2.0)])
def test_quantum_classical_ratio(mu, ratio):
    assert quantum_classical_ratio(mu) == pytest.approx(ratio, rel=1e-15)


@pytest.mark.parametrize("mu", [0.0, -1.0])
def test_quantum_classical_ratio_domain(mu):
    with pytest.raises(DomainError):
        quantum_classical_ratio(mu)


@given(st.floats(1e-8, 1e4))
def test_ratio_is_stddev_over_mean(mu):
    assert quantum_classical_ratio(mu) == pytest.approx(number_stddev(mu) / mu, rel=1e-12)


def test_bad_amplitudes():
    with pytest.raises(DomainError):
        CoherentAmplitude(-1.0)
    with pytest.raises(DomainError):
        CoherentAmplitude.from_mu(-0.1)
    with pytest.raises(DomainError):
        FieldScale(0.0)
