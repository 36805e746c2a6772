"""Coherent-state scalars: Poisson statistics, Fock amplitudes and the mean field."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import DomainError

#: Default probability mass allowed to fall beyond a Poisson truncation.
EPS_TRUNC = 1e-12

_LOG_SPACE_ABOVE = 20


@dataclass(frozen=True)
class CoherentAmplitude:
    """Polar form of a coherent-state label alpha = magnitude * exp(i*phase)."""

    magnitude: float
    phase: float = 0.0

    def __post_init__(self):
        if not (self.magnitude >= 0 and math.isfinite(self.magnitude)):
            raise DomainError(f"magnitude must be finite and >= 0, got {self.magnitude}")

    @classmethod
    def from_mu(cls, mu: float, phase: float = 0.0) -> "CoherentAmplitude":
        if mu < 0:
            raise DomainError(f"mean photon number must be >= 0, got {mu}")
        return cls(math.sqrt(mu), phase)

    @property
    def mu(self) -> float:
        return self.magnitude**2

    @property
    def alpha(self) -> complex:
        return self.magnitude * complex(math.cos(self.phase), math.sin(self.phase))


@dataclass(frozen=True)
class PhotonDistribution:
    """Tabulated Poisson photon-number distribution truncated at ``n_max``."""

    mean: float
    pmf: tuple

    @classmethod
    def poisson(cls, mean: float, eps: float = EPS_TRUNC) -> "PhotonDistribution":
        n_max = truncation_level(mean, eps)
        return cls(mean, tuple(poisson_pmf(mean, n) for n in range(n_max + 1)))

    @property
    def n_max(self) -> int:
        return len(self.pmf) - 1

    @property
    def tail(self) -> float:
        """Probability mass beyond ``n_max``."""
        return max(0.0, 1.0 - math.fsum(self.pmf))


@dataclass(frozen=True)
class FieldScale:
    """Single-photon field amplitude and the collapsed ``omega*t - k.r`` argument."""

    single_photon_amplitude: float = 1.0
    space_time_phase: float = 0.0

    def __post_init__(self):
        if not self.single_photon_amplitude > 0:
            raise DomainError("single_photon_amplitude must be > 0")


def poisson_pmf(mu: float, n: int) -> float:
    """Return ``exp(-mu) mu**n / n!``; log-space evaluation above n = 20."""
    if mu < 0 or n < 0:
        raise DomainError(f"poisson_pmf needs mu >= 0 and n >= 0, got mu={mu}, n={n}")
    n = int(n)
    if mu == 0:
        return 1.0 if n == 0 else 0.0
    if n > _LOG_SPACE_ABOVE:
        return math.exp(-mu + n * math.log(mu) - math.lgamma(n + 1))
    return math.exp(-mu) * mu**n / math.factorial(n)


def poisson_table(mu: float, n_max: int) -> np.ndarray:
    """Vector of ``poisson_pmf(mu, n)`` for n = 0..n_max."""
    return np.array([poisson_pmf(mu, n) for n in range(n_max + 1)])


def coherent_fock_amplitudes(alpha: CoherentAmplitude, n_max: int) -> np.ndarray:
    """Fock-basis amplitudes ``exp(-|a|^2/2) a**n / sqrt(n!)`` for n = 0..n_max."""
    if n_max < 0:
        raise DomainError("n_max must be >= 0")
    n = np.arange(n_max + 1)
    mags = np.sqrt(poisson_table(alpha.mu, n_max))
    return mags * np.exp(1j * alpha.phase * n)


def mean_field(alpha: CoherentAmplitude, scale: FieldScale = FieldScale()) -> float:
    """Expectation of the quantized field in a coherent state."""
    return (
        2.0
        * alpha.magnitude
        * scale.single_photon_amplitude
        * math.sin(scale.space_time_phase - alpha.phase)
    )


def quantum_classical_ratio(mu: float) -> float:
    """Field uncertainty over mean-field amplitude, ``1/sqrt(mu)``."""
    if not mu > 0:
        raise DomainError(f"ratio diverges for mu <= 0 (got {mu})")
    return 1.0 / math.sqrt(mu)


def number_stddev(mu: float) -> float:
    if mu < 0:
        raise DomainError("mu must be >= 0")
    return math.sqrt(mu)


def truncation_level(mu: float, eps: float = EPS_TRUNC) -> int:
    """Smallest n_max whose cumulative Poisson mass reaches ``1 - eps``."""
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    if mu < 0:
        raise DomainError("mu must be >= 0")
    n = 0
    cdf = poisson_pmf(mu, 0)
    while True:
        tail = 1.0 - cdf
        if tail < 1e-8:
            # 1 - cdf has no digits left down here; sum the tail directly
            tail = poisson_tail(mu, n)
        if tail <= eps:
            return n
        n += 1
        cdf += poisson_pmf(mu, n)


def poisson_tail(mu: float, n: int) -> float:
    """``P(N > n)`` for N ~ Poisson(mu), summed term by term."""
    total = 0.0
    k = n + 1
    term = poisson_pmf(mu, k)
    while term > 0 and (k <= mu or term > total * 1e-17):
        total += term
        k += 1
        term = poisson_pmf(mu, k)
    return total
