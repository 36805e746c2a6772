"""Phase randomization of a coherent state: analytic mixture and Monte Carlo average.

Random streams use numpy's counter-based Philox generator keyed by a
``SeedSequence`` built from ``(seed, stream, shard)``; a shard's draws depend
only on that key, so results do not change with the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import DomainError
from .quasiclassical import CoherentAmplitude, coherent_fock_amplitudes, poisson_table

TWO_PI = 2.0 * math.pi

#: Draws per Monte Carlo shard.  Fixed so the shard layout is independent of workers.
SHARD_SIZE = 1 << 18


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator for the stream identified by ``(seed, *stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def sample_phase(rng: np.random.Generator, size=None):
    """Uniform phase on ``[0, 2*pi)``."""
    theta = rng.random(size) * TWO_PI
    # rounding of (1 - 2**-53) * 2pi can land on 2pi exactly
    return np.where(theta >= TWO_PI, 0.0, theta) if size is not None else (0.0 if theta >= TWO_PI else theta)


@dataclass(frozen=True)
class SmallDensity:
    """Dense density matrix in a truncated single-mode Fock basis."""

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return self.entries.diagonal().real.copy()

    def trace(self) -> float:
        return float(self.entries.trace().real)

    def max_offdiagonal(self) -> float:
        off = self.entries - np.diag(self.entries.diagonal())
        return float(np.abs(off).max()) if self.dim > 1 else 0.0

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.abs(self.entries - self.entries.conj().T).max() <= tol)

    def is_psd(self, tol: float = 1e-12) -> bool:
        return bool(np.linalg.eigvalsh(self.entries).min() >= -tol)


def randomized_density_analytic(mu: float, n_max: int) -> SmallDensity:
    """Diagonal Poisson mixture obtained by averaging the coherent projector over phase."""
    if n_max < 0:
        raise DomainError("n_max must be >= 0")
    return SmallDensity(np.diag(poisson_table(mu, n_max)).astype(complex))


def _phase_moments(seed: int, shard: int, count: int, n_max: int) -> np.ndarray:
    """Sum over ``count`` draws of ``exp(i k theta)`` for k = 0..n_max."""
    theta = sample_phase(rng_for(seed, 0, shard), count)
    k = np.arange(n_max + 1)
    return np.exp(1j * np.outer(theta, k)).sum(axis=0)


def randomized_density_mc(
    mu: float, n_max: int, samples: int, seed: int, workers: int = 1
) -> SmallDensity:
    """Average of ``|sqrt(mu) e^{i theta}><...|`` over ``samples`` uniform phases.

    Entry (m, n) of the projector is ``c_m c_n exp(i (m - n) theta)`` with real
    Poisson amplitudes ``c``, so only the phase moments need to be accumulated.
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    if n_max < 0:
        raise DomainError("n_max must be >= 0")
    counts = [SHARD_SIZE] * (samples // SHARD_SIZE)
    if samples % SHARD_SIZE:
        counts.append(samples % SHARD_SIZE)
    jobs = [(seed, i, c, n_max) for i, c in enumerate(counts)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda j: _phase_moments(*j), jobs))
    else:
        parts = [_phase_moments(*j) for j in jobs]
    moments = np.sum(parts, axis=0) / samples
    c = np.abs(coherent_fock_amplitudes(CoherentAmplitude.from_mu(mu), n_max))
    diff = np.subtract.outer(np.arange(n_max + 1), np.arange(n_max + 1))
    phase = np.where(diff >= 0, moments[np.abs(diff)], moments[np.abs(diff)].conj())
    rho = np.outer(c, c) * phase
    np.fill_diagonal(rho, c**2)
    return SmallDensity(rho)


def coherent_projector(mu: float, theta: float, n_max: int) -> SmallDensity:
    """Truncated pure coherent-state projector."""
    v = coherent_fock_amplitudes(CoherentAmplitude.from_mu(mu, theta), n_max)
    return SmallDensity(np.outer(v, v.conj()))


def phase_of_sample(seed: int, index: int = 0) -> float:
    """The ``index``-th phase drawn by :func:`randomized_density_mc` for ``seed``."""
    shard, offset = divmod(index, SHARD_SIZE)
    return float(sample_phase(rng_for(seed, 0, shard), offset + 1)[offset])
