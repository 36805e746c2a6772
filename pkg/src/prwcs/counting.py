"""Detector timelines, coincidence counting and the three-run subtraction.

Two routes to the same coincidence statistics:

* :func:`simulate_timeline` samples one uniform relative phase per
  coherence-time bin, propagates the coherent amplitudes classically and
  draws clicks;
* :func:`analytic_rates` sums Fock-path probabilities over the diagonal
  Poisson mixture of input photon numbers.

A detector registers at most one click per bin (non-number-resolving).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterator, NamedTuple, Optional

import numba
import numpy as np
from scipy.optimize import brentq
from scipy.special import comb

from . import ConfigError, DomainError
from .interferometer import (
    CircuitConfig,
    conditional_probability,
    detector_mean_bounds,
    detector_means,
    monitored_count_distribution,
    source_state,
)
from .quasiclassical import poisson_table, truncation_level
from .randomization import rng_for, sample_phase

#: Bins per simulation shard; fixed so results do not depend on worker count.
SHARD_BINS = 1 << 22

DEFAULT_EFFICIENCY = 0.6
DEFAULT_DARK_RATE = 100.0


@dataclass(frozen=True)
class SourceConfig:
    mu_a: float = 0.01
    mu_b: float = 0.01
    coherence_time: float = 1e-9
    duration: float = 1e-3
    seed: int = 0

    def validate(self) -> "SourceConfig":
        bad = [n for n in ("mu_a", "mu_b") if not (math.isfinite(getattr(self, n)) and getattr(self, n) >= 0)]
        bad += [n for n in ("coherence_time", "duration") if not (math.isfinite(getattr(self, n)) and getattr(self, n) > 0)]
        if bad:
            raise ConfigError(f"invalid source configuration: {', '.join(bad)}", bad)
        return self

    @property
    def bins(self) -> int:
        return int(round(self.duration / self.coherence_time))

    def replace(self, **changes) -> "SourceConfig":
        d = asdict(self)
        d.update(changes)
        return SourceConfig(**d)


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float = DEFAULT_EFFICIENCY
    dark_rate: float = DEFAULT_DARK_RATE
    dead_time: float = 0.0
    window: float = 10e-9

    def validate(self) -> "DetectorConfig":
        bad = []
        if not 0.0 <= self.efficiency <= 1.0:
            bad.append("efficiency")
        if not (math.isfinite(self.dark_rate) and self.dark_rate >= 0):
            bad.append("dark_rate")
        if not (math.isfinite(self.dead_time) and self.dead_time >= 0):
            bad.append("dead_time")
        if not (math.isfinite(self.window) and self.window > 0):
            bad.append("window")
        if bad:
            raise ConfigError(f"invalid detector configuration: {', '.join(bad)}", bad)
        return self

    def replace(self, **changes) -> "DetectorConfig":
        d = asdict(self)
        d.update(changes)
        return DetectorConfig(**d)


class ClickRecord(NamedTuple):
    detector: str
    time: float


@dataclass
class ClickStream:
    """Per-detector click times in seconds, each sorted ascending."""

    d1: np.ndarray
    d2: np.ndarray
    duration: float

    def records(self) -> Iterator[ClickRecord]:
        """All clicks merged in time order."""
        i = j = 0
        while i < len(self.d1) or j < len(self.d2):
            if j >= len(self.d2) or (i < len(self.d1) and self.d1[i] <= self.d2[j]):
                yield ClickRecord("D1", float(self.d1[i]))
                i += 1
            else:
                yield ClickRecord("D2", float(self.d2[j]))
                j += 1

    @classmethod
    def from_records(cls, records, duration: float) -> "ClickStream":
        recs = list(records)
        d1 = np.array([r.time for r in recs if r.detector == "D1"], dtype=float)
        d2 = np.array([r.time for r in recs if r.detector == "D2"], dtype=float)
        return cls(d1, d2, duration)


@dataclass(frozen=True)
class Tally:
    singles_d1: int
    singles_d2: int
    coincidences: int
    duration: float
    source: Optional[SourceConfig] = None
    detector: Optional[DetectorConfig] = None
    circuit: Optional[CircuitConfig] = None

    @property
    def coincidence_rate(self) -> float:
        return self.coincidences / self.duration

    @property
    def singles_rate_d1(self) -> float:
        return self.singles_d1 / self.duration

    @property
    def singles_rate_d2(self) -> float:
        return self.singles_d2 / self.duration

    def to_dict(self) -> dict:
        return {
            "singles_d1": self.singles_d1,
            "singles_d2": self.singles_d2,
            "coincidences": self.coincidences,
            "duration": self.duration,
        }


@dataclass(frozen=True)
class SubtractionResult:
    raw: Tally
    arm_a_only: Tally
    arm_b_only: Tally
    absolute: int
    stderr: float


# ---------------------------------------------------------------------------
# click probabilities


def splitter_click_probability(n: int, efficiency: float) -> float:
    """Probability that both detectors behind a 50:50 splitter fire for ``n`` photons."""
    if n < 0:
        raise DomainError("photon number must be >= 0")
    return float(_click_tables(int(n), efficiency, 0.0)[2][n])


def _fire(k, efficiency, dark):
    """P(detector fires | k photons reach it) with Poisson dark mean ``dark``."""
    k = np.asarray(k, dtype=float)
    if efficiency >= 1.0:
        log_miss = np.where(k > 0, -np.inf, 0.0)
    else:
        log_miss = k * math.log1p(-efficiency)
    return -np.expm1(log_miss - dark)


def _click_tables(n_max: int, efficiency: float, dark: float) -> tuple:
    """(P(D1 fires), P(D2 fires), P(both fire)) for n = 0..n_max photons at BS3."""
    p1 = np.zeros(n_max + 1)
    joint = np.zeros(n_max + 1)
    for n in range(n_max + 1):
        k = np.arange(n + 1)
        w = comb(n, k) * 0.5**n
        f_k = _fire(k, efficiency, dark)
        f_rest = _fire(n - k, efficiency, dark)
        p1[n] = float(np.sum(w * f_k))
        joint[n] = float(np.sum(w * f_k * f_rest))
    return p1, p1.copy(), joint


def accidental_rate(r1: float, r2: float, window: float) -> float:
    """Accidental coincidences of independent streams, ``r1 r2 (2 window)``."""
    return r1 * r2 * 2.0 * window


# ---------------------------------------------------------------------------
# analytic route


@dataclass(frozen=True)
class RunProbabilities:
    """Per-bin click statistics of one acquisition run."""

    p1: float
    p2: float
    joint: float

    def windowed_pairs(self, window_bins: float) -> float:
        """Expected coincidences per bin for a symmetric window in bin units."""
        same = _tri_cdf(window_bins) - _tri_cdf(-window_bins)
        cross = 2.0 * sum(_tri_cdf(window_bins - k) for k in range(1, int(math.ceil(window_bins)) + 2))
        return self.joint * same + self.p1 * self.p2 * cross


def _tri_cdf(x: float) -> float:
    """CDF of the difference of two independent U(0,1) variables."""
    if x <= -1:
        return 0.0
    if x <= 0:
        return 0.5 * (1 + x) ** 2
    if x < 1:
        return 1.0 - 0.5 * (1 - x) ** 2
    return 1.0


@dataclass(frozen=True)
class AnalyticRates:
    """Exact same-bin coincidence rates of the three runs, in counts per second.

    ``raw_rate``, ``arm_a_rate`` and ``arm_b_rate`` count joint clicks within
    one coherence time; :meth:`windowed` adds the cross-bin accidentals a
    finite coincidence window collects.
    """

    raw: RunProbabilities
    arm_a: RunProbabilities
    arm_b: RunProbabilities
    leading: float
    coherence_time: float

    @property
    def raw_rate(self) -> float:
        return self.raw.joint / self.coherence_time

    @property
    def arm_a_rate(self) -> float:
        return self.arm_a.joint / self.coherence_time

    @property
    def arm_b_rate(self) -> float:
        return self.arm_b.joint / self.coherence_time

    @property
    def absolute_rate(self) -> float:
        return (self.raw.joint - self.arm_a.joint - self.arm_b.joint) / self.coherence_time

    @property
    def leading_term(self) -> float:
        return self.leading / self.coherence_time

    @property
    def residual(self) -> float:
        """``|absolute - leading| / leading``."""
        return abs(self.absolute_rate - self.leading_term) / self.leading_term

    @property
    def singles_rate(self) -> float:
        return self.raw.p1 / self.coherence_time

    def windowed(self, window: float) -> dict:
        """Expected windowed coincidence rates of the three runs and their difference."""
        w = window / self.coherence_time
        raw, a, b = (r.windowed_pairs(w) / self.coherence_time for r in (self.raw, self.arm_a, self.arm_b))
        return {"raw": raw, "arm_a": a, "arm_b": b, "absolute": raw - a - b}


def run_probabilities(
    mu_a: float, mu_b: float, cfg: CircuitConfig, det: DetectorConfig, coherence_time: float, n_max: int | None = None
) -> RunProbabilities:
    """Per-bin click probabilities by brute-force summation over input photon numbers."""
    pc = monitored_distribution(mu_a, mu_b, cfg, n_max)
    p1, p2, joint = _click_tables(len(pc) - 1, det.efficiency, det.dark_rate * coherence_time)
    return RunProbabilities(float(pc @ p1), float(pc @ p2), float(pc @ joint))


def _arm_cutoff(mu: float, n_max: int | None) -> int:
    if n_max is not None:
        return n_max if mu > 0 else 0
    if mu == 0:
        return 0
    # tail must stay small next to mu**2, the scale of the smallest rate of interest
    return truncation_level(mu, max(1e-300, 1e-14 * min(1.0, mu * mu)))


def monitored_distribution(mu_a: float, mu_b: float, cfg: CircuitConfig, n_max: int | None = None) -> np.ndarray:
    """``P(n photons at c after the filter)`` for the phase-randomized two-arm source."""
    na, nb = _arm_cutoff(mu_a, n_max), _arm_cutoff(mu_b, n_max)
    pa, pb = poisson_table(mu_a, na), poisson_table(mu_b, nb)
    scale = max(mu_a, mu_b, 1e-300) ** 2
    out = np.zeros(na + nb + 1)
    for i in range(na + 1):
        for j in range(nb + 1):
            w = pa[i] * pb[j]
            if w == 0.0 or (i + j > 2 and w < 1e-16 * scale):
                continue
            d = monitored_count_distribution(cfg, i, j)
            out[: len(d)] += w * d
    return out


def analytic_rates(
    mu_a: float,
    mu_b: float,
    cfg: CircuitConfig,
    det: DetectorConfig = DetectorConfig(),
    n_max: int | None = None,
    coherence_time: float = 1e-9,
) -> AnalyticRates:
    """Coincidence rates of the three runs via the Fock path.

    The leading term is ``mu_a mu_b P(2 at c | 1_a, 1_b)`` times the joint-click
    probability of two photons at the final splitter.
    """
    cfg.validate()
    det.validate()
    raw = run_probabilities(mu_a, mu_b, cfg, det, coherence_time, n_max)
    arm_a = run_probabilities(mu_a, 0.0, cfg, det, coherence_time, n_max)
    arm_b = run_probabilities(0.0, mu_b, cfg, det, coherence_time, n_max)
    p11 = conditional_probability(cfg, source_state(1, 1), {"c": 2})
    leading = mu_a * mu_b * p11 * splitter_click_probability(2, det.efficiency)
    return AnalyticRates(raw, arm_a, arm_b, leading, coherence_time)


def mu_for_single_rate(
    rate: float, cfg: CircuitConfig, det: DetectorConfig = DetectorConfig(), coherence_time: float = 1e-9
) -> float:
    """Per-arm mean photon number giving ``rate`` singles at D1 with both arms open."""
    floor = run_probabilities(0.0, 0.0, cfg, det, coherence_time).p1 / coherence_time
    if rate <= floor:
        return 0.0

    def gap(mu):
        return run_probabilities(mu, mu, cfg, det, coherence_time, n_max=None).p1 / coherence_time - rate

    hi = 1e-6
    while gap(hi) < 0:
        hi *= 4
        if hi > 50:
            raise DomainError(f"single rate {rate} unreachable")
    return brentq(gap, 0.0, hi, xtol=1e-16, rtol=1e-12)


# ---------------------------------------------------------------------------
# Monte Carlo route


@numba.njit(cache=True)
def _greedy_match(t1, t2, window):
    """Greedy time-ordered matching; each click used at most once."""
    n1, n2 = t1.shape[0], t2.shape[0]
    i = j = 0
    p1 = p2 = 0  # start of the pending (unmatched) ranges t1[p1:i], t2[p2:j]
    count = 0
    while i < n1 or j < n2:
        if j >= n2 or (i < n1 and t1[i] <= t2[j]):
            t = t1[i]
            while p2 < j and t - t2[p2] > window:
                p2 += 1
            i += 1
            if p2 < j:
                count += 1
                p2 += 1
                p1 = i
        else:
            t = t2[j]
            while p1 < i and t - t1[p1] > window:
                p1 += 1
            j += 1
            if p1 < i:
                count += 1
                p1 += 1
                p2 = j
    return count


@numba.njit(cache=True)
def _dead_time_mask(t, dead_time):
    keep = np.ones(t.shape[0], dtype=np.bool_)
    last = -np.inf
    for k in range(t.shape[0]):
        if t[k] - last >= dead_time:
            last = t[k]
        else:
            keep[k] = False
    return keep


def apply_dead_time(times: np.ndarray, dead_time: float) -> np.ndarray:
    """Drop clicks arriving within ``dead_time`` of the previous registered click."""
    if dead_time <= 0 or len(times) == 0:
        return times
    return times[_dead_time_mask(np.ascontiguousarray(times, dtype=np.float64), dead_time)]


def count_coincidences(stream: ClickStream, window: float) -> Tally:
    """Tally singles and greedy symmetric-window coincidences."""
    t1 = np.ascontiguousarray(stream.d1, dtype=np.float64)
    t2 = np.ascontiguousarray(stream.d2, dtype=np.float64)
    for name, t in (("D1", t1), ("D2", t2)):
        if len(t) > 1 and np.any(np.diff(t) < 0):
            raise DomainError(f"{name} click stream is not time-ordered")
    if not window > 0:
        raise DomainError("window must be > 0")
    return Tally(len(t1), len(t2), int(_greedy_match(t1, t2, float(window))), stream.duration)


def same_bin_coincidences(stream: ClickStream, coherence_time: float) -> int:
    """Number of coherence-time bins in which both detectors clicked.

    This is the quantity :class:`AnalyticRates` computes per bin, free of any
    window-matching convention.
    """
    if not coherence_time > 0:
        raise DomainError("coherence_time must be > 0")
    b1 = np.floor(stream.d1 / coherence_time).astype(np.int64)
    b2 = np.floor(stream.d2 / coherence_time).astype(np.int64)
    return int(len(np.intersect1d(b1, b2)))


def _candidate_bins(rng, n_bins: int, q: float) -> np.ndarray:
    """Indices of bins selected independently with probability ``q``."""
    if q <= 0.0 or n_bins == 0:
        return np.empty(0, dtype=np.int64)
    if q >= 1.0:
        return np.arange(n_bins, dtype=np.int64)
    chunks = []
    pos = -1
    while True:
        m = int(n_bins * q + 6.0 * math.sqrt(n_bins * q) + 16)
        idx = pos + np.cumsum(rng.geometric(q, size=m))
        chunks.append(idx[idx < n_bins])
        if idx[-1] >= n_bins:
            break
        pos = int(idx[-1])
    return np.concatenate(chunks)


def _simulate_shard(src: SourceConfig, det: DetectorConfig, cfg: CircuitConfig, stream: int, shard: int, n_bins: int):
    rng = rng_for(src.seed, 1, stream, shard)
    dark = det.dark_rate * src.coherence_time
    eta = det.efficiency
    m1, m2 = detector_mean_bounds(cfg, src.mu_a, src.mu_b)
    q1, q2 = -math.expm1(-eta * m1 - dark), -math.expm1(-eta * m2 - dark)
    q = 1.0 - (1.0 - q1) * (1.0 - q2)
    idx = _candidate_bins(rng, n_bins, q)
    theta = sample_phase(rng, len(idx))
    mu1, mu2 = detector_means(cfg, src.mu_a, src.mu_b, theta)
    p1 = -np.expm1(-eta * mu1 - dark)
    p2 = -np.expm1(-eta * mu2 - dark)
    u = rng.random(len(idx)) * q
    both = u < p1 * p2
    only1 = (~both) & (u < p1)
    only2 = (~both) & (~only1) & (u < p1 + p2 - p1 * p2)
    fire1 = both | only1
    fire2 = both | only2
    base = shard * SHARD_BINS
    t1 = (base + idx[fire1] + rng.random(int(fire1.sum()))) * src.coherence_time
    t2 = (base + idx[fire2] + rng.random(int(fire2.sum()))) * src.coherence_time
    return t1, t2


def simulate_timeline(
    src: SourceConfig,
    det: DetectorConfig,
    cfg: CircuitConfig,
    stream: int = 0,
    workers: int = 1,
) -> ClickStream:
    """Click times at D1 and D2 for one acquisition run.

    Every coherence-time bin gets its own uniform relative phase between the
    arms.  Only bins that may hold a click are visited: bins are pre-selected
    with the phase-independent bound ``q`` on the click probability and the
    outcome is then drawn from the exact conditional probabilities, which
    leaves the per-bin statistics unchanged.
    """
    src.validate()
    det.validate()
    cfg.validate()
    n_bins = src.bins
    jobs = []
    for shard, start in enumerate(range(0, n_bins, SHARD_BINS)):
        jobs.append((shard, min(SHARD_BINS, n_bins - start)))
    run = lambda job: _simulate_shard(src, det, cfg, stream, job[0], job[1])
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    t1 = np.concatenate([p[0] for p in parts]) if parts else np.empty(0)
    t2 = np.concatenate([p[1] for p in parts]) if parts else np.empty(0)
    t1 = apply_dead_time(t1, det.dead_time)
    t2 = apply_dead_time(t2, det.dead_time)
    return ClickStream(t1, t2, n_bins * src.coherence_time)


def simulate_tally(src: SourceConfig, det: DetectorConfig, cfg: CircuitConfig, stream: int = 0, workers: int = 1) -> Tally:
    stream_ = simulate_timeline(src, det, cfg, stream, workers)
    t = count_coincidences(stream_, det.window)
    return Tally(t.singles_d1, t.singles_d2, t.coincidences, t.duration, src, det, cfg)


def three_run_subtraction(
    src: SourceConfig, det: DetectorConfig, cfg: CircuitConfig, workers: int = 1, point: int = 0
) -> SubtractionResult:
    """Both arms open, arm a only, arm b only; absolute = raw - a - b (never clamped).

    The runs draw from streams ``3*point + (0, 1, 2)`` of ``src.seed`` so every
    scan point and run is independent.
    """
    raw = simulate_tally(src, det, cfg, stream=3 * point, workers=workers)
    only_a = simulate_tally(src.replace(mu_b=0.0), det, cfg, stream=3 * point + 1, workers=workers)
    only_b = simulate_tally(src.replace(mu_a=0.0), det, cfg, stream=3 * point + 2, workers=workers)
    absolute = raw.coincidences - only_a.coincidences - only_b.coincidences
    stderr = math.sqrt(raw.coincidences + only_a.coincidences + only_b.coincidences)
    return SubtractionResult(raw, only_a, only_b, absolute, stderr)


def poisson_streams(rate1: float, rate2: float, duration: float, seed: int) -> ClickStream:
    """Two independent homogeneous Poisson click streams."""
    out = []
    for k, rate in enumerate((rate1, rate2)):
        rng = rng_for(seed, 2, k)
        n = rng.poisson(rate * duration) if rate > 0 else 0
        out.append(np.sort(rng.random(n) * duration))
    return ClickStream(out[0], out[1], duration)
