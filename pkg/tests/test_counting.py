import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prwcs import ConfigError, DomainError
from prwcs.counting import (
    ClickRecord,
    ClickStream,
    DetectorConfig,
    RunProbabilities,
    SourceConfig,
    _candidate_bins,
    _click_tables,
    accidental_rate,
    analytic_rates,
    apply_dead_time,
    count_coincidences,
    monitored_distribution,
    mu_for_single_rate,
    poisson_streams,
    same_bin_coincidences,
    simulate_tally,
    simulate_timeline,
    splitter_click_probability,
    three_run_subtraction,
)
from prwcs.interferometer import CircuitConfig
from prwcs.randomization import rng_for

CFG = CircuitConfig(matched=True)
IDEAL = DetectorConfig(efficiency=1.0, dark_rate=0.0)


def greedy_oracle(t1, t2, window):
    """Each click, in time order, pairs with the earliest unused in-window click of the other detector."""
    events = sorted([(t, 0, k) for k, t in enumerate(t1)] + [(t, 1, k) for k, t in enumerate(t2)])
    pending = ([], [])
    count = 0
    for t, det, _ in events:
        other = pending[1 - det]
        while other and t - other[0] > window:
            other.pop(0)
        if other:
            other.pop(0)
            count += 1
        else:
            pending[det].append(t)
    return count


def dead_time_oracle(times, dead):
    kept, last = [], -math.inf
    for t in times:
        if t - last >= dead:
            kept.append(t)
            last = t
    return np.array(kept)


@pytest.mark.parametrize("n", range(0, 7))
@pytest.mark.parametrize("eta", [0.3, 0.6, 1.0])
def test_splitter_click_probability_closed_form(n, eta):
    expected = 1 - 2 * (1 - eta / 2) ** n + (1 - eta) ** n
    assert splitter_click_probability(n, eta) == pytest.approx(expected, abs=1e-14)


def test_splitter_click_examples():
    assert splitter_click_probability(2, 1.0) == pytest.approx(0.5)
    assert splitter_click_probability(1, 0.7) == 0.0
    with pytest.raises(DomainError):
        splitter_click_probability(-1, 0.5)


def test_click_tables_dark_counts():
    dark = 1e-7
    p1, p2, joint = _click_tables(3, 0.6, dark)
    assert p1[0] == pytest.approx(-math.expm1(-dark), rel=1e-12)
    assert joint[0] == pytest.approx(p1[0] ** 2, rel=1e-12)
    np.testing.assert_array_equal(p1, p2)


@given(st.floats(0.0, 1.0), st.floats(0.01, 1.0), st.floats(0.05, 4.0))
def test_windowed_pairs_independent_clicks(q1, q2, w):
    # independent clicks: expected pairs per bin is p1 p2 times the window length 2w
    r = RunProbabilities(q1, q2, q1 * q2)
    assert r.windowed_pairs(w) == pytest.approx(2 * w * q1 * q2, rel=1e-12, abs=1e-15)


def test_accidental_rate_formula():
    assert accidental_rate(4e5, 4e5, 10e-9) == pytest.approx(3200.0)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0, 100), max_size=40),
    st.lists(st.floats(0, 100), max_size=40),
    st.floats(0.1, 10),
)
def test_greedy_matcher_matches_oracle(a, b, window):
    stream = ClickStream(np.sort(np.array(a, dtype=float)), np.sort(np.array(b, dtype=float)), 100.0)
    tally = count_coincidences(stream, window)
    assert tally.coincidences == greedy_oracle(sorted(a), sorted(b), window)
    assert tally.coincidences <= min(len(a), len(b))


def test_matcher_examples():
    s = ClickStream(np.array([1.0, 5.0, 20.0]), np.array([1.5, 30.0]), 40.0)
    assert count_coincidences(s, 1.0).coincidences == 1
    assert count_coincidences(s, 100.0).coincidences == 2


def test_unordered_stream_rejected():
    with pytest.raises(DomainError):
        count_coincidences(ClickStream(np.array([2.0, 1.0]), np.array([]), 3.0), 1.0)
    with pytest.raises(DomainError):
        count_coincidences(ClickStream(np.array([1.0]), np.array([]), 3.0), 0.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 50), max_size=60), st.floats(0.0, 5.0))
def test_dead_time_matches_oracle(times, dead):
    t = np.sort(np.array(times, dtype=float))
    np.testing.assert_array_equal(apply_dead_time(t, dead), dead_time_oracle(t, dead) if dead > 0 else t)


def test_records_round_trip():
    s = ClickStream(np.array([1.0, 3.0]), np.array([2.0]), 5.0)
    recs = list(s.records())
    assert recs == [ClickRecord("D1", 1.0), ClickRecord("D2", 2.0), ClickRecord("D1", 3.0)]
    back = ClickStream.from_records(recs, 5.0)
    np.testing.assert_array_equal(back.d1, s.d1)


@pytest.mark.parametrize("q", [1e-4, 0.01, 0.3])
def test_candidate_bins_thinning(q):
    n = 1_000_000
    idx = _candidate_bins(rng_for(0, 42), n, q)
    assert np.all(np.diff(idx) > 0) and idx.min() >= 0 and idx.max() < n
    assert abs(len(idx) - n * q) < 5 * math.sqrt(n * q * (1 - q))


def test_candidate_bins_edges():
    rng = rng_for(1)
    assert len(_candidate_bins(rng, 100, 0.0)) == 0
    assert len(_candidate_bins(rng, 100, 1.0)) == 100


def test_monitored_distribution_small_mu():
    pc = monitored_distribution(1e-3, 1e-3, CFG)
    assert pc.sum() == pytest.approx(1.0, abs=1e-13)
    # one photon in: reaches c with probability 1/2 for either arm
    assert pc[1] == pytest.approx(2e-3 * 0.5, rel=2e-3)


def test_analytic_rates_vacuum_is_zero_without_darks():
    r = analytic_rates(0.0, 0.0, CFG, IDEAL)
    assert r.raw_rate == 0.0 and r.absolute_rate == 0.0 and r.singles_rate == 0.0


def test_analytic_rates_vacuum_dark_accidentals():
    det = DetectorConfig(efficiency=0.6, dark_rate=1000.0)
    r = analytic_rates(0.0, 0.0, CFG, det)
    d = -math.expm1(-1000.0 * 1e-9)
    assert r.raw_rate == pytest.approx(d * d / 1e-9, rel=1e-12)
    # all three runs see the same dark floor, so the subtraction goes negative
    assert r.absolute_rate == pytest.approx(-d * d / 1e-9, rel=1e-12)


def test_leading_term_dominates_at_low_mu():
    r = analytic_rates(1e-4, 1e-4, CFG, DetectorConfig(dark_rate=0.0))
    assert r.residual < 1e-3
    assert r.leading_term == pytest.approx(1e-8 * 0.5 * splitter_click_probability(2, 0.6) / 1e-9)


@pytest.mark.parametrize("phi", [0.0, 0.5, math.pi / 2])
def test_absolute_rate_follows_bunching(phi):
    r = analytic_rates(1e-5, 1e-5, CFG.replace(phi=phi), DetectorConfig(dark_rate=0.0))
    assert r.absolute_rate == pytest.approx(1e-10 * 0.5 * math.cos(phi) ** 2 * 0.18 / 1e-9, rel=1e-4, abs=1e-12)


def test_residual_reference_point():
    r = analytic_rates(0.03, 0.03, CFG)
    assert 0.01 <= r.residual <= 0.04


def test_mu_for_single_rate_round_trip():
    det = DetectorConfig()
    mu = mu_for_single_rate(4e5, CFG, det)
    r = analytic_rates(mu, mu, CFG, det)
    assert r.singles_rate == pytest.approx(4e5, rel=1e-9)
    assert mu_for_single_rate(1.0, CFG, det) == 0.0


@pytest.mark.parametrize(
    "src, field",
    [(SourceConfig(mu_a=-1), "mu_a"), (SourceConfig(duration=0), "duration"), (SourceConfig(coherence_time=float("inf")), "coherence_time")],
)
def test_source_validation(src, field):
    with pytest.raises(ConfigError) as err:
        src.validate()
    assert field in err.value.fields


def test_detector_validation():
    with pytest.raises(ConfigError) as err:
        DetectorConfig(efficiency=1.5).validate()
    assert err.value.fields == ("efficiency",)


def test_timeline_is_sorted_and_in_range():
    src = SourceConfig(mu_a=0.05, mu_b=0.05, duration=2e-3, seed=3)
    s = simulate_timeline(src, DetectorConfig(), CFG)
    for t in (s.d1, s.d2):
        assert np.all(np.diff(t) >= 0) and t.min() >= 0 and t.max() < s.duration


def test_timeline_independent_of_workers():
    src = SourceConfig(mu_a=0.02, mu_b=0.02, duration=1.2e-2, seed=5)  # three shards
    one = simulate_timeline(src, DetectorConfig(), CFG, workers=1)
    many = simulate_timeline(src, DetectorConfig(), CFG, workers=3)
    assert np.array_equal(one.d1, many.d1) and np.array_equal(one.d2, many.d2)


def test_dead_time_in_timeline():
    src = SourceConfig(mu_a=0.5, mu_b=0.5, duration=1e-3, seed=2)
    det = DetectorConfig(dead_time=50e-9)
    s = simulate_timeline(src, det, CFG)
    assert np.all(np.diff(s.d1) >= 50e-9)


def test_singles_rate_agrees_with_analytic():
    src = SourceConfig(mu_a=0.02, mu_b=0.02, duration=5e-3, seed=8)
    det = DetectorConfig()
    t = simulate_tally(src, det, CFG)
    expected = analytic_rates(0.02, 0.02, CFG, det).singles_rate * t.duration
    assert abs(t.singles_d1 - expected) < 5 * math.sqrt(expected)


def test_three_run_subtraction_bookkeeping():
    src = SourceConfig(mu_a=0.05, mu_b=0.05, duration=2e-3, seed=1)
    s = three_run_subtraction(src, DetectorConfig(window=1e-9), CFG)
    assert s.absolute == s.raw.coincidences - s.arm_a_only.coincidences - s.arm_b_only.coincidences
    assert s.stderr == pytest.approx(math.sqrt(s.raw.coincidences + s.arm_a_only.coincidences + s.arm_b_only.coincidences))
    other = three_run_subtraction(src, DetectorConfig(window=1e-9), CFG, point=1)
    assert other.raw.coincidences != s.raw.coincidences or other.arm_a_only.coincidences != s.arm_a_only.coincidences


def test_poisson_streams_rates():
    s = poisson_streams(1e5, 2e5, 0.1, seed=4)
    assert abs(len(s.d1) - 1e4) < 5 * 100 and abs(len(s.d2) - 2e4) < 5 * math.sqrt(2e4)
    assert np.all(np.diff(s.d1) >= 0)


def test_same_bin_coincidences():
    s = ClickStream(np.array([0.5e-9, 2.2e-9, 7.2e-9]), np.array([0.9e-9, 3.1e-9, 7.5e-9]), 1e-8)
    assert same_bin_coincidences(s, 1e-9) == 2
    with pytest.raises(DomainError):
        same_bin_coincidences(s, 0.0)
