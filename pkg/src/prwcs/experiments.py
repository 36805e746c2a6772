"""Experiment orchestration behind the CLI modes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .config import RunSpec
from .counting import (
    SourceConfig,
    analytic_rates,
    mu_for_single_rate,
    simulate_tally,
    three_run_subtraction,
)
from .fitting import FitResult, fit_cosine
from .quasiclassical import CoherentAmplitude, FieldScale, mean_field
from .tables import ResultTable

PHI_COLUMNS = ("phi_deg", "raw_cc", "arm_a_cc", "arm_b_cc", "absolute_cc", "stderr", "normalized")
RATE_COLUMNS = ("single_rate_khz", "coincidences_per_s", "absolute_per_s", "stderr_per_s", "mu")
ERROR_BARS = "Poisson: sqrt(N_raw + N_arm_a + N_arm_b)"


@dataclass
class Result:
    table: ResultTable
    fit: Optional[FitResult] = None
    metadata: dict = field(default_factory=dict)


def resolve_source(spec: RunSpec) -> SourceConfig:
    """Source with ``mu_a = mu_b`` solved from ``single_rate`` when one is given."""
    src = spec.source
    if spec.single_rate is None:
        return src
    mu = mu_for_single_rate(spec.single_rate, spec.circuit.replace(phi=0.0), spec.detector, src.coherence_time)
    return src.replace(mu_a=mu, mu_b=mu)


def _metadata(spec: RunSpec, src: SourceConfig) -> dict:
    return {
        "detector_efficiency": spec.detector.efficiency,
        "dark_rate_hz": spec.detector.dark_rate,
        "window_s": spec.detector.window,
        "coherence_time_s": src.coherence_time,
        "duration_s": src.duration,
        "mu_a": src.mu_a,
        "mu_b": src.mu_b,
        "seed": src.seed,
        "error_bars": ERROR_BARS,
    }


def run_analytic(spec: RunSpec) -> Result:
    src = resolve_source(spec)
    r = analytic_rates(src.mu_a, src.mu_b, spec.circuit, spec.detector, coherence_time=src.coherence_time)
    win = r.windowed(spec.detector.window)
    columns = (
        "mu_a", "mu_b", "phi_deg", "raw_rate", "arm_a_rate", "arm_b_rate", "absolute_rate",
        "leading_term", "residual", "singles_rate", "raw_windowed", "absolute_windowed",
    )
    row = (
        src.mu_a, src.mu_b, math.degrees(spec.circuit.phi), r.raw_rate, r.arm_a_rate, r.arm_b_rate,
        r.absolute_rate, r.leading_term, r.residual if r.leading_term > 0 else float("nan"),
        r.singles_rate, win["raw"], win["absolute"],
    )
    return Result(ResultTable(columns, [row]), metadata=_metadata(spec, src))


def run_simulate(spec: RunSpec) -> Result:
    src = resolve_source(spec)
    t = simulate_tally(src, spec.detector, spec.circuit, workers=spec.workers)
    columns = ("singles_d1", "singles_d2", "coincidences", "duration", "coincidence_rate")
    row = (t.singles_d1, t.singles_d2, t.coincidences, t.duration, t.coincidence_rate)
    return Result(ResultTable(columns, [row]), metadata=_metadata(spec, src))


def run_subtract(spec: RunSpec) -> Result:
    src = resolve_source(spec)
    s = three_run_subtraction(src, spec.detector, spec.circuit, workers=spec.workers)
    columns = ("raw_cc", "arm_a_cc", "arm_b_cc", "absolute_cc", "stderr", "duration", "absolute_per_s")
    row = (
        s.raw.coincidences, s.arm_a_only.coincidences, s.arm_b_only.coincidences, s.absolute,
        s.stderr, s.raw.duration, s.absolute / s.raw.duration,
    )
    return Result(ResultTable(columns, [row]), metadata=_metadata(spec, src))


def _phi_point(spec: RunSpec, src: SourceConfig, phi_deg: float, index: int) -> tuple:
    cfg = spec.circuit.replace(phi=math.radians(phi_deg))
    if spec.scan.method == "analytic":
        w = analytic_rates(src.mu_a, src.mu_b, cfg, spec.detector, coherence_time=src.coherence_time).windowed(
            spec.detector.window
        )
        raw, a, b = (w[k] * src.duration for k in ("raw", "arm_a", "arm_b"))
        return raw, a, b, raw - a - b, math.sqrt(raw + a + b)
    s = three_run_subtraction(src, spec.detector, cfg, workers=spec.workers, point=index)
    return (
        s.raw.coincidences, s.arm_a_only.coincidences, s.arm_b_only.coincidences, s.absolute, s.stderr,
    )


def scan_phi(spec: RunSpec) -> Result:
    """Three-run (or analytic) coincidences on a grid of mismatch angles."""
    src = resolve_source(spec)
    grid = spec.scan.grid()
    points = [(phi,) + tuple(_phi_point(spec, src, phi, k)) for k, phi in enumerate(grid)]
    partial = ResultTable(PHI_COLUMNS[:-1], points)
    l = abs(spec.circuit.l1) or 1
    fit = fit_cosine(partial, l=l)
    top = fit.maximum
    rows = [p + (p[4] / top if top != 0 else float("nan"),) for p in points]
    meta = _metadata(spec, src)
    meta["fit_l"] = l
    meta["normalization"] = "absolute_cc / fitted maximum"
    meta["per_second"] = {
        name + "_per_s": [p[k] / src.duration for p in points]
        for k, name in enumerate(PHI_COLUMNS[1:6], start=1)
    }
    return Result(ResultTable(PHI_COLUMNS, rows), fit, meta)


def scan_rate(spec: RunSpec) -> Result:
    """Coincidence and absolute rates against the single-detector rate."""
    src0 = resolve_source(spec)
    rows = []
    for k, value in enumerate(spec.scan.grid()):
        if spec.scan.units == "khz":
            mu = mu_for_single_rate(value * 1e3, spec.circuit, spec.detector, src0.coherence_time)
        else:
            mu = value
        src = src0.replace(mu_a=mu, mu_b=mu)
        if spec.scan.method == "analytic":
            r = analytic_rates(mu, mu, spec.circuit, spec.detector, coherence_time=src.coherence_time)
            w = r.windowed(spec.detector.window)
            single = value * 1e3 if spec.scan.units == "khz" else r.singles_rate
            raw, absolute = w["raw"], w["absolute"]
            err = math.sqrt((w["raw"] + w["arm_a"] + w["arm_b"]) / src.duration)
        else:
            s = three_run_subtraction(src, spec.detector, spec.circuit, workers=spec.workers, point=k)
            single = s.raw.singles_rate_d1
            raw = s.raw.coincidence_rate
            absolute = s.absolute / s.raw.duration
            err = s.stderr / s.raw.duration
        rows.append((single / 1e3, raw, absolute, err, mu))
    return Result(ResultTable(RATE_COLUMNS, rows), metadata=_metadata(spec, src0))


def mean_field_table(spec: RunSpec) -> Result:
    """Mean field of ``|sqrt(mu_a)>`` over the space-time phase, with the vacuum-level band."""
    alpha = CoherentAmplitude.from_mu(spec.source.mu_a)
    rows = []
    for deg in spec.scan.grid():
        scale = FieldScale(1.0, math.radians(deg))
        e = mean_field(alpha, scale)
        rows.append((deg, e, e + scale.single_photon_amplitude, e - scale.single_photon_amplitude))
    meta = {"mu": spec.source.mu_a, "field_uncertainty": 1.0}
    return Result(ResultTable(("phase_deg", "mean_field", "upper", "lower"), rows), metadata=meta)


RUNNERS = {
    "analytic": run_analytic,
    "simulate": run_simulate,
    "subtract": run_subtract,
    "scan-phi": scan_phi,
    "scan-rate": scan_rate,
    "mean-field": mean_field_table,
}


def execute(spec: RunSpec) -> Result:
    return RUNNERS[spec.mode](spec)
