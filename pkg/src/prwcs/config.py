"""Run specification: JSON document <-> validated :class:`RunSpec`.

Document layout (all sections optional except ``mode``)::

    {"mode": "scan-phi",
     "circuit":  {"l1": 1, "l2": 1, "l3": -1, "phi_deg": 0.0, ...},
     "source":   {"mu_a": 0.01, "mu_b": 0.01, "coherence_time": 1e-9,
                  "duration": 1e-3, "seed": 0, "single_rate": null},
     "detector": {"efficiency": 0.6, "dark_rate": 100.0, "dead_time": 0.0,
                  "window": 1e-8},
     "scan":     {"start": 0, "stop": 360, "step": 22.5, "units": "deg",
                  "method": "analytic"},
     "output":   {"path": null, "format": "csv", "plot": true},
     "workers":  1}

Times are in seconds, rates in Hz, the mismatch angle in degrees.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from . import ConfigError
from .counting import DetectorConfig, SourceConfig
from .interferometer import MISMATCH_DOFS, CircuitConfig

MODES = ("analytic", "simulate", "subtract", "scan-phi", "scan-rate", "mean-field", "fit")
SCAN_MODES = ("scan-phi", "scan-rate", "mean-field")
FORMATS = ("csv", "json")
SCAN_UNITS = {"scan-phi": ("deg",), "scan-rate": ("mu", "khz"), "mean-field": ("deg",)}
METHODS = ("analytic", "simulate")


@dataclass(frozen=True)
class ScanSpec:
    start: float
    stop: float
    step: float
    units: str = "deg"
    method: str = "analytic"

    def grid(self) -> list:
        """Inclusive grid ``start, start + step, ..., stop``."""
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9))
        return [self.start + k * self.step for k in range(n + 1)]


@dataclass(frozen=True)
class OutputSpec:
    path: Optional[str] = None
    format: str = "csv"
    plot: bool = True


@dataclass(frozen=True)
class RunSpec:
    mode: str
    circuit: CircuitConfig = field(default_factory=CircuitConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    scan: Optional[ScanSpec] = None
    output: OutputSpec = field(default_factory=OutputSpec)
    single_rate: Optional[float] = None
    workers: int = 1

    def to_document(self) -> dict:
        """Inverse of :func:`parse_config`."""
        circuit = self.circuit.to_dict()
        circuit["phi_deg"] = math.degrees(circuit.pop("phi"))
        source = {
            "coherence_time": self.source.coherence_time,
            "duration": self.source.duration,
            "seed": self.source.seed,
        }
        if self.single_rate is None:
            source.update(mu_a=self.source.mu_a, mu_b=self.source.mu_b)
        else:
            source["single_rate"] = self.single_rate
        doc = {
            "mode": self.mode,
            "circuit": circuit,
            "source": source,
            "detector": {
                "efficiency": self.detector.efficiency,
                "dark_rate": self.detector.dark_rate,
                "dead_time": self.detector.dead_time,
                "window": self.detector.window,
            },
            "output": {"path": self.output.path, "format": self.output.format, "plot": self.output.plot},
            "workers": self.workers,
        }
        if self.scan is not None:
            doc["scan"] = {
                "start": self.scan.start,
                "stop": self.scan.stop,
                "step": self.scan.step,
                "units": self.scan.units,
                "method": self.scan.method,
            }
        return doc


_CIRCUIT_KEYS = {
    "l1": int, "l2": int, "l3": int, "phi_deg": float, "pbs2_enabled": bool,
    "filter_efficiency": float, "slm_efficiency": float, "mismatch_dof": str, "matched": bool,
}
_SOURCE_KEYS = {"mu_a": float, "mu_b": float, "coherence_time": float, "duration": float, "seed": int, "single_rate": float}
_DETECTOR_KEYS = {"efficiency": float, "dark_rate": float, "dead_time": float, "window": float}
_SCAN_KEYS = {"start": float, "stop": float, "step": float, "units": str, "method": str}
_OUTPUT_KEYS = {"path": str, "format": str, "plot": bool}
_TOP_KEYS = {"mode", "circuit", "source", "detector", "scan", "output", "workers"}


def _typed(section: str, data, schema: dict) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected an object", [section])
    unknown = sorted(set(data) - set(schema))
    if unknown:
        paths = [f"{section}.{k}" for k in unknown]
        raise ConfigError(f"unknown key(s): {', '.join(paths)}", paths)
    out = {}
    for key, value in data.items():
        path = f"{section}.{key}"
        kind = schema[key]
        if value is None and key in ("single_rate", "path"):
            out[key] = None
            continue
        if kind is bool:
            ok = isinstance(value, bool)
        elif kind is int:
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif kind is float:
            ok = isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
        else:
            ok = isinstance(value, str)
        if not ok:
            raise ConfigError(f"{path}: expected {kind.__name__}, got {value!r}", [path])
        out[key] = float(value) if kind is float else value
    return out


def _range(path: str, ok: bool, message: str) -> None:
    if not ok:
        raise ConfigError(f"{path}: {message}", [path])


def parse_document(doc: dict) -> RunSpec:
    """Validate a decoded config document and apply defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", ["<root>"])
    unknown = sorted(set(doc) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}", unknown)
    if "mode" not in doc:
        raise ConfigError("missing required key: mode", ["mode"])
    mode = doc["mode"]
    _range("mode", mode in MODES, f"must be one of {MODES}, got {mode!r}")

    c = _typed("circuit", doc.get("circuit", {}), _CIRCUIT_KEYS)
    if "phi_deg" in c:
        c["phi"] = math.radians(c.pop("phi_deg"))
    for k in ("filter_efficiency", "slm_efficiency"):
        if k in c:
            _range(f"circuit.{k}", 0.0 <= c[k] <= 1.0, "must lie in [0, 1]")
    if "mismatch_dof" in c:
        _range("circuit.mismatch_dof", c["mismatch_dof"] in MISMATCH_DOFS, f"must be one of {MISMATCH_DOFS}")
    circuit = CircuitConfig(**c)
    try:
        circuit.validate()
    except ConfigError as exc:
        paths = [f"circuit.{f}" for f in exc.fields]
        raise ConfigError(f"invalid circuit: {', '.join(paths)}", paths) from None

    s = _typed("source", doc.get("source", {}), _SOURCE_KEYS)
    single_rate = s.pop("single_rate", None)
    for k in ("mu_a", "mu_b"):
        if k in s:
            _range(f"source.{k}", s[k] >= 0, "must be >= 0")
    for k in ("coherence_time", "duration"):
        if k in s:
            _range(f"source.{k}", s[k] > 0, "must be > 0")
    if "seed" in s:
        _range("source.seed", 0 <= s["seed"] < 2**64, "must be an unsigned 64-bit integer")
    if single_rate is not None:
        _range("source.single_rate", single_rate >= 0, "must be >= 0")
        _range("source.single_rate", "mu_a" not in s and "mu_b" not in s, "give either single_rate or mu_a/mu_b")
    source = SourceConfig(**s)

    d = _typed("detector", doc.get("detector", {}), _DETECTOR_KEYS)
    if "efficiency" in d:
        _range("detector.efficiency", 0.0 <= d["efficiency"] <= 1.0, "must lie in [0, 1]")
    if "dark_rate" in d:
        _range("detector.dark_rate", d["dark_rate"] >= 0, "must be >= 0")
    if "dead_time" in d:
        _range("detector.dead_time", d["dead_time"] >= 0, "must be >= 0")
    if "window" in d:
        _range("detector.window", d["window"] > 0, "must be > 0")
    detector = DetectorConfig(**d)

    scan = None
    if "scan" in doc and doc["scan"] is not None:
        sc = _typed("scan", doc["scan"], _SCAN_KEYS)
        for k in ("start", "stop", "step"):
            if k not in sc:
                raise ConfigError(f"missing required key: scan.{k}", [f"scan.{k}"])
        _range("scan.step", sc["step"] > 0, "must be > 0")
        _range("scan.stop", sc["stop"] >= sc["start"], "must be >= scan.start")
        sc.setdefault("units", SCAN_UNITS.get(mode, ("deg",))[0])
        _range("scan.units", mode not in SCAN_UNITS or sc["units"] in SCAN_UNITS[mode], f"must be one of {SCAN_UNITS.get(mode)}")
        if "method" in sc:
            _range("scan.method", sc["method"] in METHODS, f"must be one of {METHODS}")
        scan = ScanSpec(**sc)
    if mode in SCAN_MODES and scan is None:
        raise ConfigError(f"missing required key: scan (mode {mode} is a scan)", ["scan"])
    if mode not in SCAN_MODES and scan is not None:
        raise ConfigError(f"scan: only allowed for scan modes, not {mode}", ["scan"])

    o = _typed("output", doc.get("output", {}), _OUTPUT_KEYS)
    if "format" in o:
        _range("output.format", o["format"] in FORMATS, f"must be one of {FORMATS}")
    output = OutputSpec(**o)

    workers = doc.get("workers", 1)
    _range("workers", isinstance(workers, int) and not isinstance(workers, bool) and workers >= 1, "must be an integer >= 1")
    return RunSpec(mode, circuit, source, detector, scan, output, single_rate, workers)


def parse_config(text: str) -> RunSpec:
    """Parse a JSON config document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}", ["<root>"]) from None
    return parse_document(doc)


def reference_document(mode: str = "scan-phi") -> dict:
    """Reference bunching-scan settings: l = 1, 1 ns coherence, 10 ns window, 22.5 deg steps, 5 s per point."""
    doc = {
        "mode": mode,
        "circuit": {"l1": 1, "l2": 1, "l3": -1, "phi_deg": 0.0, "matched": True},
        "source": {"coherence_time": 1e-9, "duration": 5.0, "seed": 2024, "single_rate": 4e5},
        "detector": {"efficiency": 0.6, "dark_rate": 100.0, "dead_time": 0.0, "window": 10e-9},
    }
    if mode == "scan-phi":
        doc["scan"] = {"start": 0.0, "stop": 360.0, "step": 22.5, "units": "deg", "method": "simulate"}
    elif mode == "scan-rate":
        doc["scan"] = {"start": 100.0, "stop": 1500.0, "step": 200.0, "units": "khz", "method": "simulate"}
    elif mode == "mean-field":
        doc["scan"] = {"start": 0.0, "stop": 720.0, "step": 5.0, "units": "deg"}
    return doc


def defaults_help() -> str:
    """Human-readable listing of every default, for ``--help``."""
    lines = ["config defaults (JSON document, SI units, phi in degrees):"]
    c = CircuitConfig().to_dict()
    c["phi_deg"] = math.degrees(c.pop("phi"))
    s = SourceConfig()
    d = DetectorConfig()
    lines.append("  circuit:  " + ", ".join(f"{k}={v}" for k, v in c.items()))
    lines.append(
        f"  source:   mu_a={s.mu_a}, mu_b={s.mu_b}, coherence_time={s.coherence_time}, "
        f"duration={s.duration}, seed={s.seed}, single_rate=None"
    )
    lines.append(f"  detector: efficiency={d.efficiency}, dark_rate={d.dark_rate}, dead_time={d.dead_time}, window={d.window}")
    lines.append("  scan:     start, stop, step required; units=deg (scan-phi, mean-field) or mu|khz (scan-rate); method=analytic")
    lines.append("  output:   path=None (stdout), format=csv, plot=true")
    lines.append("  workers:  1")
    return "\n".join(lines)
