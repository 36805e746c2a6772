"""Writing results: CSV/JSON tables, plot-data files and PNG figures."""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import __version__  # noqa: E402
from .config import RunSpec  # noqa: E402
from .interferometer import bunching_probability  # noqa: E402
from .tables import ResultTable, _json_value, format_value  # noqa: E402

# (x column, y column, error column) written to the .plot.dat companion file
PLOT_COLUMNS = {
    "scan-phi": ("phi_deg", "normalized", "stderr"),
    "scan-rate": ("single_rate_khz", "absolute_per_s", "stderr_per_s"),
    "mean-field": ("phase_deg", "mean_field", None),
}


def document(result, spec: RunSpec) -> dict:
    """Self-describing JSON payload of one run."""
    doc = {
        "version": __version__,
        "mode": spec.mode,
        "seed": spec.source.seed,
        "config": spec.to_document(),
        "columns": list(result.table.columns),
        "rows": result.table.to_records(),
        "metadata": {k: _jsonable(v) for k, v in result.metadata.items()},
    }
    if result.fit is not None:
        doc["fit"] = result.fit.to_dict()
    return doc


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    return _json_value(v)


def render(result, spec: RunSpec, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(document(result, spec), indent=2, sort_keys=False) + "\n"
    return result.table.to_csv()


def plot_data(result, mode: str) -> str | None:
    """Whitespace-separated ``x y yerr`` lines for the figure of ``mode``."""
    cols = PLOT_COLUMNS.get(mode)
    if cols is None:
        return None
    t = result.table
    x, y = t.column(cols[0]), t.column(cols[1])
    if cols[2] is None:
        e = np.zeros_like(y)
    else:
        e = t.column(cols[2])
        if mode == "scan-phi" and result.fit is not None and result.fit.maximum != 0:
            e = e / abs(result.fit.maximum)
    lines = [f"# {cols[0]} {cols[1]} {cols[2] or 'err'}"]
    lines += [" ".join(format_value(float(v)) for v in row) for row in zip(x, y, e)]
    return "\n".join(lines) + "\n"


def figure(result, spec: RunSpec, path: Path) -> Path | None:
    """Render the figure of a scan mode to ``path`` (PNG)."""
    drawer = {"scan-phi": _fig_phi, "scan-rate": _fig_rate, "mean-field": _fig_mean_field}.get(spec.mode)
    if drawer is None:
        return None
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    try:
        drawer(ax, result, spec)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
    finally:
        plt.close(fig)
    return path


def _fig_phi(ax, result, spec):
    t = result.table
    phi = t.column("phi_deg")
    top = result.fit.maximum if result.fit is not None else 1.0
    ax.errorbar(phi, t.column("normalized"), yerr=t.column("stderr") / abs(top), fmt="o", ms=4, label="absolute coincidences")
    grid = np.linspace(phi.min(), phi.max(), 400)
    if result.fit is not None:
        ax.plot(grid, result.fit.curve(np.radians(grid)) / top, "-", label=f"fit, V = {result.fit.visibility:.3f}")
    l = abs(spec.circuit.l1) or 1
    theory = np.array([bunching_probability(math.radians(g), l) for g in grid]) * 2
    ax.plot(grid, theory, "--", color="grey", label=r"$\cos^2(l\varphi)$")
    ax.set_xlabel("mismatch angle (deg)")
    ax.set_ylabel("normalized coincidences")
    ax.legend(fontsize=8)


def _fig_rate(ax, result, spec):
    t = result.table
    x = t.column("single_rate_khz")
    ax.loglog(x, t.column("coincidences_per_s"), "s", ms=4, label="raw coincidences")
    absolute = t.column("absolute_per_s")
    ok = absolute > 0
    ax.errorbar(x[ok], absolute[ok], yerr=t.column("stderr_per_s")[ok], fmt="o", ms=4, label="absolute coincidences")
    if ok.sum() >= 2:
        k = np.argmax(x[ok])
        ref = absolute[ok][k] * (x[ok] / x[ok][k]) ** 2
        ax.loglog(x[ok], ref, ":", color="grey", label="slope 2")
    ax.set_xlabel("single-detector rate (kHz)")
    ax.set_ylabel("coincidences per second")
    ax.legend(fontsize=8)


def _fig_mean_field(ax, result, spec):
    t = result.table
    x = t.column("phase_deg")
    ax.fill_between(x, t.column("lower"), t.column("upper"), color="tab:blue", alpha=0.25, label="vacuum-level spread")
    ax.plot(x, t.column("mean_field"), "-", label=r"$\langle E \rangle$")
    ax.axhline(0, color="grey", lw=0.5)
    ax.set_xlabel("space-time phase (deg)")
    ax.set_ylabel("field (single-photon units)")
    ax.legend(fontsize=8)


def emit(result, spec: RunSpec, out: str | None = None, fmt: str | None = None, stream=None) -> list:
    """Write the table (and, for scans with a file path, plot data and figure).

    Returns the list of files written; prints to ``stream`` (stdout) when no
    path is given.
    """
    fmt = fmt or spec.output.format
    out = out if out is not None else spec.output.path
    text = render(result, spec, fmt)
    if out is None or out == "-":
        (stream or sys.stdout).write(text)
        return []
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    written = [path]
    data = plot_data(result, spec.mode)
    if data is not None:
        dat = path.with_suffix(".plot.dat")
        dat.write_text(data)
        written.append(dat)
        if spec.output.plot:
            written.append(figure(result, spec, path.with_suffix(".png")))
    return written
