"""Weighted least-squares fit of bunching fringes, ``A [1 + V cos(2 l (phi - phi0))] / 2 + B``.

The model is linear in ``(c0, c1, c2)`` of ``c0 + c1 cos(2 l phi) + c2 sin(2 l phi)``.
``A`` and ``B`` only enter through ``A/2 + B``, so the baseline cannot be
fitted from the fringe alone; it is supplied (e.g. predicted accidentals) with
an optional uncertainty that is propagated into the covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    amplitude: float
    visibility: float
    phase_offset: float
    baseline: float
    covariance: np.ndarray
    reduced_chi_square: float
    l: int = 1

    def curve(self, phi):
        phi = np.asarray(phi, dtype=float)
        return self.amplitude * (1 + self.visibility * np.cos(2 * self.l * (phi - self.phase_offset))) / 2 + self.baseline

    @property
    def maximum(self) -> float:
        return self.baseline + self.amplitude * (1 + abs(self.visibility)) / 2

    @property
    def minimum(self) -> float:
        return self.baseline + self.amplitude * (1 - abs(self.visibility)) / 2

    @property
    def errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    @property
    def visibility_err(self) -> float:
        return float(self.errors[1])

    def to_dict(self) -> dict:
        names = ("amplitude", "visibility", "phase_offset", "baseline")
        return {
            **{n: float(getattr(self, n)) for n in names},
            **{f"{n}_err": float(e) for n, e in zip(names, self.errors)},
            "covariance": self.covariance.tolist(),
            "reduced_chi_square": float(self.reduced_chi_square),
            "l": int(self.l),
        }


def fit_cosine_arrays(phi, y, yerr=None, l: int = 1, baseline: float = 0.0, baseline_err: float = 0.0) -> FitResult:
    """Fit fringe data; ``phi`` in radians.

    With ``yerr`` the errors are taken as absolute; without them the covariance
    is scaled by the residual variance.  ``V`` is reported unclipped, so noisy
    data may give ``|V|`` slightly above 1.
    """
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    if phi.shape != y.shape or phi.ndim != 1:
        raise FitError("phi and y must be 1-d arrays of equal length")
    if len(phi) < 8:
        raise FitError(f"need at least 8 points, got {len(phi)}")
    x = 2 * l * phi
    design = np.column_stack([np.ones_like(x), np.cos(x), np.sin(x)])
    if np.linalg.matrix_rank(design, tol=1e-9 * len(x)) < 3:
        raise FitError("degenerate phase grid: fringe parameters are not identifiable")
    absolute = yerr is not None and np.all(np.asarray(yerr) > 0)
    sigma = np.asarray(yerr, dtype=float) if absolute else np.ones_like(y)
    w = 1.0 / sigma
    coef, *_ = np.linalg.lstsq(design * w[:, None], y * w, rcond=None)
    resid = (y - design @ coef) / sigma
    dof = len(y) - 3
    chi2 = float(resid @ resid)
    red = chi2 / dof if dof > 0 else float("nan")
    cov_c = np.linalg.inv((design * w[:, None]).T @ (design * w[:, None]))
    if not absolute:
        cov_c = cov_c * (red if dof > 0 and red > 0 else 0.0)

    c0, c1, c2 = coef
    amp = math.hypot(c1, c2)
    level = c0 - baseline
    if level == 0:
        raise FitError("fringe level equals the baseline; visibility undefined")
    visibility = amp / level
    psi = math.atan2(c2, c1)
    phase_offset = psi / (2 * l)

    cov_p = np.zeros((4, 4))
    cov_p[:3, :3] = cov_c
    cov_p[3, 3] = baseline_err**2
    jac = np.zeros((4, 4))  # rows: A, V, phi0, B; columns: c0, c1, c2, B
    jac[0] = [2.0, 0.0, 0.0, -2.0]
    if amp > 0:
        jac[1] = [-amp / level**2, c1 / (amp * level), c2 / (amp * level), amp / level**2]
        jac[2] = [0.0, -c2 / amp**2 / (2 * l), c1 / amp**2 / (2 * l), 0.0]
    else:
        jac[1] = [0.0, 1 / (math.sqrt(2) * level), 1 / (math.sqrt(2) * level), 0.0]
    jac[3] = [0.0, 0.0, 0.0, 1.0]
    cov = jac @ cov_p @ jac.T
    return FitResult(2 * level, visibility, phase_offset, baseline, cov, red, l)


def fit_cosine(table, l: int = 1, baseline: float = 0.0, baseline_err: float = 0.0) -> FitResult:
    """Fit the ``absolute_cc`` column of a phase-scan table against ``phi_deg``."""
    phi = np.radians(table.column("phi_deg"))
    y = table.column("absolute_cc")
    yerr = table.column("stderr") if "stderr" in table.columns else None
    return fit_cosine_arrays(phi, y, yerr, l, baseline, baseline_err)
