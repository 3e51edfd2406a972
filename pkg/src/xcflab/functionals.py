"""Densities of the J functional and of the effective volume, and trajectory monitors.

On a homogeneous substrate every integrand is constant, so the integrals are a
fixed volume factor times the density; that factor cancels from every
monotonicity statement and is dropped.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import tensor_core as tc
from .errors import RegimeError

MONOTONE_TOL = 1e-10


@dataclass(frozen=True)
class MonitorRecord:
    t: float
    j_density: float
    effvol_density: float
    triple: tuple
    y_norm: float
    deviation: float


def _relative_eigenvalues(P, g):
    P = np.asarray(P, dtype=float)
    g = np.eye(3) if g is None else g
    lam = tc.p_eigenvalues(g, 0.5 * (P + P.T))
    if lam.min() <= 0.0:
        raise RegimeError(f"P is not positive definite (eigenvalues {lam}); "
                          "the metric left the negative-curvature regime")
    return lam


def j_density(P, g=None):
    """``tr(P)/3 - det(P)^(1/3)`` with trace and determinant taken relative to g.

    Nonnegative by AM-GM, zero exactly when the three eigenvalues agree.
    """
    lam = _relative_eigenvalues(P, g)
    return float(lam.mean() - np.cbrt(lam.prod()))


def effvol_density(P, g):
    """``sqrt(det P) sqrt(det g)``; ``det P`` is the determinant of ``P^i_j``."""
    lam = _relative_eigenvalues(P, g)
    return float(np.sqrt(lam.prod()) * np.sqrt(tc.det(g)))


@dataclass
class MonotonicityReport:
    times: np.ndarray
    j: np.ndarray
    effvol: np.ndarray
    j_violations: list = field(default_factory=list)
    effvol_violations: list = field(default_factory=list)
    truncated_at: Optional[float] = None
    y_fit: Optional[object] = None

    @property
    def violations(self):
        return len(self.j_violations) + len(self.effvol_violations)


def monitor_trajectory(traj, tol=MONOTONE_TOL):
    """Discrete monotonicity check of J (nonincreasing) and effective volume (nondecreasing).

    Flags are raised only for plain XCF; other flows are reported without
    assertions.  For DXCF the gauge-field norm is additionally fitted to an
    exponential.
    """
    from .flow import fit_exponential

    times, js, vols = [], [], []
    truncated = None
    for rec in traj.monitors:
        if min(rec.triple) <= 0.0 or not np.isfinite(rec.j_density):
            truncated = rec.t
            break
        times.append(rec.t)
        js.append(rec.j_density)
        vols.append(rec.effvol_density)
    report = MonotonicityReport(np.array(times), np.array(js), np.array(vols), truncated_at=truncated)
    if traj.spec.kind == "XCF":
        for i in range(len(js) - 1):
            if js[i + 1] - js[i] > tol * max(1.0, abs(js[i])):
                report.j_violations.append(i + 1)
            if vols[i] - vols[i + 1] > tol * max(1.0, abs(vols[i])):
                report.effvol_violations.append(i + 1)
    if traj.spec.kind == "DXCF" and len(times) > 4:
        t = np.array(times)
        y = np.array([r.y_norm for r in traj.monitors[: len(times)]])
        t_end = t[-1]
        mask = (t >= 0.25 * t_end) & (t <= 0.9 * t_end)
        if mask.sum() >= 3 and np.all(y[mask] > 0):
            report.y_fit = fit_exponential(t[mask], y[mask])
    return report
