"""Time integration of the six flows on a homogeneous substrate.

The state is the six upper-triangular components of the frame metric, which
keeps every stored metric exactly symmetric.  Stepping uses the Dormand-Prince
5(4) embedded pair with error-per-step control; samples are the accepted steps
and dense output is cubic Hermite interpolation through them.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.integrate import RK45
from scipy.interpolate import CubicHermiteSpline

from . import homogeneous as hg
from . import tensor_core as tc
from .errors import CurvatureSignError, DomainError, StiffnessError, UnderflowError
from .functionals import MonitorRecord, effvol_density, j_density

IU = np.triu_indices(3)
FIT_FLOOR = 1e-14
CONVERGING = ("KXCF", "NXCF", "DXCF", "KNRF")


def to_vector(g):
    return np.asarray(g, dtype=float)[IU]


def to_matrix(v):
    g = np.zeros((3, 3))
    g[IU] = v
    return g + np.triu(g, 1).T


def matched_hyperbolic(K):
    """Metric of curvature K on the standard hyperbolic model: ``(-1/K) I``."""
    return (-1.0 / K) * np.eye(3)


@dataclass
class Trajectory:
    spec: hg.FlowSpec
    times: np.ndarray
    metrics: np.ndarray
    rates: np.ndarray
    monitors: list = field(default_factory=list)
    status: str = "completed"
    C: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("trajectory times must be strictly increasing")

    @property
    def t_end(self):
        return float(self.times[-1])

    @property
    def final(self):
        return self.metrics[-1]

    def metric_at(self, t):
        """Cubic Hermite dense output; ``t`` may be scalar or an array."""
        spline = CubicHermiteSpline(self.times, self.metrics.reshape(len(self.times), 9),
                                    self.rates.reshape(len(self.times), 9))
        out = spline(np.asarray(t, dtype=float))
        return out.reshape(np.shape(t) + (3, 3))

    def deviation(self, g_target, t=None):
        ts = self.times if t is None else np.asarray(t, dtype=float)
        gs = self.metrics if t is None else self.metric_at(ts)
        return np.linalg.norm((gs - g_target).reshape(len(ts), 9), axis=1)


def _reference(spec):
    return spec.g_ref if spec.g_ref is not None else matched_hyperbolic(spec.K)


def monitor_record(spec, C, t, g, deviation=float("nan")):
    st = hg.frame_state(g, C)
    g_ref = _reference(spec)
    Y, _ = hg.deturck_field(g_ref, hg.koszul_connection(C, g_ref), g)
    try:
        jd = j_density(st.bundle.dual, g)
        ev = effvol_density(st.bundle.dual, g)
    except DomainError:
        jd = ev = float("nan")
    return MonitorRecord(float(t), jd, ev, st.triple, float(np.sqrt(Y @ g_ref @ Y)), float(deviation))


def attach_monitors(traj, g_target=None):
    """Recompute monitor records; deviation is measured from ``g_target`` when given."""
    recs = []
    for t, g in zip(traj.times, traj.metrics):
        dev = float(np.linalg.norm(g - g_target)) if g_target is not None else float("nan")
        recs.append(monitor_record(traj.spec, traj.C, t, g, dev))
    traj.monitors = recs
    return traj


def integrate(spec, g0, t_end, tol=1e-10, C=None, target="auto", max_step=np.inf, stops=None):
    """Integrate ``spec`` from ``g0`` on ``[0, t_end]``.

    The event guard is polled after every accepted step; leaving the domain
    truncates the trajectory and sets ``status``.  ``target="auto"`` measures
    the deviation monitor from the extrapolated late-time limit for the
    normalized flows.  ``stops`` are extra times the stepper must land on
    exactly (the solver restarts at each one).
    """
    C = hg.hyperbolic_model() if C is None else hg.structure_constants(C)
    g0 = tc.check_metric(g0, "g0")
    if not t_end > 0:
        raise DomainError("t_end must be positive")
    status0 = hg.event_guard(g0, C)
    if spec.kind in hg.XCF_FAMILY and status0 is not hg.GuardStatus.OK:
        raise CurvatureSignError(f"initial metric is outside the flow domain: {status0.value}")

    def rhs(_t, y):
        return to_vector(hg.flow_rhs(spec, to_matrix(y), C))

    bounds = [t_end]
    if stops is not None:
        st = np.unique(np.asarray(stops, dtype=float))
        bounds = [float(t) for t in st if 0.0 < t < t_end] + [t_end]
    times, metrics, rates = [0.0], [g0], [hg.flow_rhs(spec, g0, C)]
    status = "completed"
    for bound in bounds:
        solver = RK45(rhs, times[-1], to_vector(metrics[-1]), bound, rtol=tol, atol=tol,
                      max_step=max_step)
        status = _advance(solver, spec, C, times, metrics, rates)
        if status != "completed":
            break
    traj = Trajectory(spec, np.array(times), np.array(metrics), np.array(rates), status=status, C=C)
    if isinstance(target, str) and target == "auto":
        target = late_time_limit(traj) if spec.kind in CONVERGING and status == "completed" else None
    return attach_monitors(traj, target)


def _advance(solver, spec, C, times, metrics, rates):
    while solver.status == "running":
        try:
            msg = solver.step()
        except CurvatureSignError:
            return hg.GuardStatus.CURVATURE_SIGN_LOST.value
        except (DomainError, np.linalg.LinAlgError):
            return hg.GuardStatus.NOT_SPD.value
        if solver.status == "failed":
            raise StiffnessError(f"step size underflow at t={solver.t:.6g}: {msg}")
        g = to_matrix(solver.y)
        guard = hg.event_guard(g, C)
        if guard is hg.GuardStatus.NOT_SPD or (
                spec.kind in hg.XCF_FAMILY and guard is not hg.GuardStatus.OK):
            return guard.value
        times.append(solver.t)
        metrics.append(g)
        rates.append(hg.flow_rhs(spec, g, C))
    return "completed"


def late_time_limit(traj, span=0.1):
    """Aitken-extrapolated limit from three equally spaced late samples."""
    t3 = traj.t_end
    dt = span * t3 / 2.0
    g1, g2, g3 = traj.metric_at(np.array([t3 - 2 * dt, t3 - dt, t3]))
    d1, d2 = g2 - g1, g3 - g2
    n1, n2 = np.linalg.norm(d1), np.linalg.norm(d2)
    if n1 == 0.0 or n2 == 0.0 or n2 >= n1:
        return g3
    r = n2 / n1
    return g3 + d2 * r / (1.0 - r)


@dataclass(frozen=True)
class RescaleMap:
    """``psi(t) = A exp(2 K^2 t)`` and ``t~(t) = A^2 (exp(4 K^2 t) - 1) / (4 K^2)``."""

    K: float = -1.0
    A: float = 1.0

    def __post_init__(self):
        if not self.K < 0:
            raise DomainError("K must be negative")
        if not self.A > 0:
            raise DomainError("A must be positive")

    def psi(self, t):
        return self.A * np.exp(2.0 * self.K ** 2 * np.asarray(t, dtype=float))

    def dpsi(self, t):
        return 2.0 * self.K ** 2 * self.psi(t)

    def t_tilde(self, t):
        k2 = self.K ** 2
        return self.A ** 2 * np.expm1(4.0 * k2 * np.asarray(t, dtype=float)) / (4.0 * k2)


def rescale_xcf(traj, rmap):
    """Map a KXCF trajectory to the XCF trajectory ``(t~(t), psi(t) g(t))``."""
    if traj.spec.kind != "KXCF":
        raise DomainError(f"rescale_xcf needs a KXCF trajectory, got {traj.spec.kind}")
    if traj.spec.K != rmap.K:
        raise DomainError(f"K mismatch: trajectory {traj.spec.K}, map {rmap.K}")
    t = traj.times
    psi = rmap.psi(t)[:, None, None]
    metrics = psi * traj.metrics
    # dg~/dt~ = (psi' g + psi g') / psi^2
    rates = (rmap.dpsi(t)[:, None, None] * traj.metrics + psi * traj.rates) / psi ** 2
    out = Trajectory(hg.FlowSpec("XCF", K=traj.spec.K), rmap.t_tilde(t), metrics, rates,
                     status=traj.status, C=traj.C)
    return attach_monitors(out)


@dataclass(frozen=True)
class DecayFit:
    C: float
    omega: float
    residual: float

    def envelope(self, t):
        return self.C * np.exp(-self.omega * np.asarray(t, dtype=float))


def fit_exponential(t, d):
    """Least-squares fit of ``log d = log C - omega t``.

    ``residual`` is the largest relative misfit ``|d / fit - 1|``.
    """
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    if np.any(d < FIT_FLOOR):
        raise UnderflowError(f"signal drops below {FIT_FLOOR:g} inside the fit window")
    slope, intercept = np.polyfit(t, np.log(d), 1)
    fit = DecayFit(float(np.exp(intercept)), float(-slope), 0.0)
    resid = float(np.abs(d / fit.envelope(t) - 1.0).max())
    return replace(fit, residual=resid)


def default_window(t_end):
    return (0.25 * t_end, 0.9 * t_end)


def fit_decay_rate(traj, g_target, window=None, samples=64):
    """Fit ``|g(t) - g_target|_F ~ C exp(-omega t)`` on a window (default [0.25, 0.9] t_end)."""
    ta, tb = default_window(traj.t_end) if window is None else window
    if not 0 <= ta < tb <= traj.t_end:
        raise DomainError(f"fit window [{ta}, {tb}] not inside [0, {traj.t_end}]")
    t = np.linspace(ta, tb, samples)
    return fit_exponential(t, traj.deviation(g_target, t))
