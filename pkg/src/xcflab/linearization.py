"""Linearizations of the normalized flows and their finite-difference oracles."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import chart as ch
from . import homogeneous as hg
from . import tensor_core as tc
from .errors import DomainError

FD_EPS = 1e-5
FIXED_POINT_TOL = 1e-10
IDENTITY_TOL = 1e-12

_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


def sym_basis():
    """Frobenius-orthonormal basis of symmetric 3x3 matrices."""
    out = []
    for i, j in _PAIRS:
        E = np.zeros((3, 3))
        if i == j:
            E[i, i] = 1.0
        else:
            E[i, j] = E[j, i] = 1.0 / np.sqrt(2.0)
        out.append(E)
    return np.array(out)


BASIS = sym_basis()


def sym_coords(S):
    return np.einsum("bij,ij->b", BASIS, S)


def sym_from_coords(v):
    return np.einsum("b,bij->ij", v, BASIS)


def _trace(g, h):
    return np.einsum("ij...,ij...->...", tc.inverse(g), h)


# -- constant-curvature forms ---------------------------------------------------

def apply_A_constant(h, lap_h, H, g, K):
    """``-K Delta h - 2 K^2 H g + 2 K^2 h`` at a metric of constant curvature ``K < 0``.

    The Lichnerowicz form ``-K (Delta_L h + 4 K h)`` with
    ``Delta_L h = Delta h + H Rc - R h`` is evaluated alongside and must agree.
    """
    if not K < 0:
        raise DomainError("K must be negative")
    h, lap_h, g = (np.asarray(a, dtype=float) for a in (h, lap_h, g))
    out = -K * lap_h - 2.0 * K * K * H * g + 2.0 * K * K * h
    lich = lap_h + H * (2.0 * K * g) - 6.0 * K * h
    other = -K * (lich + 4.0 * K * h)
    scale = max(1.0, float(np.abs(out).max()))
    if np.abs(out - other).max() > IDENTITY_TOL * scale:
        raise RuntimeError("Lichnerowicz form disagrees with the rough-Laplacian form")
    return out


def apply_knrf_lin(h, lap_h, H, g, K=-1.0):
    """``Delta h - 2 H g + 2 h``, the normalized Ricci flow linearization at curvature -1."""
    if K != -1.0:
        raise DomainError("the normalized Ricci linearization is stated for K = -1")
    return np.asarray(lap_h) - 2.0 * H * np.asarray(g) + 2.0 * np.asarray(h)


# -- finite-difference Frechet oracle ---------------------------------------------

@dataclass
class FrechetResult:
    value: np.ndarray
    half_step: np.ndarray
    eps: float

    @property
    def richardson_change(self):
        return float(np.abs(self.value - self.half_step).max())

    @property
    def extrapolated(self):
        # central differences: error ~ eps^2
        return self.half_step + (self.half_step - self.value) / 3.0


def fd_frechet(F: Callable, g, h, eps=FD_EPS):
    """Central difference ``(F(g + eps h) - F(g - eps h)) / (2 eps)`` plus an ``eps/2`` rerun."""
    def central(e):
        try:
            return (np.asarray(F(g + e * h)) - np.asarray(F(g - e * h))) / (2.0 * e)
        except DomainError as exc:
            raise DomainError(f"perturbed point left the domain of F: {exc}") from exc

    return FrechetResult(central(eps), central(eps / 2.0), eps)


# -- homogeneous substrate --------------------------------------------------------

@dataclass
class LinearizationReport:
    spec: hg.FlowSpec
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    richardson_change: float
    analytic: Optional[np.ndarray] = None
    gauge_term: Optional[np.ndarray] = None
    comparison: dict = field(default_factory=dict)

    def rayleigh(self, direction):
        """Rayleigh quotient and eigen-residual of ``jacobian`` on a symmetric-tensor direction."""
        v = sym_coords(direction)
        Jv = self.jacobian @ v
        lam = float(v @ Jv / (v @ v))
        return lam, float(np.linalg.norm(Jv - lam * v) / np.linalg.norm(v))

    @property
    def max_real(self):
        return float(self.eigenvalues.real.max())


def _matrix_of(op):
    return np.array([sym_coords(op(B)) for B in BASIS]).T


def frame_laplacian_matrix(g, C):
    G = hg.koszul_connection(C, g)
    return _matrix_of(lambda h: hg.li_tensor_laplacian(C, g, G, h))


def frame_gauge_matrix(g, C):
    """Matrix of ``h -> L_{Y(g, h)} g`` on left-invariant tensors."""
    G = hg.koszul_connection(C, g)
    return _matrix_of(lambda h: hg.deturck_field(g, G, h)[1])


def analytic_frame_operator(g, K, C):
    """``A_g`` assembled from the frame Laplacian; valid at constant curvature ``K``."""
    G = hg.koszul_connection(C, g)

    def op(h):
        lap = hg.li_tensor_laplacian(C, g, G, h)
        return apply_A_constant(h, lap, _trace(g, h), g, K)

    return _matrix_of(op)


def frame_jacobian(spec, g_star, C=None, eps=FD_EPS):
    """Finite-difference Jacobian of ``flow_rhs`` on the six left-invariant directions.

    For DXCF the result is compared with ``A_g``; for KXCF and KNRF with the
    gauge-free forms, and the gauge term ``L_{Y(g, h)} g`` is reported alongside.
    """
    C = hg.hyperbolic_model() if C is None else hg.structure_constants(C)
    g_star = tc.check_metric(g_star)
    rhs0 = hg.flow_rhs(spec, g_star, C)
    if np.abs(rhs0).max() > FIXED_POINT_TOL:
        raise DomainError(f"metric is not a fixed point of {spec.kind} (|rhs| = {np.abs(rhs0).max():.3g})")

    def F(g):
        return hg.flow_rhs(spec, g, C)

    cols, change = [], 0.0
    for B in BASIS:
        fr = fd_frechet(F, g_star, B, eps)
        change = max(change, fr.richardson_change)
        cols.append(sym_coords(fr.value))
    J = np.array(cols).T
    ev = np.linalg.eigvals(J)
    ev = ev[np.lexsort((-ev.imag, -ev.real))]
    report = LinearizationReport(spec, J, ev, change)

    K = spec.K
    curv = hg.sectional_curvatures(g_star, C)
    constant = np.allclose(curv, K, atol=1e-10)
    if spec.kind in ("DXCF", "KXCF", "KNRF") and constant:
        A = analytic_frame_operator(g_star, K, C)
        gauge = frame_gauge_matrix(g_star, C)
        if spec.kind == "DXCF":
            analytic = A
        elif spec.kind == "KXCF":
            analytic = A - K * gauge
        else:
            # the printed Ricci linearization omits the gauge term; add it back
            analytic = A + gauge
        report.analytic = analytic
        report.gauge_term = gauge
        report.comparison = {"max_abs_error": float(np.abs(J - analytic).max())}
        if spec.kind != "DXCF":
            report.comparison["max_abs_error_without_gauge"] = float(np.abs(J - A).max())
    return report


# -- symbol of the ungauged linearization -------------------------------------------

def buckland_symbol(Lam):
    """Principal symbol matrix of the ungauged linearization and its eigenvalues.

    Acts on ``(h11, h12, h13, h22, h33, h23)``; ``Lam`` is the symmetric
    coefficient matrix with ``Lam[0, 0] >= 0``.
    """
    Lam = np.asarray(Lam, dtype=float)
    if Lam.shape != (3, 3) or np.abs(Lam - Lam.T).max() > 0.0:
        raise DomainError("symbol input must be a symmetric 3x3 matrix")
    if Lam[0, 0] < 0:
        raise DomainError("Lambda^11 must be nonnegative")
    l11, l12, l13 = Lam[0]
    l22, l23, l33 = Lam[1, 1], Lam[1, 2], Lam[2, 2]
    S = np.array([
        [0, 0, 0, l22, l33, 2 * l23],
        [0, 0, 0, -l12, 0, -l13],
        [0, 0, 0, 0, -l13, -l12],
        [0, 0, 0, l11, 0, 0],
        [0, 0, 0, 0, l11, 0],
        [0, 0, 0, 0, 0, l11],
    ], dtype=float)
    ev = np.linalg.eigvals(S)
    return S, np.sort(ev.real)[::-1]


# -- chart substrate ----------------------------------------------------------------

def chart_cross(ctx, gbar, curvature=None):
    """Cross curvature tensor of a metric field (core)."""
    cv = ch.chart_curvature(ctx, gbar) if curvature is None else curvature
    gc = ctx.crop(gbar)
    E = tc.einstein(gc, cv.ricci, cv.scalar)
    return tc.cross_curvature(tc.dual(gc, E), cv.riemann)


def chart_dxcf_rhs(ctx, gbar, g=None, K=-1.0):
    """``-2 X(gbar) + K L_{Y(g, gbar)} g - 2 K^2 gbar`` on the core; g defaults to the Poincare metric."""
    g = ch.poincare_chart(ctx) if g is None else g
    G = ch.christoffel(ctx, g)
    Y = ch.deturck_vector(ctx, g, G, gbar)
    lie = ctx.crop(ch.lie_derivative_metric(ctx, g, G, Y))
    return -2.0 * chart_cross(ctx, gbar) + K * lie - 2.0 * K * K * ctx.crop(gbar)


def chart_xcf_rhs(ctx, gbar):
    return -2.0 * chart_cross(ctx, gbar)


def apply_A_general(ctx, gbar, h, K=-1.0, curvature=None):
    """Term-by-term evaluation of the general linearization display at ``gbar``.

    Readings fixed for the index-ambiguous terms: the first term contracts
    ``R^l_jik`` with ``S^j_l`` where ``S = Delta_L h + L_{Y(gbar, h)} gbar``;
    ``delta^2 h = g^ij g^kl nabla_i nabla_k h_jl``; mixed tensors are raised with
    ``gbar``.  Returns ``(A h, terms)`` on the core.
    """
    ch.check_support(ctx, h)
    cv = ch.chart_curvature(ctx, gbar) if curvature is None else curvature
    ops = ch.covariant_ops(ctx, gbar, h, cv)
    G = cv.christoffel
    gc, hc = ctx.crop(gbar), ctx.crop(h)
    gi = tc.inverse(gc)
    Y = ch.deturck_vector(ctx, gbar, G, h)
    lie = ctx.crop(ch.lie_derivative_metric(ctx, gbar, G, Y))
    S = ops.lichnerowicz + lie
    R, rc, s = cv.riemann, cv.ricci, cv.scalar
    W = ops.hessian  # W[a, e, b, c] = nabla_a nabla_e h_bc

    R_up = np.einsum("lm...,jikm...->ljik...", gi, R)          # R^l_jik
    rc_up = np.einsum("ja...,lb...,ab...->jl...", gi, gi, rc)  # Rc^jl
    rc_mix = np.einsum("ja...,al...->jl...", gi, rc)           # Rc^j_l
    h_mix = np.einsum("ja...,al...->jl...", gi, hc)            # h^j_l
    S_mix = np.einsum("ja...,al...->jl...", gi, S)

    lapH = np.einsum("ab...,cd...,abcd...->...", gi, gi, W)
    ddh = np.einsum("ij...,kl...,ikjl...->...", gi, gi, W)
    rch = np.einsum("ab...,ab...->...", rc_up, hc)

    terms = {
        "lichnerowicz_R": 0.5 * np.einsum("ljik...,jl...->ik...", R_up, S_mix),
        "lichnerowicz_scalar": -0.25 * s * S,
        "ricci_hessian": 0.5 * (np.einsum("pq...,ikpq...->ik...", rc_up, W)
                                - np.einsum("jq...,jkqi...->ik...", rc_up, W)
                                - np.einsum("jq...,iqjk...->ik...", rc_up, W)
                                + np.einsum("jq...,jqik...->ik...", rc_up, W)),
        "ricci_trace": -0.5 * rc * (lapH - ddh),
        "gauge": K * lie,
        "normalization": -2.0 * K * K * hc,
        "RRh_1": -np.einsum("lijk...,ml...,jm...->ik...",
                            np.einsum("lp...,ijkp...->lijk...", gi, R), rc_mix, h_mix),
        "RRh_2": 0.5 * np.einsum("lijm...,jl...,mk...->ik...",
                                 np.einsum("lp...,ijmp...->lijm...", gi, R), rc_mix, h_mix),
        "RRh_3": -0.5 * np.einsum("mijk...,jl...,lm...->ik...",
                                  np.einsum("mp...,ijkp...->mijk...", gi, R), rc_mix, h_mix),
        "ricci_pairing": -0.5 * rch * rc,
    }
    total = sum(terms.values())
    return 0.5 * (total + total.transpose(1, 0, 2, 3, 4)), terms


def apply_A_constant_chart(ctx, h, g=None, K=-1.0, curvature=None):
    """Constant-curvature operator evaluated fieldwise with the chart Laplacian."""
    g = ch.poincare_chart(ctx) if g is None else g
    ops = ch.covariant_ops(ctx, g, h, curvature)
    return apply_A_constant(ctx.crop(h), ops.laplacian, ops.trace, ctx.crop(g), K)


def relative_l2(ctx, g, a, b):
    """``|a - b|_{L2} / |b|_{L2}`` for core 2-tensor fields."""
    return float(np.sqrt(ch.norm2(ctx, g, a - b) / ch.norm2(ctx, g, b)))


def general_vs_frechet(ctx, gbar, h, K=-1.0, eps=FD_EPS):
    """Relative L2 gap between ``apply_A_general`` and the FD derivative of the DXCF field.

    The DeTurck reference is the linearization point ``gbar`` itself, matching
    the ``Y(gbar, h)`` slot of the general display.
    """
    A, terms = apply_A_general(ctx, gbar, h, K)
    fr = fd_frechet(lambda x: chart_dxcf_rhs(ctx, x, gbar, K), gbar, h, eps)
    return relative_l2(ctx, ctx.crop(gbar), A, fr.value), fr, terms
