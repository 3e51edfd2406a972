"""Finite-difference tensor calculus on a cube chart of the Poincare ball.

Fields are numpy arrays with component axes first and three grid axes last.
Every field lives on the padded grid: the ``N^3`` core nodes plus ``ghost``
layers on each side.  Metrics are analytic and test tensors are compactly
supported, so both can be sampled on the ghost layers.  Each 4th-order central
difference invalidates its two outermost layers; with four ghost layers every
quantity that needs at most two derivatives is exact on the core, which is
where results are read off (``ChartContext.crop``).
"""

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import simpson

from . import tensor_core as tc
from .errors import DomainError

SUPPORT_MARGIN = 4
MAGIC = b"XCFCHART"


@dataclass(frozen=True)
class ChartContext:
    N: int = 33
    L: float = 0.5
    ghost: int = 4

    def __post_init__(self):
        if self.N < 17 or self.N % 2 == 0:
            raise DomainError(f"grid count N must be odd and >= 17, got {self.N}")
        if not 0 < self.L <= 0.5:
            raise DomainError(f"half-width L must lie in (0, 0.5], got {self.L}")
        if self.ghost < 4:
            raise DomainError("at least four ghost layers are needed for curvature")

    @property
    def spacing(self):
        return 2.0 * self.L / (self.N - 1)

    @property
    def M(self):
        return self.N + 2 * self.ghost

    @cached_property
    def axis(self):
        return -self.L + self.spacing * (np.arange(self.M) - self.ghost)

    @cached_property
    def coords(self):
        """Node coordinates, shape ``(3, M, M, M)``."""
        return np.array(np.meshgrid(self.axis, self.axis, self.axis, indexing="ij"))

    @property
    def core(self):
        s = slice(self.ghost, self.ghost + self.N)
        return (Ellipsis, s, s, s)

    def crop(self, f):
        return f[self.core]

    def zeros(self, *comp):
        return np.zeros(comp + (self.M,) * 3)


# -- finite differences ----------------------------------------------------

def _shift(f, axis, k):
    n = f.shape[axis]
    sl = [slice(None)] * f.ndim
    sl[axis] = slice(2 + k, n - 2 + k)
    return f[tuple(sl)]


def _interior(f, axis):
    sl = [slice(None)] * f.ndim
    sl[axis] = slice(2, f.shape[axis] - 2)
    return tuple(sl)


def diff(ctx, f, a):
    """4th-order central first derivative along grid axis ``a``."""
    axis = f.ndim - 3 + a
    out = np.zeros_like(f)
    out[_interior(f, axis)] = (_shift(f, axis, -2) - 8.0 * _shift(f, axis, -1)
                               + 8.0 * _shift(f, axis, 1) - _shift(f, axis, 2)) / (12.0 * ctx.spacing)
    return out


def diff2(ctx, f, a):
    """4th-order central second derivative along grid axis ``a``."""
    axis = f.ndim - 3 + a
    out = np.zeros_like(f)
    out[_interior(f, axis)] = (-_shift(f, axis, -2) + 16.0 * _shift(f, axis, -1) - 30.0 * _shift(f, axis, 0)
                               + 16.0 * _shift(f, axis, 1) - _shift(f, axis, 2)) / (12.0 * ctx.spacing ** 2)
    return out


def gradient(ctx, f):
    """``out[a, ...] = d_a f``."""
    return np.stack([diff(ctx, f, a) for a in range(3)])


def hessian(ctx, f):
    """``out[a, b, ...] = d_a d_b f``; compact stencil on the diagonal."""
    d1 = gradient(ctx, f)
    out = np.empty((3, 3) + f.shape)
    for a in range(3):
        out[a, a] = diff2(ctx, f, a)
        for b in range(a + 1, 3):
            out[a, b] = out[b, a] = diff(ctx, d1[b], a)
    return out


# -- metrics and curvature -------------------------------------------------

def poincare_chart(ctx):
    """``g_ij = 4 delta_ij / (1 - |x|^2)^2`` on the padded grid."""
    r2 = np.sum(ctx.coords ** 2, axis=0)
    return np.einsum("ij,...->ij...", np.eye(3), 4.0 / (1.0 - r2) ** 2)


def poincare_christoffel(ctx):
    """Closed-form Christoffel symbols of the Poincare metric (cross-check oracle)."""
    x = ctx.coords
    dl = 2.0 * x / (1.0 - np.sum(x ** 2, axis=0))
    d = np.eye(3)
    return (np.einsum("ki,j...->kij...", d, dl) + np.einsum("kj,i...->kij...", d, dl)
            - np.einsum("ij,k...->kij...", d, dl))


def check_field_metric(ctx, g):
    if g.shape != (3, 3) + (ctx.M,) * 3:
        raise DomainError(f"metric field has shape {g.shape}, expected {(3, 3) + (ctx.M,) * 3}")
    ev = np.linalg.eigvalsh(np.moveaxis(ctx.crop(g), (0, 1), (-2, -1)))
    if ev.min() <= 0.0:
        idx = np.unravel_index(np.argmin(ev.min(axis=-1)), ev.shape[:-1])
        raise DomainError(f"metric is not positive definite at core node {tuple(int(i) for i in idx)}")


def christoffel(ctx, g):
    """``G[k, i, j] = Gamma^k_ij`` from 4th-order differences of g."""
    dg = gradient(ctx, g)  # dg[c, a, b] = d_c g_ab
    # low[i, j, l] = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    low = 0.5 * (dg + np.einsum("jil...->ijl...", dg)
                 - np.einsum("lij...->ijl...", dg))
    return np.einsum("kl...,ijl...->kij...", tc.inverse(g), low)


@dataclass
class ChartCurvature:
    """Curvature of a metric field; ``christoffel`` is padded, the rest are core-cropped."""

    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray


def chart_curvature(ctx, g):
    check_field_metric(ctx, g)
    G = christoffel(ctx, g)
    gc = ctx.crop(g)
    Gc = ctx.crop(G)
    R = np.zeros((3, 3, 3, 3) + (ctx.N,) * 3)
    for m in range(3):
        dG = ctx.crop(gradient(ctx, G[m]))  # dG[i, j, k] = d_i Gamma^m_jk
        quad = np.einsum("ip...,pjk...->ijk...", Gc[m], Gc)
        r_m = dG - dG.transpose(1, 0, 2, 3, 4, 5) + quad - quad.transpose(1, 0, 2, 3, 4, 5)
        R += np.einsum("ijk...,l...->ijkl...", r_m, gc[:, m])
    rc = tc.ricci(gc, R)
    return ChartCurvature(G, R, rc, tc.scalar(gc, rc))


# -- covariant calculus ----------------------------------------------------

def covariant_h(ctx, G, h):
    """``D[a, b, c] = nabla_a h_bc`` (padded)."""
    return (gradient(ctx, h) - np.einsum("dab...,dc...->abc...", G, h)
            - np.einsum("dac...,bd...->abc...", G, h))


def second_covariant_h(ctx, G, h, D=None):
    """``W[a, e, b, c] = nabla_a nabla_e h_bc`` (valid on the core)."""
    if D is None:
        D = covariant_h(ctx, G, h)
    gh = np.einsum("deb...,dc...->ebc...", G, h) + np.einsum("dec...,bd...->ebc...", G, h)
    dD = hessian(ctx, h) - gradient(ctx, gh)
    return (dD - np.einsum("dae...,dbc...->aebc...", G, D)
            - np.einsum("dab...,edc...->aebc...", G, D) - np.einsum("dac...,ebd...->aebc...", G, D))


def covariant_vector(ctx, G, Y_low):
    """``nabla_i Y_j`` for a covector field."""
    return gradient(ctx, Y_low) - np.einsum("kij...,k...->ij...", G, Y_low)


def deturck_vector(ctx, g, G, h):
    """``Y^l(g, h) = 1/2 g^kl d_k(g^ij h_ij) - g^kl g^ij nabla_i h_jk`` (padded).

    ``g`` supplies the inverse and the connection ``G``; ``h`` is differentiated.
    """
    gi = tc.inverse(g)
    tr = np.einsum("ij...,ij...->...", gi, h)
    div = np.einsum("ij...,ijk...->k...", gi, covariant_h(ctx, G, h))
    return np.einsum("kl...,k...->l...", gi, 0.5 * gradient(ctx, tr) - div)


def lie_derivative_metric(ctx, g, G, Y):
    """``(L_Y g)_ij = nabla_i Y_j + nabla_j Y_i`` (valid on the core)."""
    dY = covariant_vector(ctx, G, np.einsum("jl...,l...->j...", g, Y))
    return dY + dY.transpose(1, 0, 2, 3, 4)


def lichnerowicz(g, h, lap, R, rc):
    """``Delta_L h = Delta h + 2 R_ijlk h^jl - Rc_i^p h_pk - Rc_k^p h_ip`` (core fields)."""
    gi = tc.inverse(g)
    h_up = np.einsum("ja...,lb...,ab...->jl...", gi, gi, h)
    rc_mixed = np.einsum("ip...,pq...->iq...", rc, gi)
    rch = np.einsum("iq...,qk...->ik...", rc_mixed, h)
    return lap + 2.0 * np.einsum("ijlk...,jl...->ik...", R, h_up) - rch - rch.transpose(1, 0, 2, 3, 4)


@dataclass
class CovariantOps:
    """Derived fields of ``h`` on the core grid."""

    nabla: np.ndarray
    laplacian: np.ndarray
    lichnerowicz: np.ndarray
    divergence: np.ndarray
    T: np.ndarray
    trace: np.ndarray
    hessian: np.ndarray


def check_support(ctx, h, margin=SUPPORT_MARGIN):
    """Reject fields that are nonzero within ``margin`` nodes of the core boundary."""
    mask = np.ones((ctx.M,) * 3, dtype=bool)
    lo, hi = ctx.ghost + margin, ctx.ghost + ctx.N - margin
    mask[lo:hi, lo:hi, lo:hi] = False
    if np.any(h[..., mask] != 0.0):
        raise DomainError(f"field support reaches within {margin} nodes of the chart boundary")


def covariant_ops(ctx, g, h, curvature=None):
    check_support(ctx, h)
    curv = chart_curvature(ctx, g) if curvature is None else curvature
    G = curv.christoffel
    D = covariant_h(ctx, G, h)
    W = ctx.crop(second_covariant_h(ctx, G, h, D))
    gc, hc, Dc = ctx.crop(g), ctx.crop(h), ctx.crop(D)
    gi = tc.inverse(gc)
    lap = np.einsum("ae...,aebc...->bc...", gi, W)
    H = np.einsum("ij...,ij...->...", gi, hc)
    lic = lichnerowicz(gc, hc, lap, curv.riemann, curv.ricci)
    div = -np.einsum("ij...,ijk...->k...", gi, Dc)
    T = Dc.transpose(1, 2, 0, 3, 4, 5) - Dc  # T_ijk = nabla_k h_ij - nabla_i h_jk
    return CovariantOps(Dc, lap, lic, div, T, H, W)


# -- norms and quadrature ---------------------------------------------------

def l2_quadrature(ctx, g, f):
    """Composite Simpson integral of a core scalar field against ``sqrt(det g)``."""
    gc = ctx.crop(g) if g.shape[-1] == ctx.M else g
    f = ctx.crop(f) if f.shape[-1] == ctx.M else f
    w = np.sqrt(tc.det(gc))
    val = w * f
    dx = ctx.spacing
    for _ in range(3):
        val = simpson(val, dx=dx, axis=0)
    return float(val)


def pointwise_norm2(g, T):
    """``|T|_g^2`` for a covariant tensor of rank 1, 2 or 3 (core fields)."""
    gi = tc.inverse(g)
    r = T.ndim - 3
    if r == 0:
        return T * T
    if r == 1:
        return np.einsum("ab...,a...,b...->...", gi, T, T)
    if r == 2:
        return np.einsum("ac...,bd...,ab...,cd...->...", gi, gi, T, T)
    if r == 3:
        return np.einsum("ad...,be...,cf...,abc...,def...->...", gi, gi, gi, T, T)
    raise DomainError(f"unsupported tensor rank {r}")


def norm2(ctx, g, T):
    gc = ctx.crop(g) if g.shape[-1] == ctx.M else g
    return l2_quadrature(ctx, gc, pointwise_norm2(gc, T))


# -- test fields -------------------------------------------------------------

def bump_tensor(ctx, seed, center=(0.0, 0.0, 0.0), radius=None, modulation=0.5, power=4):
    """Seeded, compactly supported symmetric tensor field.

    Envelope ``(1 - |x - c|^2 / r^2)^power`` (clamped at zero) times a random
    symmetric matrix plus a random linear modulation.  The default radius is
    the largest one whose support, widened by four nodes, fits in the chart.
    The envelope is only ``C^(power-1)`` across the support edge, which caps
    the L2 convergence order of 4th-order stencils at ``power - 1.5``.
    """
    c = np.asarray(center, dtype=float)
    if radius is None:
        radius = ctx.L - SUPPORT_MARGIN * ctx.spacing - np.abs(c).max() - 1e-12
    if radius < 0:
        raise DomainError("bump radius must be nonnegative")
    if np.any(np.abs(c) + radius + SUPPORT_MARGIN * ctx.spacing > ctx.L + 1e-12):
        raise DomainError("bump support plus a four-node margin must lie inside the chart")
    if radius == 0:
        return ctx.zeros(3, 3)
    rng = np.random.default_rng(seed)

    def sym():
        A = rng.standard_normal((3, 3))
        return 0.5 * (A + A.T)

    base, lin = sym(), [modulation * sym() for _ in range(3)]
    y = (ctx.coords - c[:, None, None, None]) / radius
    env = np.clip(1.0 - np.sum(y ** 2, axis=0), 0.0, None) ** power
    field = np.einsum("ij,...->ij...", base, env)
    for a in range(3):
        field += np.einsum("ij,...->ij...", lin[a], env * y[a])
    return field


def scalar_bump(ctx, center=(0.0, 0.0, 0.0), radius=None):
    """Scalar envelope ``(1 - |x - c|^2 / r^2)^4`` used for conformal test tensors."""
    c = np.asarray(center, dtype=float)
    if radius is None:
        radius = ctx.L - SUPPORT_MARGIN * ctx.spacing - np.abs(c).max() - 1e-12
    y = (ctx.coords - c[:, None, None, None]) / radius
    return np.clip(1.0 - np.sum(y ** 2, axis=0), 0.0, None) ** 4



def random_bump(ctx, seed, max_offset=0.1):
    """``bump_tensor`` with a seeded center in ``[-max_offset, max_offset]^3``."""
    center = np.random.default_rng([seed, 1]).uniform(-max_offset, max_offset, 3)
    return bump_tensor(ctx, seed, center)

# -- field dump ----------------------------------------------------------------

def dump_field(path, ctx, field, order="C"):
    """Write a core field as a fixed header plus row-major float64 payload.

    Header (little endian): magic ``XCFCHART``, int32 N, float64 L, int32 rank,
    int32 component count, then the component index tuples as int32.
    """
    f = ctx.crop(field) if field.shape[-1] == ctx.M else field
    rank = f.ndim - 3
    comps = list(np.ndindex(*f.shape[:rank])) if rank else [()]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<idii", ctx.N, ctx.L, rank, len(comps)))
        for idx in comps:
            fh.write(struct.pack(f"<{rank}i", *idx) if rank else b"")
        fh.write(np.ascontiguousarray(f, dtype="<f8").tobytes(order))


def load_field(path):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise DomainError(f"{path} is not a chart field dump")
        N, L, rank, ncomp = struct.unpack("<idii", fh.read(struct.calcsize("<idii")))
        fh.read(struct.calcsize(f"<{rank}i") * ncomp if rank else 0)
        data = np.frombuffer(fh.read(), dtype="<f8")
    shape = (3,) * rank + (N,) * 3
    return ChartContext(N=N, L=L), data.reshape(shape)


def interior_mask(ctx, radius=None):
    """Core nodes inside the ball ``|x| <= radius`` (default ``L - 4 h``, where test fields live).

    Pass a fixed radius when comparing grids, since the default grows with N.
    """
    r = np.sqrt(np.sum(ctx.crop(ctx.coords) ** 2, axis=0))
    radius = ctx.L - SUPPORT_MARGIN * ctx.spacing if radius is None else radius
    return r <= radius + 1e-12


# -- Bochner identity and the quadratic form -------------------------------

@dataclass
class KoisoResult:
    grad2: float
    div2: float
    T2: float
    H2: float
    h2: float
    curvature_term: float
    residual_general: float
    residual_reduced: float

    @property
    def rhs_general(self):
        return self.div2 + 0.5 * self.T2 + self.curvature_term

    @property
    def rhs_reduced(self):
        return self.div2 + 0.5 * self.T2 - self.H2 + 3.0 * self.h2


def _relative(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def koiso_check(ctx, h, g=None, curvature=None):
    """Both sides of the Bochner identity for a compactly supported h.

    General form: ``|nabla h|^2 = |delta h|^2 + |T|^2/2 + int (R_ijkl h^il h^jk - R_i^k h_jk h^ij)``;
    reduced form at curvature -1: ``... - |H|^2 + 3 |h|^2``.
    """
    g = poincare_chart(ctx) if g is None else g
    curv = chart_curvature(ctx, g) if curvature is None else curvature
    ops = covariant_ops(ctx, g, h, curv)
    gc, hc = ctx.crop(g), ctx.crop(h)
    gi = tc.inverse(gc)
    h_up = np.einsum("ia...,jb...,ab...->ij...", gi, gi, hc)
    rc_mixed = np.einsum("ip...,pk...->ik...", gi, curv.ricci)
    integrand = (np.einsum("ijkl...,il...,jk...->...", curv.riemann, h_up, h_up)
                 - np.einsum("ik...,jk...,ij...->...", rc_mixed, hc, h_up))
    res = KoisoResult(
        grad2=norm2(ctx, gc, ops.nabla),
        div2=norm2(ctx, gc, ops.divergence),
        T2=norm2(ctx, gc, ops.T),
        H2=norm2(ctx, gc, ops.trace),
        h2=norm2(ctx, gc, hc),
        curvature_term=l2_quadrature(ctx, gc, integrand),
        residual_general=0.0,
        residual_reduced=0.0,
    )
    res.residual_general = _relative(res.grad2, res.rhs_general)
    res.residual_reduced = _relative(res.grad2, res.rhs_reduced)
    return res


def operator_A(g, h, lap):
    """``A h = Delta h - 2 H g + 2 h`` (linearization at curvature -1), core fields."""
    H = np.einsum("ij...,ij...->...", tc.inverse(g), h)
    return lap - 2.0 * H * g + 2.0 * h


def quadratic_form(ctx, h, g=None, curvature=None):
    """``(int <A h, h> dmu, -|H|^2 - |h|^2)``; the first should not exceed the second."""
    g = poincare_chart(ctx) if g is None else g
    ops = covariant_ops(ctx, g, h, curvature)
    gc, hc = ctx.crop(g), ctx.crop(h)
    gi = tc.inverse(gc)
    Ah = operator_A(gc, hc, ops.laplacian)
    lhs = l2_quadrature(ctx, gc, np.einsum("ac...,bd...,ab...,cd...->...", gi, gi, Ah, hc))
    rhs = -norm2(ctx, gc, ops.trace) - norm2(ctx, gc, hc)
    return lhs, rhs
