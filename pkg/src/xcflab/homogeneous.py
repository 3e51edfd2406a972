"""Left-invariant geometry on three-dimensional Lie groups.

A left-invariant tensor is fixed by its components in a left-invariant frame
``e_1, e_2, e_3``, so connection, curvature, Laplacians and every flow
right-hand side reduce to finite-dimensional algebra on those components.

Index layout: structure constants ``C[k, i, j]`` mean ``[e_i, e_j] = C^k_ij e_k``
and connection coefficients ``G[k, i, j]`` mean ``nabla_{e_i} e_j = G^k_ij e_k``.
"""

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor_core as tc
from .errors import CurvatureSignError, DomainError

JACOBI_TOL = 1e-14
COMPAT_TOL = 1e-12

FLOW_KINDS = ("XCF", "KXCF", "NXCF", "DXCF", "RF", "KNRF")
XCF_FAMILY = ("XCF", "KXCF", "NXCF", "DXCF")


def structure_constants(C):
    """Validate bracket coefficients: antisymmetry and the Jacobi identity."""
    C = np.asarray(C, dtype=float)
    if C.shape != (3, 3, 3):
        raise DomainError(f"structure constants must have shape (3, 3, 3), got {C.shape}")
    if np.abs(C + C.transpose(0, 2, 1)).max() > 0.0:
        raise DomainError("structure constants are not antisymmetric in (i, j)")
    if jacobi_residual(C) > JACOBI_TOL * max(1.0, np.abs(C).max() ** 2):
        raise DomainError("structure constants violate the Jacobi identity")
    return C


def jacobi_residual(C):
    # [[e_i, e_j], e_k] + cyclic, expanded in the basis.
    CC = np.einsum("mij,nmk->nijk", C, C)
    cyc = CC + CC.transpose(0, 2, 3, 1) + CC.transpose(0, 3, 1, 2)
    return float(np.abs(cyc).max())


def solvable_model(A):
    """Semidirect product R x_A R^2 with ``ad(e_3)`` acting on span(e_1, e_2) by ``A``."""
    A = np.asarray(A, dtype=float)
    C = np.zeros((3, 3, 3))
    for j in range(2):
        for k in range(2):
            C[k, 2, j] = A[k, j]
            C[k, j, 2] = -A[k, j]
    return C


def hyperbolic_model():
    """``[e_3, e_1] = e_1``, ``[e_3, e_2] = e_2``; the identity metric has curvature -1.

    Every left-invariant metric on this group has constant sectional curvature
    ``-(g^{-1})_33``.
    """
    return solvable_model(np.eye(2))


def koszul_connection(C, g):
    """Levi-Civita coefficients of a left-invariant metric.

    ``<nabla_i e_j, e_k> = (c_ijk - c_jki + c_kij) / 2`` with ``c_ijk = <[e_i, e_j], e_k>``.
    """
    g = tc.check_metric(g)
    c = np.einsum("mij,mk->ijk", C, g)
    low = 0.5 * (c - np.einsum("jki->ijk", c) + np.einsum("kij->ijk", c))
    return np.einsum("ijk,kl->lij", low, np.linalg.inv(g))


def connection_residuals(C, g, G):
    """(metric-compatibility residual, torsion residual) of connection coefficients."""
    low = np.einsum("lij,lk->ijk", G, g)
    compat = np.abs(low + low.transpose(0, 2, 1)).max()
    torsion = np.abs(G - G.transpose(0, 2, 1) - C).max()
    return float(compat), float(torsion)


def li_curvature(C, g, G=None):
    """Frame Riemann tensor ``R_ijkl`` of a left-invariant metric."""
    g = tc.check_metric(g)
    if G is None:
        G = koszul_connection(C, g)
    scale = max(1.0, np.abs(G).max())
    if max(connection_residuals(C, g, G)) > COMPAT_TOL * scale:
        raise DomainError("connection is not the Levi-Civita connection of (C, g)")
    # nabla_i nabla_j e_k = G^m_jk G^l_im e_l since coefficients are constant.
    t = np.einsum("mjk,lim->lijk", G, G)
    r_up = t - t.transpose(0, 2, 1, 3) - np.einsum("mij,lmk->lijk", C, G)
    return np.einsum("mijk,lm->ijkl", r_up, g)


def covariant_derivative(G, h):
    """``(nabla_a h)_bc`` for a left-invariant covariant 2-tensor."""
    return -np.einsum("dab,dc->abc", G, h) - np.einsum("dac,bd->abc", G, h)


def _along(G, v, h):
    return np.einsum("a,abc->bc", v, covariant_derivative(G, h))


def li_tensor_laplacian(C, g, G, h):
    """Rough Laplacian ``sum_i (nabla_ui nabla_ui h - nabla_(nabla_ui ui) h)``.

    The orthonormal frame ``u_i`` comes from the Cholesky factor of g.
    """
    h = np.asarray(h, dtype=float)
    U = tc.orthonormal_frame(g)
    out = np.zeros((3, 3))
    for i in range(3):
        u = U[:, i]
        nuu = np.einsum("a,b,dab->d", u, u, G)
        out += _along(G, u, _along(G, u, h)) - _along(G, nuu, h)
    return 0.5 * (out + out.T)


def deturck_field(g_ref, G_ref, h):
    """DeTurck vector ``Y(g_ref, h)`` and its Lie term ``L_Y g_ref``.

    On left-invariant tensors the trace ``g_ref^ij h_ij`` is constant, so only
    the divergence part survives: ``Y^l = -g^kl g^ij nabla_i h_jk``.
    """
    gi = np.linalg.inv(g_ref)
    Y = -np.einsum("kl,ij,ijk->l", gi, gi, covariant_derivative(G_ref, h))
    Y_low = g_ref @ Y
    dY = -np.einsum("kij,k->ij", G_ref, Y_low)
    return Y, dY + dY.T


@dataclass(frozen=True)
class FlowSpec:
    kind: str
    K: float = -1.0
    g_ref: Optional[np.ndarray] = None

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        if kind not in FLOW_KINDS:
            raise DomainError(f"unknown flow kind {self.kind!r}")
        if not self.K < 0:
            raise DomainError("normalization constant K must be negative")
        if kind == "DXCF":
            if self.g_ref is None:
                raise DomainError("DXCF needs a reference metric")
            object.__setattr__(self, "g_ref", tc.check_metric(self.g_ref, "g_ref"))
        elif self.g_ref is not None:
            raise DomainError(f"{kind} takes no reference metric")


@dataclass(frozen=True)
class FrameState:
    """Everything flow_rhs and the monitors need at one frame metric."""

    g: np.ndarray
    connection: np.ndarray
    bundle: tc.CurvatureBundle

    @property
    def triple(self):
        return self.bundle.p_eigenvalues


def frame_state(g, C):
    g = tc.check_metric(g)
    G = koszul_connection(C, g)
    R = li_curvature(C, g, G)
    return FrameState(g, G, tc.contract_to_bundle(g, R))


def flow_rhs(spec, g, C, state=None):
    """Time derivative of the frame metric under the flow named by ``spec``."""
    st = state if state is not None else frame_state(g, C)
    g = st.g
    b = st.bundle
    K = spec.K
    if spec.kind in XCF_FAMILY and min(b.p_eigenvalues) <= 0.0:
        raise CurvatureSignError(
            f"{spec.kind} needs negative sectional curvature; P eigenvalues {b.p_eigenvalues}")
    if spec.kind == "XCF":
        out = -2.0 * b.cross
    elif spec.kind == "KXCF":
        out = -2.0 * b.cross - 2.0 * K * K * g
    elif spec.kind == "NXCF":
        x = np.einsum("ij,ij->", np.linalg.inv(g), b.cross)
        out = -2.0 * b.cross + (2.0 / 3.0) * x * g
    elif spec.kind == "DXCF":
        G_ref = koszul_connection(C, spec.g_ref)
        _, lie = deturck_field(spec.g_ref, G_ref, g)
        out = -2.0 * b.cross + K * lie - 2.0 * K * K * g
    elif spec.kind == "RF":
        out = -2.0 * b.ricci
    else:
        out = -2.0 * b.ricci + 4.0 * K * g
    return 0.5 * (out + out.T)


class GuardStatus(str, enum.Enum):
    OK = "OK"
    NOT_SPD = "NotSPD"
    CURVATURE_SIGN_LOST = "CurvatureSignLost"


def event_guard(g, C):
    """Classify a state as inside or outside the domain of the cross-curvature flows."""
    if not tc.is_spd(g):
        return GuardStatus.NOT_SPD
    if min(frame_state(g, C).triple) <= 0.0:
        return GuardStatus.CURVATURE_SIGN_LOST
    return GuardStatus.OK


def sectional_curvatures(g, C):
    """Sectional curvatures of the three frame planes (e2e3, e1e3, e1e2)."""
    g = tc.check_metric(g)
    R = li_curvature(C, g)
    out = []
    for i, j in ((1, 2), (0, 2), (0, 1)):
        area = g[i, i] * g[j, j] - g[i, j] ** 2
        out.append(R[i, j, j, i] / area)
    return np.array(out)
