"""Pointwise curvature algebra in three dimensions.

Tensors are numpy arrays with their index axes first.  Any trailing axes are
treated as a batch (for example grid nodes), so every function here works on a
single 3x3 frame metric as well as on a whole chart field of shape
``(3, 3, nx, ny, nz)``.

Sign conventions: ``R_ijkl = g_lm R^m_ijk`` with ``R(e_i, e_j)e_k = R^m_ijk e_m``
and ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X, Y]``, so ``R_ijji`` (i != j) are
sectional curvatures.  Ricci is ``Rc_jk = g^il R_ijkl``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

SYM_TOL = 1e-12


def _to_last(a, n):
    return np.moveaxis(a, tuple(range(n)), tuple(range(-n, 0)))


def _to_first(a, n):
    return np.moveaxis(a, tuple(range(-n, 0)), tuple(range(n)))


def inverse(g):
    """Inverse of a (batch of) 3x3 matrices stored index-first."""
    g = np.asarray(g, dtype=float)
    if g.ndim == 2:
        return np.linalg.inv(g)
    return _to_first(np.linalg.inv(_to_last(g, 2)), 2)


def det(g):
    g = np.asarray(g, dtype=float)
    if g.ndim == 2:
        return float(np.linalg.det(g))
    return np.linalg.det(_to_last(g, 2))


def check_metric(g, name="g"):
    """Validate a frame metric (3x3 symmetric positive definite) and return it as floats."""
    g = np.asarray(g, dtype=float)
    if g.shape != (3, 3):
        raise DomainError(f"{name} must be 3x3, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise DomainError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.abs(g).max()))
    if np.abs(g - g.T).max() > SYM_TOL * scale:
        raise DomainError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(g).min() <= 0.0:
        raise DomainError(f"{name} is not positive definite")
    return g


def is_spd(g):
    try:
        check_metric(g)
    except DomainError:
        return False
    return True


def constant_curvature_riemann(g, K):
    """``R_ijkl = K (g_il g_jk - g_ik g_jl)``."""
    g = np.asarray(g, dtype=float)
    return K * (np.einsum("il...,jk...->ijkl...", g, g) - np.einsum("ik...,jl...->ijkl...", g, g))


def kulkarni_nomizu(a, b):
    """``(a o b)_ijkl = a_ik b_jl + a_jl b_ik - a_il b_jk - a_jk b_il``."""
    return (np.einsum("ik...,jl...->ijkl...", a, b) + np.einsum("jl...,ik...->ijkl...", a, b)
            - np.einsum("il...,jk...->ijkl...", a, b) - np.einsum("jk...,il...->ijkl...", a, b))


def riemann_from_schouten(g, A):
    """Algebraic curvature tensor ``-(A o g)`` built from a symmetric 2-tensor.

    In dimension three every curvature tensor has this form; ``A = K g / 2``
    gives constant curvature ``K``.
    """
    return -kulkarni_nomizu(A, g)


def ricci(g, R):
    return np.einsum("il...,ijkl...->jk...", inverse(g), R)


def scalar(g, rc):
    return np.einsum("jk...,jk...->...", inverse(g), rc)


def einstein(g, rc, s):
    return rc - 0.5 * s * g


def dual(g, E):
    """``P^ij = g^ik g^jl E_kl``."""
    gi = inverse(g)
    return np.einsum("ik...,jl...,kl...->ij...", gi, gi, E)


def cross_curvature(P, R):
    """``X_ij = 1/2 P^kl R_iklj`` with both indices down."""
    return 0.5 * np.einsum("kl...,iklj...->ij...", P, R)


def orthonormal_frame(g):
    """Columns ``u_i`` of the returned matrix form a g-orthonormal basis.

    Built from the Cholesky factor ``g = L L^T`` as ``U = L^{-T}``, so the
    choice is deterministic.
    """
    g = check_metric(g)
    return np.linalg.inv(np.linalg.cholesky(g)).T


def change_frame(T, U):
    """Components of a covariant tensor in the frame whose vectors are the columns of ``U``."""
    T = np.asarray(T, dtype=float)
    src = "abcd"[: T.ndim]
    dst = "ijkl"[: T.ndim]
    spec = src + "," + ",".join(s + d for s, d in zip(src, dst)) + "->" + dst
    return np.einsum(spec, T, *([U] * T.ndim))


def sectional_triple(g, R):
    """Return ``(a, b, c) = (-R_2332, -R_1331, -R_1221)`` in an eigenframe of P.

    ``g`` must already be the identity (the frame is orthonormal).  The frame is
    rotated so P is diagonal with ascending eigenvalues.
    """
    g = check_metric(g)
    if np.abs(g - np.eye(3)).max() > SYM_TOL:
        raise DomainError("sectional_triple needs a g-orthonormal frame (g = identity)")
    return _orthonormal_triple(np.asarray(R, dtype=float))


def _orthonormal_triple(R):
    rc = np.einsum("ijki->jk", R)
    E = rc - 0.5 * np.trace(rc) * np.eye(3)
    _, Q = np.linalg.eigh(E)
    # S[i, j] = R(q_i, q_j, q_j, q_i)
    S = np.einsum("abcd,ai,bj,cj,di->ij", R, Q, Q, Q, Q)
    return (-S[1, 2], -S[0, 2], -S[0, 1])


def p_eigenvalues(g, P):
    """Eigenvalues of the endomorphism ``P^i_j = P^ik g_kj`` (ascending)."""
    g = check_metric(g)
    # P g is similar to the symmetric L^T P L with g = L L^T.
    Lc = np.linalg.cholesky(g)
    return np.linalg.eigvalsh(Lc.T @ np.asarray(P, dtype=float) @ Lc)


@dataclass(frozen=True)
class CurvatureBundle:
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    einstein: np.ndarray
    dual: np.ndarray
    cross: np.ndarray
    p_eigenvalues: tuple


def contract_to_bundle(g, R):
    """Contract a frame Riemann tensor into every derived curvature quantity."""
    g = check_metric(g)
    R = np.asarray(R, dtype=float)
    rc = ricci(g, R)
    s = float(scalar(g, rc))
    E = einstein(g, rc, s)
    P = dual(g, E)
    X = cross_curvature(P, R)
    U = np.linalg.inv(np.linalg.cholesky(g)).T
    triple = _orthonormal_triple(change_frame(R, U))
    return CurvatureBundle(R, rc, s, E, P, X, tuple(float(v) for v in triple))
