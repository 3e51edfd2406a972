import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from xcflab import tensor_core as tc
from xcflab.errors import DomainError

from conftest import random_spd, random_sym, spd, sym


def riemann_symmetries(R):
    """Largest violation of the algebraic curvature identities."""
    bianchi = R + np.einsum("jkil->ijkl", R) + np.einsum("kijl->ijkl", R)
    return max(np.abs(R + R.transpose(1, 0, 2, 3)).max(),
               np.abs(R + R.transpose(0, 1, 3, 2)).max(),
               np.abs(R - R.transpose(2, 3, 0, 1)).max(),
               np.abs(bianchi).max())


def cross_loops(P, R):
    X = np.zeros((3, 3))
    for i, j, k, l in itertools.product(range(3), repeat=4):
        X[i, j] += 0.5 * P[k, l] * R[i, k, l, j]
    return X


def test_constant_curvature_identity():
    R = tc.constant_curvature_riemann(np.eye(3), -1.0)
    assert R[0, 1, 1, 0] == -1.0
    for i, j in itertools.permutations(range(3), 2):
        assert R[i, j, j, i] == -1.0


def test_flat_is_zero():
    assert not tc.constant_curvature_riemann(np.eye(3), 0.0).any()
    b = tc.contract_to_bundle(np.eye(3), np.zeros((3, 3, 3, 3)))
    assert not b.ricci.any() and b.scalar == 0 and not b.cross.any()
    assert b.p_eigenvalues == (0.0, 0.0, 0.0)


def test_diag_metric_component():
    R = tc.constant_curvature_riemann(np.diag([4.0, 1.0, 1.0]), -1.0)
    assert R[0, 1, 1, 0] == -4.0


def test_bundle_at_hyperbolic_point():
    b = tc.contract_to_bundle(np.eye(3), tc.constant_curvature_riemann(np.eye(3), -1.0))
    np.testing.assert_array_equal(b.ricci, -2 * np.eye(3))
    assert b.scalar == -6.0
    np.testing.assert_array_equal(b.einstein, np.eye(3))
    np.testing.assert_array_equal(b.dual, np.eye(3))
    np.testing.assert_allclose(b.p_eigenvalues, (1, 1, 1), atol=1e-15)
    np.testing.assert_array_equal(b.cross, -np.eye(3))


def test_cross_matches_loops(rng):
    for _ in range(20):
        g = random_spd(rng)
        R = tc.riemann_from_schouten(g, random_sym(rng))
        P = tc.dual(g, tc.einstein(g, tc.ricci(g, R), tc.scalar(g, tc.ricci(g, R))))
        np.testing.assert_allclose(tc.cross_curvature(P, R), cross_loops(P, R), atol=1e-12)


def test_bundle_rejects_non_spd():
    with pytest.raises(DomainError):
        tc.contract_to_bundle(np.diag([1.0, 1.0, -1.0]), np.zeros((3, 3, 3, 3)))


def test_sectional_triple_needs_orthonormal_frame():
    with pytest.raises(DomainError):
        tc.sectional_triple(np.diag([2.0, 1.0, 1.0]), np.zeros((3, 3, 3, 3)))
    np.testing.assert_allclose(
        tc.sectional_triple(np.eye(3), tc.constant_curvature_riemann(np.eye(3), -1.0)), (1, 1, 1))


@given(spd(), st.floats(-3.0, -0.1))
def test_constant_curvature_reductions(g, K):
    b = tc.contract_to_bundle(g, tc.constant_curvature_riemann(g, K))
    tol = 1e-12 * max(1.0, np.abs(g).max() ** 2) * 9
    np.testing.assert_allclose(b.ricci, 2 * K * g, atol=tol)
    assert abs(b.scalar - 6 * K) < 1e-10
    np.testing.assert_allclose(b.einstein, -K * g, atol=tol)
    np.testing.assert_allclose(b.cross, -K * K * g, atol=tol * 9)


@given(spd(), sym())
def test_constructor_symmetries(g, A):
    assert riemann_symmetries(tc.riemann_from_schouten(g, A)) < 1e-12
    assert riemann_symmetries(tc.constant_curvature_riemann(g, -1.3)) < 1e-12


@given(sym())
def test_cross_eigenvalues_orthonormal(A):
    # in an orthonormal frame the eigenvalues of X are (-bc, -ac, -ab)
    R = tc.riemann_from_schouten(np.eye(3), A)
    b = tc.contract_to_bundle(np.eye(3), R)
    a_, b_, c_ = b.p_eigenvalues
    want = np.sort([-b_ * c_, -a_ * c_, -a_ * b_])
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(b.cross)), want, atol=1e-12)


def test_cross_eigenvalues_random_frames(rng):
    for _ in range(1000):
        g = random_spd(rng)
        R = tc.riemann_from_schouten(g, random_sym(rng))
        b = tc.contract_to_bundle(g, R)
        a_, b_, c_ = b.p_eigenvalues
        L = np.linalg.cholesky(g)
        Linv = np.linalg.inv(L)
        x_rel = np.linalg.eigvalsh(Linv @ b.cross @ Linv.T)
        want = np.sort([-b_ * c_, -a_ * c_, -a_ * b_])
        scale = max(1.0, np.abs(want).max())
        assert np.abs(x_rel - want).max() <= 1e-12 * scale * 10


def test_triple_matches_generic_eigensolver(rng):
    for _ in range(50):
        g = random_spd(rng)
        R = tc.riemann_from_schouten(g, random_sym(rng))
        b = tc.contract_to_bundle(g, R)
        np.testing.assert_allclose(b.p_eigenvalues, np.linalg.eigvalsh(
            np.linalg.cholesky(g).T @ b.dual @ np.linalg.cholesky(g)), atol=1e-12)


@given(spd(), sym(), st.floats(0.2, 5.0))
def test_cross_scaling_law(g, A, psi):
    # R_ijkl scales like psi for psi*g (Schouten tensor is scale invariant)
    X = tc.contract_to_bundle(g, tc.riemann_from_schouten(g, A)).cross
    Xs = tc.contract_to_bundle(psi * g, tc.riemann_from_schouten(psi * g, A)).cross
    np.testing.assert_allclose(Xs, X / psi, atol=1e-12 * max(1.0, np.abs(X).max() / psi) * 10)


def test_check_metric_rejects():
    with pytest.raises(DomainError):
        tc.check_metric(np.ones((2, 2)))
    with pytest.raises(DomainError):
        tc.check_metric(np.array([[1.0, 0.1, 0], [0, 1, 0], [0, 0, 1]]))
    with pytest.raises(DomainError):
        tc.check_metric(np.diag([1.0, np.nan, 1.0]))


def test_batched_contractions_match_pointwise(rng):
    g = np.stack([random_spd(rng) for _ in range(4)], axis=-1)
    A = np.stack([random_sym(rng) for _ in range(4)], axis=-1)
    R = tc.riemann_from_schouten(g, A)
    rc = tc.ricci(g, R)
    for n in range(4):
        np.testing.assert_allclose(rc[..., n], tc.ricci(g[..., n], R[..., n]), atol=1e-13)
