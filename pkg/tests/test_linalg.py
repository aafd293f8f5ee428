import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hesselm.errors import ConvergenceError, DimensionError, SingularMatrixError, ValidationError
from hesselm.linalg import (
    factor_shift,
    gram_eigendecompose,
    hessenberg_decompose,
    ridge_solve_direct,
    shifted_hess_solve,
    shifted_quadratic_diag,
    solve_symmetric,
    tridiagonal_band,
)

from conftest import random_psd, rel_err


def check_hessenberg(a, f):
    n = a.shape[0]
    assert np.linalg.norm(f.q @ f.u @ f.q.T - a) <= 1e-10 * max(np.linalg.norm(a), 1e-300)
    assert np.linalg.norm(f.q.T @ f.q - np.eye(n)) <= 1e-10 * n
    assert np.all(np.tril(f.u, -2) == 0.0)


# --- hessenberg_decompose ---

def test_two_by_two_is_already_hessenberg():
    a = np.array([[4.0, 1.0], [1.0, 3.0]])
    f = hessenberg_decompose(a)
    np.testing.assert_array_equal(f.q, np.eye(2))
    np.testing.assert_array_equal(f.u, a)


def test_three_by_three_symmetric():
    a = np.array([[4.0, 1.0, 2.0], [1.0, 3.0, 0.0], [2.0, 0.0, 1.0]])
    f = hessenberg_decompose(a)
    check_hessenberg(a, f)
    np.testing.assert_array_equal(f.u, f.u.T)
    assert f.u[0, 2] == 0.0 and f.u[2, 0] == 0.0


def test_identity_is_invariant():
    f = hessenberg_decompose(np.eye(3))
    np.testing.assert_allclose(f.u, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(f.q.T @ f.q, np.eye(3), atol=1e-15)


def test_general_matrix(rng):
    for n in (1, 2, 5, 17, 50):
        a = rng.standard_normal((n, n))
        check_hessenberg(a, hessenberg_decompose(a))


def test_symmetric_is_tridiagonal(rng):
    for n in (3, 10, 40):
        s = random_psd(rng, n)
        f = hessenberg_decompose(s)
        check_hessenberg(s, f)
        band = np.abs(np.subtract.outer(np.arange(n), np.arange(n))) > 1
        assert np.max(np.abs(f.u[band])) <= 1e-10 * np.linalg.norm(f.u)


def test_zero_columns_are_skipped():
    a = np.diag([3.0, 2.0, 1.0, 0.5])
    f = hessenberg_decompose(a)
    check_hessenberg(a, f)


def test_rejects_bad_input():
    with pytest.raises(DimensionError):
        hessenberg_decompose(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        hessenberg_decompose(np.array([[1.0, np.nan], [0.0, 1.0]]))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.just(1)).map(lambda s: (s[0], s[0])),
              elements=st.floats(-100, 100)))
def test_reconstruction_property(a):
    check_hessenberg(a, hessenberg_decompose(a))


# --- shifted solves ---

def test_shifted_identity():
    f = hessenberg_decompose(np.eye(2))
    np.testing.assert_allclose(shifted_hess_solve(f, 1.0, np.array([[2.0], [4.0]])), [[1.0], [2.0]])


def test_shifted_diagonal_no_shift():
    f = hessenberg_decompose(2.0 * np.eye(2))
    np.testing.assert_allclose(shifted_hess_solve(f, 0.0, np.array([[2.0], [2.0]])), [[1.0], [1.0]])


def test_shifted_matches_dense_oracle(rng):
    s = random_psd(rng, 5)
    b = rng.standard_normal((5, 2))
    f = hessenberg_decompose(s)
    for lam in (0.0, np.exp(-12), np.exp(-6), np.exp(-3), 1.0):
        x = shifted_hess_solve(f, lam, b)
        assert rel_err(x, np.linalg.solve(s + lam * np.eye(5), b)) <= 1e-9


def test_shifted_vector_rhs(rng):
    s = random_psd(rng, 6)
    b = rng.standard_normal(6)
    x = shifted_hess_solve(hessenberg_decompose(s), 0.5, b)
    assert x.shape == (6,)
    assert rel_err(x, np.linalg.solve(s + 0.5 * np.eye(6), b)) <= 1e-10


def test_quadratic_diag(rng):
    s = random_psd(rng, 7)
    g = rng.standard_normal((7, 4))
    f = hessenberg_decompose(s)
    expected = np.diag(g.T @ np.linalg.solve(s + 0.1 * np.eye(7), g))
    assert rel_err(shifted_quadratic_diag(f, 0.1, g), expected) <= 1e-10
    assert rel_err(shifted_quadratic_diag(f, 0.1, f.q.T @ g, rotated=True), expected) <= 1e-10


def test_singular_shift_reports_and_suggests():
    f = hessenberg_decompose(np.zeros((3, 3)))
    with pytest.raises(SingularMatrixError, match="larger regularization"):
        factor_shift(f, 0.0)


def test_negative_shift_rejected():
    with pytest.raises(ValidationError):
        factor_shift(hessenberg_decompose(np.eye(2)), -1.0)


def test_rhs_dimension_checked():
    sol = factor_shift(hessenberg_decompose(np.eye(3)), 1.0)
    with pytest.raises(DimensionError):
        sol.solve(np.ones(4))


def test_band_is_symmetrized():
    diag, off = tridiagonal_band(np.array([[1.0, 2.0, 0.0], [4.0, 5.0, 6.0], [0.0, 8.0, 9.0]]))
    np.testing.assert_array_equal(diag, [1.0, 5.0, 9.0])
    np.testing.assert_array_equal(off, [3.0, 7.0])


# --- gram_eigendecompose ---

def test_eigen_diagonal():
    e = gram_eigendecompose(np.diag([3.0, 1.0]))
    np.testing.assert_array_equal(e.values, [3.0, 1.0])
    np.testing.assert_array_equal(np.abs(e.vectors), np.eye(2))


def test_eigen_two_by_two():
    e = gram_eigendecompose(np.array([[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(e.values, [3.0, 1.0], rtol=1e-14)
    expected = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    signs = np.sign(e.vectors[0]) * np.sign(expected[0])
    np.testing.assert_allclose(e.vectors * signs, expected, atol=1e-14)


def test_eigen_reconstructs_gram(rng):
    h = rng.standard_normal((6, 4))
    s = h.T @ h
    e = gram_eigendecompose(s)
    assert rel_err(e.vectors @ np.diag(e.values) @ e.vectors.T, s) <= 1e-8
    np.testing.assert_allclose(e.vectors.T @ e.vectors, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(e.values, np.sort(np.linalg.eigvalsh(s))[::-1], rtol=1e-10)


def test_eigen_rank_deficient(rng):
    s = random_psd(rng, 12, rank=4)
    e = gram_eigendecompose(s)
    assert np.all(e.values >= 0.0)
    assert np.all(np.diff(e.values) <= 0.0)
    assert rel_err(e.vectors @ np.diag(e.values) @ e.vectors.T, s) <= 1e-8


def test_eigen_zero_matrix():
    e = gram_eigendecompose(np.zeros((3, 3)))
    np.testing.assert_array_equal(e.values, np.zeros(3))
    np.testing.assert_array_equal(e.vectors, np.eye(3))


def test_eigen_rejects_asymmetric():
    with pytest.raises(ValidationError):
        gram_eigendecompose(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_eigen_nonconvergence(monkeypatch, rng):
    import hesselm.linalg as linalg

    monkeypatch.setattr(linalg, "JACOBI_MAX_SWEEPS", 1)
    with pytest.raises(ConvergenceError):
        gram_eigendecompose(random_psd(rng, 20))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 15), st.integers(0, 2**32 - 1))
def test_eigen_property(n, seed):
    s = random_psd(np.random.default_rng(seed), n)
    e = gram_eigendecompose(s)
    assert rel_err(e.vectors @ np.diag(e.values) @ e.vectors.T, s) <= 1e-8
    assert np.linalg.norm(e.vectors.T @ e.vectors - np.eye(n)) <= 1e-10 * n


# --- direct ridge ---

def test_ridge_identity_design():
    t = np.array([[1.0], [2.0]])
    np.testing.assert_allclose(ridge_solve_direct(np.eye(2), t, 0.0), [[1.0], [2.0]])
    np.testing.assert_allclose(ridge_solve_direct(np.eye(2), t, 1.0), [[0.5], [1.0]])


def test_ridge_matches_normal_equations(rng):
    h = rng.standard_normal((8, 3))
    t = rng.standard_normal((8, 2))
    lam = np.exp(-5)
    expected = np.linalg.inv(h.T @ h + lam * np.eye(3)) @ h.T @ t
    assert rel_err(ridge_solve_direct(h, t, lam), expected) <= 1e-9


def test_ridge_branches_agree(rng):
    # Woodbury: both closed forms give the same weights
    for n, m in ((20, 5), (12, 12), (6, 15)):
        h = rng.standard_normal((n, m))
        t = rng.standard_normal((n, 1))
        narrow = np.linalg.solve(h.T @ h + 0.3 * np.eye(m), h.T @ t)
        wide = h.T @ np.linalg.solve(h @ h.T + 0.3 * np.eye(n), t)
        assert rel_err(narrow, wide) <= 1e-8
        assert rel_err(ridge_solve_direct(h, t, 0.3), narrow) <= 1e-8


def test_ridge_errors():
    with pytest.raises(ValidationError):
        ridge_solve_direct(np.eye(2), np.ones(2), -1.0)
    with pytest.raises(DimensionError):
        ridge_solve_direct(np.eye(2), np.ones(3), 1.0)
    with pytest.raises(SingularMatrixError):
        ridge_solve_direct(np.zeros((3, 2)), np.ones(3), 0.0)


def test_solve_symmetric(rng):
    a = random_psd(rng, 6) + np.eye(6)
    b = rng.standard_normal(6)
    assert rel_err(solve_symmetric(a, b), np.linalg.solve(a, b)) <= 1e-12
    with pytest.raises(DimensionError):
        solve_symmetric(a, np.ones(5))
