"""Dense real linear algebra kernels used by the ELM trainers.

Matrices are plain 2-D ``float64`` numpy arrays. Every kernel here is written
out explicitly (Householder reduction, Thomas sweeps, cyclic Jacobi, Gaussian
elimination) so the trainers do not depend on any LAPACK routine; numpy does
the vectorised row and column arithmetic and the sequential Thomas sweeps are
compiled with numba.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConvergenceError, DimensionError, SingularMatrixError, ValidationError

__all__ = [
    "HessenbergFactors",
    "EigenFactors",
    "as_matrix",
    "hessenberg_decompose",
    "tridiagonal_band",
    "ShiftedTridiagonal",
    "factor_shift",
    "shifted_hess_solve",
    "shifted_quadratic_diag",
    "gram_eigendecompose",
    "solve_symmetric",
    "ridge_solve_direct",
]

TRIDIAGONAL_PIVOT_RTOL = 1e-14
JACOBI_MAX_SWEEPS = 100
JACOBI_RTOL = 1e-12


@dataclass(frozen=True)
class HessenbergFactors:
    """Orthogonal similarity ``a = q @ u @ q.T`` with ``u`` upper Hessenberg."""

    q: np.ndarray
    u: np.ndarray

    @property
    def n(self) -> int:
        return self.u.shape[0]


@dataclass(frozen=True)
class EigenFactors:
    """Eigenpairs of a symmetric PSD matrix, values sorted descending."""

    vectors: np.ndarray
    values: np.ndarray


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array (a copy is not guaranteed)."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or Inf entries")
    return arr


def _as_square(a, name: str) -> np.ndarray:
    arr = as_matrix(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    return arr


def _householder(x: np.ndarray):
    tail = np.linalg.norm(x[1:])
    if tail == 0.0:
        return None, x[0]
    alpha = -np.copysign(np.hypot(x[0], tail), x[0])
    v = x.copy()
    v[0] -= alpha
    v /= np.linalg.norm(v)
    return v, alpha


def hessenberg_decompose(a) -> HessenbergFactors:
    """Reduce a square matrix to upper Hessenberg form by Householder similarity.

    Applies ``n - 2`` reflections ``P_k = I - 2 v v^T``; each one zeroes column
    ``k`` below the first subdiagonal. Symmetric input (to 1e-12 relative) takes
    the symmetric rank-2 update path and comes back exactly symmetric
    tridiagonal.

    Parameters
    ----------
    a : array_like, shape (n, n)

    Returns
    -------
    HessenbergFactors
        ``q`` orthogonal and ``u`` upper Hessenberg with ``a = q u q^T``.
        Entries of ``u`` below the first subdiagonal are exact zeros.
    """
    a = _as_square(a, "a")
    top = np.max(np.abs(a), initial=0.0)
    if top == 0.0:
        return HessenbergFactors(q=np.eye(a.shape[0]), u=a.copy())
    # power-of-two scaling is exact and keeps squared norms clear of under/overflow
    scale = 2.0 ** np.frexp(top)[1]
    a = a / scale
    if np.max(np.abs(a - a.T), initial=0.0) <= 1e-12:
        f = _tridiagonalize(0.5 * (a + a.T))
        return HessenbergFactors(q=f.q, u=f.u * scale)
    u = a.copy()
    n = u.shape[0]
    q = np.eye(n)
    for k in range(n - 2):
        v, alpha = _householder(u[k + 1:, k])
        if v is None:
            u[k + 2:, k] = 0.0
            continue
        # left: rows k+1.. ; right: columns k+1..
        u[k + 1:, k:] -= 2.0 * np.outer(v, v @ u[k + 1:, k:])
        u[:, k + 1:] -= 2.0 * np.outer(u[:, k + 1:] @ v, v)
        q[:, k + 1:] -= 2.0 * np.outer(q[:, k + 1:] @ v, v)
        u[k + 1, k] = alpha
        u[k + 2:, k] = 0.0
    return HessenbergFactors(q=q, u=u * scale)


@njit(cache=True)
def _tridiagonalize_kernel(a, q, diag, off):  # pragma: no cover - compiled
    # symmetric Householder reduction: a is overwritten, q accumulates P_0 P_1 ... P_{n-3}
    n = a.shape[0]
    refl = np.zeros((n, n))
    used = np.zeros(n, dtype=np.bool_)
    p = np.empty(n)
    w = np.empty(n)
    dots = np.empty(n)
    for k in range(n - 2):
        diag[k] = a[k, k]
        x0 = a[k + 1, k]
        tail = 0.0
        for i in range(k + 2, n):
            tail += a[i, k] * a[i, k]
        if tail == 0.0:
            off[k] = x0
            continue
        alpha = -math.copysign(math.sqrt(x0 * x0 + tail), x0)
        scale = 1.0 / math.sqrt((x0 - alpha) ** 2 + tail)
        refl[k, k + 1] = (x0 - alpha) * scale
        for i in range(k + 2, n):
            refl[k, i] = a[i, k] * scale
        off[k] = alpha
        used[k] = True
        pv = 0.0
        for i in range(k + 1, n):
            acc = 0.0
            for j in range(k + 1, n):
                acc += a[i, j] * refl[k, j]
            p[i] = 2.0 * acc
            pv += p[i] * refl[k, i]
        for i in range(k + 1, n):
            w[i] = p[i] - pv * refl[k, i]
        for i in range(k + 1, n):
            vi = refl[k, i]
            wi = w[i]
            for j in range(k + 1, n):
                a[i, j] -= vi * w[j] + wi * refl[k, j]
    if n >= 2:
        diag[n - 2] = a[n - 2, n - 2]
        off[n - 2] = a[n - 1, n - 2]
    if n >= 1:
        diag[n - 1] = a[n - 1, n - 1]
    for k in range(n - 3, -1, -1):
        if not used[k]:
            continue
        for j in range(k + 1, n):
            dots[j] = 0.0
        for i in range(k + 1, n):
            vi = refl[k, i]
            for j in range(k + 1, n):
                dots[j] += vi * q[i, j]
        for i in range(k + 1, n):
            vi = 2.0 * refl[k, i]
            for j in range(k + 1, n):
                q[i, j] -= vi * dots[j]


def _tridiagonalize(a: np.ndarray) -> HessenbergFactors:
    n = a.shape[0]
    work = np.array(a, dtype=np.float64, order="C")
    q = np.eye(n)
    diag = np.zeros(n)
    off = np.zeros(max(n - 1, 0))
    if n:
        _tridiagonalize_kernel(work, q, diag, off)
    u = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    return HessenbergFactors(q=q, u=u)


def tridiagonal_band(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and symmetrised off-diagonal of a (symmetric) tridiagonal ``u``."""
    diag = np.diag(u).copy()
    off = 0.5 * (np.diag(u, -1) + np.diag(u, 1))
    return diag, off


@njit(cache=True)
def _ldl_kernel(diag, off, shift, tol, d, ell):  # pragma: no cover - compiled
    n = diag.size
    d[0] = diag[0] + shift
    for i in range(1, n):
        if abs(d[i - 1]) <= tol:
            return i - 1
        ell[i - 1] = off[i - 1] / d[i - 1]
        d[i] = diag[i] + shift - ell[i - 1] * off[i - 1]
    if abs(d[n - 1]) <= tol:
        return n - 1
    return -1


@njit(cache=True)
def _forward(ell, y):  # pragma: no cover - compiled
    for i in range(1, y.shape[0]):
        for j in range(y.shape[1]):
            y[i, j] -= ell[i - 1] * y[i - 1, j]


@njit(cache=True)
def _backward(ell, x):  # pragma: no cover - compiled
    for i in range(x.shape[0] - 2, -1, -1):
        for j in range(x.shape[1]):
            x[i, j] -= ell[i] * x[i + 1, j]


@dataclass(frozen=True)
class ShiftedTridiagonal:
    """``Q (U + lam I) Q^T`` with the tridiagonal part factored as ``L D L^T``."""

    q: np.ndarray
    d: np.ndarray
    ell: np.ndarray

    def solve(self, b) -> np.ndarray:
        rhs = np.asarray(b, dtype=np.float64)
        vector = rhs.ndim == 1
        if vector:
            rhs = rhs[:, None]
        if rhs.shape[0] != self.d.size:
            n = self.d.size
            raise DimensionError(f"right-hand side has {rhs.shape[0]} rows, factors are {n}x{n}")
        z = np.ascontiguousarray(self.q.T @ rhs)
        _forward(self.ell, z)
        z /= self.d[:, None]
        _backward(self.ell, z)
        x = self.q @ z
        return x[:, 0] if vector else x

    def quadratic_diag(self, g, rotated: bool = False) -> np.ndarray:
        g = np.asarray(g, dtype=np.float64)
        if g.shape[0] != self.d.size:
            n = self.d.size
            raise DimensionError(f"g has {g.shape[0]} rows, factors are {n}x{n}")
        y = np.array(g if rotated else self.q.T @ g, dtype=np.float64, order="C")
        _forward(self.ell, y)
        return np.einsum("ij,ij->j", y, y / self.d[:, None])


def factor_shift(f: HessenbergFactors, lam: float) -> ShiftedTridiagonal:
    """Thomas forward elimination of ``U + lam I`` in symmetric ``L D L^T`` form.

    A pivot with magnitude at most ``1e-14`` times the largest band entry
    raises :class:`SingularMatrixError`.
    """
    if lam < 0:
        raise ValidationError(f"lambda must be nonnegative, got {lam}")
    diag, off = tridiagonal_band(f.u)
    n = diag.size
    scale = max(np.max(np.abs(diag + lam)), np.max(np.abs(off)) if off.size else 0.0)
    tol = TRIDIAGONAL_PIVOT_RTOL * scale
    d = np.empty(n)
    ell = np.zeros(max(n - 1, 1))
    failed = _ldl_kernel(diag, off, float(lam), tol, d, ell)
    if failed >= 0:
        raise SingularMatrixError(
            f"shifted tridiagonal system is singular (pivot {failed} below {tol:.3e}) "
            f"at lambda={lam:g}; use a larger regularization parameter"
        )
    return ShiftedTridiagonal(q=f.q, d=d, ell=ell)


def shifted_hess_solve(f: HessenbergFactors, lam: float, b) -> np.ndarray:
    """Solve ``(S + lam I) X = b`` reusing the factors of symmetric ``S``.

    Computes ``q @ T^{-1} @ (q.T @ b)`` where ``T = u + lam I`` is solved by
    the Thomas algorithm (see :func:`factor_shift` for the singularity check).
    """
    return factor_shift(f, lam).solve(b)


def shifted_quadratic_diag(f: HessenbergFactors, lam: float, g, rotated: bool = False) -> np.ndarray:
    """Return ``diag(g^T (S + lam I)^{-1} g)`` from the Hessenberg factors of ``S``.

    Only the forward half of the Thomas sweep is needed: with
    ``u + lam I = L D L^T`` and ``Y = L^{-1} q^T g`` the result is
    ``sum_k Y[k]**2 / D[k]``. Pass ``rotated=True`` when ``g`` already holds
    ``q^T g`` (lets a caller sweeping many shifts rotate once).
    """
    return factor_shift(f, lam).quadratic_diag(g, rotated=rotated)


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    # circle-method schedule: every pair (p, q) once per sweep, disjoint within a round
    players = list(range(n)) + ([-1] if n % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        pairs = [(players[i], players[size - 1 - i]) for i in range(size // 2)]
        pairs = [(min(x, y), max(x, y)) for x, y in pairs if x >= 0 and y >= 0]
        rounds.append((np.array([x for x, _ in pairs], dtype=int), np.array([y for _, y in pairs], dtype=int)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _rotate(a: np.ndarray, v: np.ndarray, p: np.ndarray, q: np.ndarray) -> None:
    # disjoint pairs: every angle depends only on its own 2x2 block
    apq = a[p, q]
    tau = (a[q, q] - a[p, p]) / (2.0 * apq)
    t = np.copysign(1.0, tau) / (np.abs(tau) + np.hypot(1.0, tau))
    c = 1.0 / np.hypot(1.0, t)
    s = t * c
    cols_p, cols_q = a[:, p], a[:, q]
    a[:, p], a[:, q] = c * cols_p - s * cols_q, s * cols_p + c * cols_q
    cc, ss = c[:, None], s[:, None]
    rows_p, rows_q = a[p, :], a[q, :]
    a[p, :], a[q, :] = cc * rows_p - ss * rows_q, ss * rows_p + cc * rows_q
    a[p, q] = 0.0
    a[q, p] = 0.0
    vp, vq = v[:, p], v[:, q]
    v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq


def gram_eigendecompose(s) -> EigenFactors:
    """Eigendecomposition of a symmetric PSD matrix by cyclic Jacobi rotations.

    The input is symmetrised as ``(s + s.T) / 2``. Each sweep visits every
    off-diagonal pair once in round-robin order (disjoint pairs are rotated
    together). Sweeps stop once every off-diagonal magnitude is below
    ``1e-12 * ||s||_F``, followed by one polishing sweep; negative eigenvalues from rounding are clamped to 0
    and values are returned in descending order.

    Raises
    ------
    ConvergenceError
        If 100 sweeps do not reach the tolerance.
    """
    a = _as_square(s, "s")
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(a), initial=0.0)):
        raise ValidationError("s is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    tol = JACOBI_RTOL * np.linalg.norm(a)
    if tol == 0.0:
        return EigenFactors(vectors=v, values=np.zeros(n))
    off_mask = ~np.eye(n, dtype=bool)
    schedule = _round_robin(n)
    for _ in range(JACOBI_MAX_SWEEPS):
        if np.max(np.abs(a[off_mask]), initial=0.0) < tol:
            # convergence is quadratic: one more sweep takes the residual to rounding level
            for p, q in schedule:
                keep = a[p, q] != 0.0
                if np.any(keep):
                    _rotate(a, v, p[keep], q[keep])
            break
        for p, q in schedule:
            keep = np.abs(a[p, q]) >= tol
            if np.any(keep):
                _rotate(a, v, p[keep], q[keep])
    else:
        if np.max(np.abs(a[off_mask]), initial=0.0) >= tol:
            raise ConvergenceError(
                f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps "
                f"(off-diagonal norm {np.linalg.norm(a[off_mask]):.3e})"
            )
    values = np.diag(a).copy()
    values[values < 0.0] = 0.0
    order = np.argsort(-values, kind="stable")
    return EigenFactors(vectors=v[:, order], values=values[order])


def solve_symmetric(a, b) -> np.ndarray:
    """Solve ``a x = b`` for symmetric positive definite ``a`` by Gaussian elimination.

    No pivoting (SPD matrices do not need it). A pivot below
    ``n * eps * max|a|`` raises :class:`SingularMatrixError`.
    """
    m = _as_square(a, "a").copy()
    rhs = np.array(b, dtype=np.float64)
    vector = rhs.ndim == 1
    if vector:
        rhs = rhs[:, None]
    n = m.shape[0]
    if rhs.shape[0] != n:
        raise DimensionError(f"b has {rhs.shape[0]} rows, a is {n}x{n}")
    tol = n * np.finfo(np.float64).eps * np.max(np.abs(m), initial=0.0)
    for k in range(n):
        piv = m[k, k]
        if not piv > tol:
            raise SingularMatrixError(
                f"matrix is numerically singular at pivot {k} ({piv:.3e}); "
                "use a positive regularization parameter"
            )
        factors = m[k + 1:, k] / piv
        m[k + 1:, k + 1:] -= np.outer(factors, m[k, k + 1:])
        rhs[k + 1:] -= np.outer(factors, rhs[k])
    x = np.empty_like(rhs)
    for k in range(n - 1, -1, -1):
        x[k] = (rhs[k] - m[k, k + 1:] @ x[k + 1:]) / m[k, k]
    return x[:, 0] if vector else x


def ridge_solve_direct(h, t, lam: float) -> np.ndarray:
    """Regularized least squares output weights, solved from scratch.

    ``(H^T H + lam I)^{-1} H^T t`` when ``L <= N``, otherwise the
    minimum-norm form ``H^T (H H^T + lam I)^{-1} t``.
    """
    h = as_matrix(h, "h")
    t = np.asarray(t, dtype=np.float64)
    if lam < 0:
        raise ValidationError(f"lambda must be nonnegative, got {lam}")
    n_rows, n_hidden = h.shape
    if t.shape[0] != n_rows:
        raise DimensionError(f"t has {t.shape[0]} rows, h has {n_rows}")
    if n_hidden <= n_rows:
        gram = h.T @ h
        gram[np.diag_indices_from(gram)] += lam
        return solve_symmetric(gram, h.T @ t)
    gram = h @ h.T
    gram[np.diag_indices_from(gram)] += lam
    return h.T @ solve_symmetric(gram, t)
