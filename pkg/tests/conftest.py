import numpy as np
import pytest


def rel_err(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    scale = max(np.linalg.norm(b), np.finfo(float).tiny)
    return float(np.linalg.norm(a - b) / scale)


def brute_force_loo(h, t, lam):
    """Mean squared leave-one-out error per output, by explicit retraining."""
    h, t = np.asarray(h, dtype=np.float64), np.asarray(t, dtype=np.float64).reshape(len(h), -1)
    n = h.shape[0]
    total = 0.0
    for j in range(n):
        keep = np.arange(n) != j
        hk, tk = h[keep], t[keep]
        if hk.shape[1] < hk.shape[0]:
            w = np.linalg.solve(hk.T @ hk + lam * np.eye(hk.shape[1]), hk.T @ tk)
        else:
            w = hk.T @ np.linalg.solve(hk @ hk.T + lam * np.eye(hk.shape[0]), tk)
        total += float(np.sum((t[j] - h[j] @ w) ** 2))
    return total / (n * t.shape[1])


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    a = rng.standard_normal((n + 3, n)) if rank == n else rng.standard_normal((rank, n))
    return a.T @ a


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
