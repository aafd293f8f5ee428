"""Pick a ridge parameter by PRESS and check it against brute-force leave-one-out.

Run with ``python demos/press_selection.py``.
"""

import numpy as np

from hesselm.elm import default_lambda_grid, hidden_output, init_hidden, press_mse

rng = np.random.default_rng(0)
x = rng.uniform(-1, 1, (80, 4))
t = np.where(x[:, :1] + 0.3 * rng.standard_normal((80, 1)) > 0, 1.0, -1.0)

v, b = init_hidden(x.shape[1], 30, seed=1)
h = hidden_output(x, v, b)

print("log(lambda)   PRESS (hessenberg)   PRESS (direct)")
for lam in default_lambda_grid()[::3]:
    fast = press_mse(h, t, lam, "hessenberg")
    slow = press_mse(h, t, lam, "direct")
    print(f"{np.log(lam):10.0f}   {fast:18.6f}   {slow:14.6f}")


def loo(h, t, lam):
    err = 0.0
    for i in range(len(h)):
        keep = np.arange(len(h)) != i
        w = np.linalg.solve(h[keep].T @ h[keep] + lam * np.eye(h.shape[1]), h[keep].T @ t[keep])
        err += float(np.sum((t[i] - h[i] @ w) ** 2))
    return err / (len(h) * t.shape[1])


lam = np.exp(-3)
print(f"\nat lambda = e^-3: PRESS {press_mse(h, t, lam):.10f}, refit LOO {loo(h, t, lam):.10f}")
