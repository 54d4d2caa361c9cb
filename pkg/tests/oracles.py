"""Independent reference computations used by the tests."""

import numpy as np


def agd_weighted_ls(X, y, w, ridge=0.0, tol=1e-13, max_iter=200_000):
    """Accelerated gradient descent (with adaptive restart) on
    sum_i w_i (y_i - b - w.x_i)^2 + ridge ||w||^2, intercept unpenalized.

    Uses only matrix-vector products; no factorization.
    """
    Xt = np.hstack([np.ones((X.shape[0], 1)), X])
    pen = np.full(Xt.shape[1], ridge)
    pen[0] = 0.0

    def grad(b):
        return 2.0 * (Xt.T @ (w * (Xt @ b - y))) + 2.0 * pen * b

    # Lipschitz constant by power iteration on the Hessian
    v = np.ones(Xt.shape[1])
    for _ in range(200):
        v = Xt.T @ (w * (Xt @ v)) + pen * v
        v /= np.linalg.norm(v)
    L = 2.0 * (v @ (Xt.T @ (w * (Xt @ v))) + v @ (pen * v)) * 1.01
    beta = np.zeros(Xt.shape[1])
    z, t = beta.copy(), 1.0
    for _ in range(max_iter):
        g = grad(z)
        nxt = z - g / L
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        if g @ (nxt - beta) > 0:  # restart when momentum points uphill
            z, t_next = nxt.copy(), 1.0
        else:
            z = nxt + ((t - 1) / t_next) * (nxt - beta)
        beta, t = nxt, t_next
        if np.max(np.abs(grad(beta))) < tol * max(1.0, np.max(np.abs(Xt.T @ (w * y)))):
            break
    return beta
