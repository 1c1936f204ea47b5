"""Pure-numpy kernel implementations (fallback backend)."""

import numpy as np

BACKEND = "numpy"


def logistic_loss_grad(X, y, w, intercept, l2, sample_weight=None):
    """Weighted mean logistic loss and gradient.

    Returns ``(loss, grad)`` with ``grad`` of length d+1, intercept
    component last. The L2 term ``0.5 * l2 * ||w||^2`` penalizes
    coefficients only.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)

    z = X @ w + intercept
    # log(1 + e^z) - y*z, computed without overflow for large |z|
    losses = np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z)))
    p = np.empty_like(z)
    pos = z >= 0
    p[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    p[~pos] = ez / (1.0 + ez)

    if sample_weight is None:
        total = float(len(y))
        loss = float(losses.sum()) / total
        r = (p - y) / total
    else:
        sw = np.asarray(sample_weight, dtype=np.float64)
        total = float(sw.sum())
        loss = float(sw @ losses) / total
        r = sw * (p - y) / total

    grad = np.empty(w.shape[0] + 1, dtype=np.float64)
    grad[:-1] = X.T @ r + l2 * w
    grad[-1] = r.sum()
    loss += 0.5 * l2 * float(w @ w)
    return loss, grad
