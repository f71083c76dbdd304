"""Plaintext logistic-regression math: exact and Taylor-approximated loss.

Batches are passed as a feature matrix ``X`` (rows are instances) and a label
vector ``y`` with entries in {-1, +1}. Weight vectors are ordered (A then B).
"""
import math

import numpy as np

LOG2 = math.log(2.0)


def _check(w, X, y=None):
    w = np.asarray(w, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if X.shape[1] != w.shape[0]:
        raise ValueError(f"weights have length {w.shape[0]} but instances have {X.shape[1]} features")
    if y is not None:
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"{X.shape[0]} instances but {y.shape[0]} labels")
    return w, X, y


def taylor_loss(w, X, y) -> float:
    """Mean of ``log 2 - y z / 2 + z^2 / 8`` with ``z = w.x``."""
    w, X, y = _check(w, X, y)
    z = X @ w
    return float(np.mean(LOG2 - 0.5 * y * z + 0.125 * z * z))


def exact_loss(w, X, y) -> float:
    """Mean negative log-likelihood ``log(1 + exp(-y w.x))``."""
    w, X, y = _check(w, X, y)
    return float(np.mean(np.logaddexp(0.0, -y * (X @ w))))


def taylor_gradient(w, X, y) -> np.ndarray:
    w, X, y = _check(w, X, y)
    d = 0.25 * (X @ w) - 0.5 * y
    return X.T @ d / X.shape[0]


def hessian_vector(X, s) -> np.ndarray:
    """Sub-sampled Taylor Hessian times ``s``: ``(1/(4|S_H|)) sum_i x_i (x_i . s)``.

    The Taylor Hessian is constant in w, so no weight argument is needed.
    """
    s, X, _ = _check(s, X)
    return X.T @ (0.25 * (X @ s)) / X.shape[0]


def margins(w, X) -> np.ndarray:
    w, X, _ = _check(w, X)
    return X @ w
