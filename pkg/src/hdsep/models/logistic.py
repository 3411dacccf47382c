from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from ._base import as_values, check_width, encode, split_xy


@dataclass(frozen=True, eq=False)
class LogisticModel:
    classes: np.ndarray
    weights: np.ndarray
    bias: float
    l2_strength: float
    max_iter: int
    n_iter: int
    converged: bool
    family = "logistic"

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def predict_proba(self, data) -> np.ndarray:
        X = check_width(as_values(data), self.n_features)
        return expit(X @ self.weights + self.bias)

    def predict(self, data) -> np.ndarray:
        X = as_values(data)
        if X.shape[0] == 0:
            return self.classes[:0]
        return self.classes[(self.predict_proba(X) > 0.5).astype(np.int64)]


def loss_and_grad(params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float):
    """Penalised negative log-likelihood and its gradient.

    ``params = [w..., b]``; loss is ``sum log(1 + exp(-s z)) + l2/2 |w|^2`` with
    ``s = 2y - 1`` and ``z = Xw + b``. The bias is not penalised.
    """
    w, b = params[:-1], params[-1]
    z = X @ w + b
    sign = 2.0 * y - 1.0
    loss = np.logaddexp(0.0, -sign * z).sum() + 0.5 * l2 * (w @ w)
    r = expit(z) - y
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r + l2 * w
    grad[-1] = r.sum()
    return loss, grad


def fit_logistic(train, labels=None, l2_strength: float = 1.0, max_iter: int = 3000, tol: float = 1e-6) -> LogisticModel:
    """Binary L2 logistic regression solved with L-BFGS.

    Hitting ``max_iter`` is reported through ``converged=False``, not raised.
    """
    if l2_strength < 0:
        raise ValueError("l2_strength must be non-negative")
    X, lab = split_xy(train, labels)
    classes, y = encode(lab)
    if classes.shape[0] != 2:
        raise ValueError(f"logistic regression needs exactly two classes, got {classes.shape[0]}")
    yf = y.astype(float)
    x0 = np.zeros(X.shape[1] + 1)
    res = minimize(
        loss_and_grad,
        x0,
        args=(X, yf, float(l2_strength)),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": int(max_iter), "gtol": tol, "maxcor": 10},
    )
    return LogisticModel(
        classes,
        res.x[:-1].copy(),
        float(res.x[-1]),
        float(l2_strength),
        int(max_iter),
        int(res.nit),
        bool(res.success),
    )
