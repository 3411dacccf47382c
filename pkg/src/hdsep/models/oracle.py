"""Bayes rule for two equal-mean isotropic Gaussians that differ in variance.

With ``S = sum_j (x_j - mu)^2`` the log-likelihood ratio is linear in ``S``
and the optimal rule predicts the wider class iff ``S > T`` where

    T = n * ln(s2^2 / s1^2) / (1/s1^2 - 1/s2^2),   s1 < s2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateRuleError
from ..special import chi2_cdf, chi2_sf
from ._base import as_values, check_width


@dataclass(frozen=True, eq=False)
class OracleThresholdModel:
    n: int
    mu: float
    sigma1: float  # narrower class
    sigma2: float
    threshold: float
    classes: np.ndarray  # (label of sigma1 class, label of sigma2 class)
    family = "oracle"

    @property
    def n_features(self) -> int:
        return self.n

    def statistic(self, data) -> np.ndarray:
        X = check_width(as_values(data), self.n)
        d = X - self.mu
        return np.einsum("ij,ij->i", d, d)

    def predict(self, data) -> np.ndarray:
        X = as_values(data)
        if X.shape[0] == 0:
            return self.classes[:0]
        return self.classes[(self.statistic(X) > self.threshold).astype(np.int64)]


def _threshold(n: int, s1: float, s2: float) -> float:
    return n * math.log(s2 * s2 / (s1 * s1)) / (1.0 / (s1 * s1) - 1.0 / (s2 * s2))


def oracle_threshold(n: int, mu: float, sigma1: float, sigma2: float, labels=(0, 1)) -> OracleThresholdModel:
    """Build the threshold rule; ``labels[i]`` names the class with ``sigma{i+1}``."""
    if not (sigma1 > 0 and sigma2 > 0):
        raise ValueError("standard deviations must be positive")
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if sigma1 == sigma2:
        raise DegenerateRuleError("sigma1 == sigma2: classes are indistinguishable")
    labels = np.asarray(labels)
    if sigma1 > sigma2:
        sigma1, sigma2 = sigma2, sigma1
        labels = labels[::-1].copy()
    return OracleThresholdModel(
        int(n), float(mu), float(sigma1), float(sigma2), _threshold(int(n), sigma1, sigma2), labels
    )


def oracle_accuracy_analytic(n: int, sigma1: float, sigma2: float) -> float:
    """Balanced accuracy of the threshold rule via the chi-square CDF."""
    if not (sigma1 > 0 and sigma2 > 0):
        raise ValueError("standard deviations must be positive")
    if sigma1 == sigma2:
        return 0.5
    s1, s2 = sorted((float(sigma1), float(sigma2)))
    t = _threshold(int(n), s1, s2)
    return 0.5 * (chi2_cdf(t / (s1 * s1), n) + chi2_sf(t / (s2 * s2), n))
