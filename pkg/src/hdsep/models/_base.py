from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatchError
from ..synthgen import SpectraMatrix


def as_values(data) -> np.ndarray:
    if isinstance(data, SpectraMatrix):
        return data.values
    X = np.asarray(data, dtype=float)
    if X.ndim == 1 and X.size == 0:
        return X.reshape(0, 0)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    return X


def split_xy(train, labels=None):
    """Return ``(X, labels)`` from a labelled SpectraMatrix or an explicit pair."""
    if labels is None:
        if not isinstance(train, SpectraMatrix) or train.labels is None:
            raise ValueError("training data needs labels")
        labels = train.labels
    X = as_values(train)
    labels = np.asarray(labels)
    if labels.shape[0] != X.shape[0]:
        raise ValueError("labels and rows differ in length")
    return X, labels


def encode(labels):
    """Sorted class array and integer codes into it."""
    classes, y = np.unique(labels, return_inverse=True)
    return classes, y.astype(np.int64)


def check_width(X: np.ndarray, n_features: int) -> np.ndarray:
    if X.shape[0] == 0:
        return X.reshape(0, n_features)
    if X.shape[1] != n_features:
        raise DimensionMismatchError(
            f"model expects {n_features} features, got {X.shape[1]}"
        )
    return X


def labels_to_list(classes):
    return [c.item() if isinstance(c, np.generic) else c for c in classes]
