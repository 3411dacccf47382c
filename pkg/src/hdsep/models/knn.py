from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._base import as_values, check_width, encode, split_xy

_CHUNK = 512


@dataclass(frozen=True, eq=False)
class KnnModel:
    """Euclidean k-nearest-neighbour majority vote.

    Vote ties go to the class with the smallest summed neighbour distance,
    then to the lowest class label. Equidistant neighbours are ranked by
    training-row order.
    """

    classes: np.ndarray
    X: np.ndarray
    y: np.ndarray
    k: int
    family = "knn"

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def _predict_codes(self, Q: np.ndarray) -> np.ndarray:
        n_classes = self.classes.shape[0]
        train_sq = np.einsum("ij,ij->i", self.X, self.X)
        out = np.empty(Q.shape[0], dtype=np.int64)
        rows = np.arange(min(_CHUNK, Q.shape[0]))
        for start in range(0, Q.shape[0], _CHUNK):
            q = Q[start : start + _CHUNK]
            d2 = np.einsum("ij,ij->i", q, q)[:, None] + train_sq[None, :] - 2.0 * (q @ self.X.T)
            dist = np.sqrt(np.maximum(d2, 0.0))
            nn = np.argsort(dist, axis=1, kind="stable")[:, : self.k]
            r = rows[: q.shape[0]]
            votes = np.zeros((q.shape[0], n_classes))
            dsum = np.zeros((q.shape[0], n_classes))
            lab = self.y[nn]
            for j in range(self.k):
                np.add.at(votes, (r, lab[:, j]), 1.0)
                np.add.at(dsum, (r, lab[:, j]), dist[r, nn[:, j]])
            for i in range(q.shape[0]):
                best = np.flatnonzero(votes[i] == votes[i].max())
                if best.shape[0] > 1:
                    best = best[np.flatnonzero(dsum[i, best] == dsum[i, best].min())]
                out[start + i] = best[0]
        return out

    def predict(self, data) -> np.ndarray:
        Q = as_values(data)
        if Q.shape[0] == 0:
            return self.classes[:0]
        Q = check_width(Q, self.n_features)
        return self.classes[self._predict_codes(Q)]


def fit_knn(train, labels=None, k: int = 5) -> KnnModel:
    X, lab = split_xy(train, labels)
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    if k > X.shape[0]:
        raise ValueError(f"k={k} exceeds the training-set size {X.shape[0]}")
    classes, y = encode(lab)
    return KnnModel(classes, np.array(X, copy=True), y, int(k))
