"""Train/test splitting and cross-validated accuracy."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple, Union

import numpy as np

from ._seeding import derive_seed, make_rng
from .errors import FoldError
from .models import ModelSpec, fit_model
from .synthgen import SpectraMatrix

__all__ = [
    "Holdout",
    "StratifiedKFold",
    "LeaveOneOut",
    "EvalPlan",
    "EvalResult",
    "split",
    "evaluate",
    "accuracy",
]


@dataclass(frozen=True)
class Holdout:
    test_fraction: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class StratifiedKFold:
    k: int = 5

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ValueError("k must be an integer >= 2")


@dataclass(frozen=True)
class LeaveOneOut:
    pass


SplitKind = Union[Holdout, StratifiedKFold, LeaveOneOut]


@dataclass(frozen=True)
class EvalPlan:
    split: SplitKind = field(default_factory=lambda: StratifiedKFold(5))
    seed: int = 0
    metric: str = "accuracy"

    def __post_init__(self):
        if self.metric != "accuracy":
            raise ValueError("only accuracy is supported")

    def to_dict(self) -> dict:
        s = self.split
        if isinstance(s, Holdout):
            d = {"kind": "holdout", "test_fraction": s.test_fraction}
        elif isinstance(s, StratifiedKFold):
            d = {"kind": "stratified_kfold", "k": s.k}
        else:
            d = {"kind": "leave_one_out"}
        return {"split": d, "seed": self.seed, "metric": self.metric}

    def with_seed(self, seed: int) -> "EvalPlan":
        return EvalPlan(self.split, seed, self.metric)


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    if y_true.shape[0] == 0:
        raise ValueError("accuracy of an empty set is undefined")
    return float(np.mean(y_true == np.asarray(y_pred)))


def split(plan: EvalPlan, labels) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Deterministic (train, test) index pairs.

    Holdout and k-fold are stratified: each class is shuffled with its own
    sub-seed and dealt round-robin, with the dealing offset carried between
    classes so fold sizes stay within one of each other.
    """
    labels = np.asarray(labels)
    N = labels.shape[0]
    if N < 2:
        raise ValueError("need at least two samples to split")
    s = plan.split
    if isinstance(s, LeaveOneOut):
        every = np.arange(N)
        return [(np.delete(every, i), np.array([i])) for i in range(N)]

    classes = np.unique(labels)
    members = []
    for c in classes:
        idx = np.flatnonzero(labels == c)
        rng = make_rng(derive_seed(plan.seed, "split", str(c)))
        members.append(idx[rng.permutation(idx.shape[0])])

    if isinstance(s, Holdout):
        test = []
        for c, idx in zip(classes, members):
            n_test = int(round(s.test_fraction * idx.shape[0]))
            if n_test < 1 or n_test >= idx.shape[0]:
                raise ValueError(f"class {c!r} too small for a {s.test_fraction} holdout")
            test.append(idx[:n_test])
        test = np.sort(np.concatenate(test))
        train = np.setdiff1d(np.arange(N), test)
        return [(train, test)]

    k = s.k
    fold_of = np.empty(N, dtype=np.int64)
    offset = 0
    for c, idx in zip(classes, members):
        if idx.shape[0] < k:
            raise ValueError(f"class {c!r} has {idx.shape[0]} members, fewer than {k} folds")
        fold_of[idx] = (offset + np.arange(idx.shape[0])) % k
        offset = (offset + idx.shape[0]) % k
    out = []
    for f in range(k):
        test = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        out.append((train, test))
    return out


@dataclass(frozen=True)
class EvalResult:
    """Fold accuracies and their mean and population sd (divide by k)."""

    mean: float
    sd: float
    fold_accuracies: Tuple[float, ...]
    fold_sizes: Tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "fold_accuracies": list(self.fold_accuracies),
            "fold_sizes": list(self.fold_sizes),
        }


def evaluate(model_spec: ModelSpec, dataset: SpectraMatrix, plan: EvalPlan) -> EvalResult:
    """Fit a fresh model per fold and score it on the held-out rows.

    Folds use ``derive_seed(plan.seed, "fold", i)`` unless the spec pins a seed.
    LOO-CV pools its single-row folds: the mean is the overall accuracy and the
    sd that of the per-row 0/1 outcomes.
    """
    if dataset.labels is None:
        raise ValueError("dataset must be labelled")
    X, y = dataset.values, dataset.labels
    accs, sizes = [], []
    for i, (tr, te) in enumerate(split(plan, y)):
        try:
            model = fit_model(model_spec, X[tr], y[tr], seed=derive_seed(plan.seed, "fold", i))
            pred = model.predict(X[te])
        except Exception as exc:  # annotate with the fold index
            raise FoldError(i, exc) from exc
        accs.append(accuracy(y[te], pred))
        sizes.append(int(te.shape[0]))
    a = np.asarray(accs)
    return EvalResult(float(a.mean()), float(a.std()), tuple(float(v) for v in accs), tuple(sizes))
