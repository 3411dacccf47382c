"""Path-dependent TreeSHAP for the forests in :mod:`hdsep.models.trees`.

The explained output is the positive-class probability of a tree (its leaf
class frequency); forest attributions are the average over trees, so for a
forest the explained quantity is the mean leaf probability, which equals the
tree vote fraction when leaves are pure. Node covers are the bootstrap-weighted
training counts stored at fit time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from numba import njit

from .errors import DimensionMismatchError
from .models import ForestModel, ModelSpec, TreeModel, fit_model
from .models._base import as_values
from .models.trees import TreeArrays
from .synthgen import SpectraMatrix

__all__ = ["AttributionMap", "tree_shap", "windowed_shap_map", "tree_values", "tiles"]


# --- core algorithm (one tree, one sample) -----------------------------------


@njit(cache=True)
def _extend(fi, zf, of, pw, depth, zero_fraction, one_fraction, feature):
    fi[depth] = feature
    zf[depth] = zero_fraction
    of[depth] = one_fraction
    pw[depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pw[i + 1] += one_fraction * pw[i] * (i + 1) / (depth + 1)
        pw[i] = zero_fraction * pw[i] * (depth - i) / (depth + 1)


@njit(cache=True)
def _unwind(fi, zf, of, pw, depth, path_index):
    one_fraction = of[path_index]
    zero_fraction = zf[path_index]
    next_one = pw[depth]
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = pw[i]
            pw[i] = next_one * (depth + 1) / ((i + 1) * one_fraction)
            next_one = tmp - pw[i] * zero_fraction * (depth - i) / (depth + 1)
        else:
            pw[i] = pw[i] * (depth + 1) / (zero_fraction * (depth - i))
    for i in range(path_index, depth):
        fi[i] = fi[i + 1]
        zf[i] = zf[i + 1]
        of[i] = of[i + 1]


@njit(cache=True)
def _unwound_sum(fi, zf, of, pw, depth, path_index):
    one_fraction = of[path_index]
    zero_fraction = zf[path_index]
    next_one = pw[depth]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = next_one * (depth + 1) / ((i + 1) * one_fraction)
            total += tmp
            next_one = pw[i] - tmp * zero_fraction * (depth - i) / (depth + 1)
        else:
            total += (pw[i] / zero_fraction) / ((depth - i) / (depth + 1))
    return total


# recursive functions cannot be loaded back from numba's on-disk cache
@njit
def _recurse(feature, threshold, left, right, leaf_value, cover, x, phi, node, depth,
             pfi, pzf, pof, ppw, zero_fraction, one_fraction, split_feature):
    # each level works on a fresh segment of the path buffers
    fi = pfi[depth + 1:]
    zf = pzf[depth + 1:]
    of = pof[depth + 1:]
    pw = ppw[depth + 1:]
    fi[: depth + 1] = pfi[: depth + 1]
    zf[: depth + 1] = pzf[: depth + 1]
    of[: depth + 1] = pof[: depth + 1]
    pw[: depth + 1] = ppw[: depth + 1]

    _extend(fi, zf, of, pw, depth, zero_fraction, one_fraction, split_feature)

    f = feature[node]
    if f < 0:
        for i in range(1, depth + 1):
            w = _unwound_sum(fi, zf, of, pw, depth, i)
            phi[fi[i]] += w * (of[i] - zf[i]) * leaf_value[node]
        return

    if x[f] <= threshold[node]:
        hot, cold = left[node], right[node]
    else:
        hot, cold = right[node], left[node]
    w = cover[node]
    hot_zero = cover[hot] / w
    cold_zero = cover[cold] / w
    incoming_zero = 1.0
    incoming_one = 1.0

    path_index = 0
    while path_index <= depth:
        if fi[path_index] == f:
            break
        path_index += 1
    if path_index != depth + 1:
        incoming_zero = zf[path_index]
        incoming_one = of[path_index]
        _unwind(fi, zf, of, pw, depth, path_index)
        depth -= 1

    _recurse(feature, threshold, left, right, leaf_value, cover, x, phi, hot, depth + 1,
             fi, zf, of, pw, hot_zero * incoming_zero, incoming_one, f)
    _recurse(feature, threshold, left, right, leaf_value, cover, x, phi, cold, depth + 1,
             fi, zf, of, pw, cold_zero * incoming_zero, 0.0, f)


@njit
def _shap_rows(feature, threshold, left, right, leaf_value, cover, max_depth, X, out):
    size = (max_depth + 2) * (max_depth + 3) // 2
    for r in range(X.shape[0]):
        fi = np.zeros(size, np.int64)
        zf = np.zeros(size)
        of = np.zeros(size)
        pw = np.zeros(size)
        _recurse(feature, threshold, left, right, leaf_value, cover, X[r], out[r], 0, 0,
                 fi, zf, of, pw, 1.0, 1.0, -1)


def tree_values(tree: TreeArrays, positive: int) -> np.ndarray:
    """Positive-class probability per node (only leaves are read)."""
    return np.ascontiguousarray(tree.proba[:, positive])


def _expected_value(tree: TreeArrays, leaf_value: np.ndarray) -> float:
    ev = np.empty(tree.n_nodes)
    for i in range(tree.n_nodes - 1, -1, -1):
        if tree.feature[i] < 0:
            ev[i] = leaf_value[i]
        else:
            l, r = tree.left[i], tree.right[i]
            ev[i] = (tree.cover[l] * ev[l] + tree.cover[r] * ev[r]) / (tree.cover[l] + tree.cover[r])
    return float(ev[0])


def _tree_shap_matrix(tree: TreeArrays, X: np.ndarray, positive: int):
    if tree.cover is None or tree.cover.shape[0] != tree.n_nodes:
        raise ValueError("tree lacks node cover counts")
    leaf_value = tree_values(tree, positive)
    phi = np.zeros((X.shape[0], X.shape[1] + 1))
    _shap_rows(tree.feature, tree.threshold, tree.left, tree.right, leaf_value,
               np.ascontiguousarray(tree.cover, dtype=float), tree.depth(), X, phi)
    return phi[:, :-1], _expected_value(tree, leaf_value)


# --- public API -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AttributionMap:
    """Mean |SHAP| per feature plus the per-sample matrix it came from.

    ``pixels`` are global column indices of the explained features and
    ``axis`` the matching wavelengths when known.
    """

    mean_abs: np.ndarray
    values: Optional[np.ndarray]
    base_value: float
    pixels: np.ndarray
    axis: Optional[np.ndarray] = None
    window: dict = field(default_factory=dict)
    predictions: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "base_value": self.base_value,
            "pixels": self.pixels.tolist(),
            "axis": None if self.axis is None else self.axis.tolist(),
            "mean_abs_shap": self.mean_abs.tolist(),
        }

    def csv_rows(self):
        for j, px in enumerate(self.pixels):
            yield {
                "window_start": self.window.get("start", ""),
                "window_width": self.window.get("width", ""),
                "pixel": int(px),
                "wavelength": "" if self.axis is None else repr(float(self.axis[j])),
                "mean_abs_shap": repr(float(self.mean_abs[j])),
            }


def tree_shap(model, data, positive=None, keep_values: bool = True) -> AttributionMap:
    """Exact path-dependent SHAP values of a fitted tree or forest.

    ``positive`` is the class label whose probability is explained; it
    defaults to the last class (the second one in a binary problem).
    """
    trees = model.trees if isinstance(model, ForestModel) else [model.tree]
    X = np.ascontiguousarray(as_values(data), dtype=float)
    if X.shape[0] and X.shape[1] != model.n_features:
        raise DimensionMismatchError(f"model expects {model.n_features} features, got {X.shape[1]}")
    X = X.reshape(X.shape[0], model.n_features)
    classes = list(model.classes)
    pos = len(classes) - 1 if positive is None else classes.index(positive)

    total = np.zeros((X.shape[0], model.n_features))
    base = 0.0
    for t in trees:
        phi, ev = _tree_shap_matrix(t, X, pos)
        total += phi
        base += ev
    total /= len(trees)
    base /= len(trees)
    pred = model.predict_proba(X)[:, pos] if X.shape[0] else np.zeros(0)
    axis = data.axis if isinstance(data, SpectraMatrix) else None
    mean_abs = np.abs(total).mean(axis=0) if X.shape[0] else np.zeros(model.n_features)
    return AttributionMap(
        mean_abs, total if keep_values else None, float(base),
        np.arange(model.n_features), axis, {}, pred,
    )


def tiles(width_total: int, width: int):
    """Start offsets of consecutive non-overlapping windows; a partial tail is dropped."""
    if width < 1 or width > width_total:
        raise ValueError(f"window width {width} must lie in [1, {width_total}]")
    return list(range(0, width_total - width + 1, width))


def windowed_shap_map(
    data: SpectraMatrix,
    widths: Sequence[int],
    model_spec: Optional[ModelSpec] = None,
    plan=None,
    seed: int = 0,
    keep_values: bool = False,
) -> List[AttributionMap]:
    """Mean |SHAP| per pixel for every window of every width.

    Each window's forest is refit on all rows of that window after an optional
    cross-validated accuracy estimate (``plan``); SHAP values are computed for
    every row with that full-data fit. Pixel positions are global columns.
    """
    from .evalharness import evaluate

    if not widths:
        raise ValueError("widths must not be empty")
    if data.labels is None:
        raise ValueError("data must be labelled")
    spec = model_spec or ModelSpec("forest", {"tree_count": 100}, seed=seed)
    maps = []
    for w in widths:
        for start in tiles(data.n_features, int(w)):
            cols = np.arange(start, start + int(w))
            sub = data.take_columns(cols)
            meta = {"start": int(start), "width": int(w), "fit": "full-data"}
            if plan is not None:
                res = evaluate(spec, sub, plan)
                meta["cv_accuracy"] = res.mean
                meta["cv_sd"] = res.sd
            model = fit_model(spec, sub, seed=seed)
            amap = tree_shap(model, sub, keep_values=keep_values)
            maps.append(
                AttributionMap(amap.mean_abs, amap.values, amap.base_value, cols,
                               sub.axis, meta, amap.predictions)
            )
    return maps
