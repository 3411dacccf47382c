"""Classifiers used by the experiments, a model-spec registry, and JSON I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Union

import numpy as np

from ._base import as_values, labels_to_list
from .knn import KnnModel, fit_knn
from .logistic import LogisticModel, fit_logistic, loss_and_grad
from .oracle import OracleThresholdModel, oracle_accuracy_analytic, oracle_threshold
from .qda import ClassGaussian, QdaModel, fit_qda
from .trees import ForestModel, TreeArrays, TreeModel, fit_forest, fit_tree

TrainedModel = Union[QdaModel, OracleThresholdModel, LogisticModel, KnnModel, TreeModel, ForestModel]

SCHEMA = "hdsep.model/1"

__all__ = [
    "ModelSpec",
    "STANDARD_MODELS",
    "TrainedModel",
    "fit_model",
    "predict",
    "model_to_dict",
    "model_from_dict",
    "model_to_json",
    "model_from_json",
    "fit_qda",
    "fit_logistic",
    "fit_knn",
    "fit_tree",
    "fit_forest",
    "oracle_threshold",
    "oracle_accuracy_analytic",
    "loss_and_grad",
    "QdaModel",
    "OracleThresholdModel",
    "LogisticModel",
    "KnnModel",
    "TreeModel",
    "ForestModel",
]


@dataclass(frozen=True)
class ModelSpec:
    """Family name plus hyperparameters.

    ``seed=None`` lets the caller (e.g. a CV fold) supply a derived seed;
    a fixed ``seed`` is used for every fit.
    """

    family: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    name: Optional[str] = None

    @property
    def label(self) -> str:
        return self.name or self.family

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params), "seed": self.seed, "name": self.label}


QDA = ModelSpec("qda", {"reg": 0.4})
LOGISTIC = ModelSpec("logistic", {"l2_strength": 1.0, "max_iter": 3000})
KNN = ModelSpec("knn", {"k": 5})
TREE = ModelSpec("tree", {"max_depth": 5})
FOREST = ModelSpec("forest", {"tree_count": 100}, seed=0)
STANDARD_MODELS = {"logistic": LOGISTIC, "knn": KNN, "tree": TREE, "forest": FOREST, "qda": QDA}


def fit_model(spec: ModelSpec, train, labels=None, seed: int = 0) -> TrainedModel:
    s = spec.seed if spec.seed is not None else seed
    p = dict(spec.params)
    fam = spec.family
    if fam == "qda":
        return fit_qda(train, labels, **p)
    if fam == "logistic":
        return fit_logistic(train, labels, **p)
    if fam == "knn":
        return fit_knn(train, labels, **p)
    if fam == "tree":
        return fit_tree(train, labels, seed=s, **p)
    if fam == "forest":
        return fit_forest(train, labels, seed=s, **p)
    raise ValueError(f"unknown model family {fam!r}")


def predict(model: TrainedModel, data) -> np.ndarray:
    return model.predict(as_values(data))


# --- serialisation ------------------------------------------------------------


def _arr(a) -> list:
    return np.asarray(a).tolist()


def _tree_to_dict(t: TreeArrays) -> dict:
    return {
        "feature": _arr(t.feature),
        "threshold": _arr(t.threshold),
        "left": _arr(t.left),
        "right": _arr(t.right),
        "value": _arr(t.value),
        "cover": _arr(t.cover),
    }


def _tree_from_dict(d: dict) -> TreeArrays:
    return TreeArrays(
        np.array(d["feature"], dtype=np.int64),
        np.array(d["threshold"], dtype=float),
        np.array(d["left"], dtype=np.int64),
        np.array(d["right"], dtype=np.int64),
        np.array(d["value"], dtype=float),
        np.array(d["cover"], dtype=float),
    )


def model_to_dict(model: TrainedModel) -> dict:
    fam = model.family
    out: Dict[str, Any] = {"schema": SCHEMA, "family": fam}
    if fam != "oracle":
        out["classes"] = labels_to_list(model.classes)
    if isinstance(model, QdaModel):
        out["reg"] = model.reg
        out["priors"] = _arr(model.priors)
        out["components"] = [
            {"mean": _arr(c.mean), "basis": _arr(c.basis), "eigvals": _arr(c.eigvals),
             "floor": c.floor, "logdet": c.logdet}
            for c in model.components
        ]
    elif isinstance(model, OracleThresholdModel):
        out.update(n=model.n, mu=model.mu, sigma1=model.sigma1, sigma2=model.sigma2,
                   threshold=model.threshold, classes=labels_to_list(model.classes))
    elif isinstance(model, LogisticModel):
        out.update(weights=_arr(model.weights), bias=model.bias, l2_strength=model.l2_strength,
                   max_iter=model.max_iter, n_iter=model.n_iter, converged=model.converged)
    elif isinstance(model, KnnModel):
        out.update(k=model.k, X=_arr(model.X), y=_arr(model.y))
    elif isinstance(model, TreeModel):
        out.update(n_features=model.n_features, max_depth=model.max_depth, min_leaf=model.min_leaf,
                   seed=model.seed, tree=_tree_to_dict(model.tree))
    elif isinstance(model, ForestModel):
        out.update(n_features=model.n_features, tree_count=model.tree_count, max_depth=model.max_depth,
                   min_leaf=model.min_leaf, max_features=model.max_features, bootstrap=model.bootstrap,
                   seed=model.seed, trees=[_tree_to_dict(t) for t in model.trees])
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    return out


def model_from_dict(d: dict) -> TrainedModel:
    if d.get("schema") != SCHEMA:
        raise ValueError(f"unsupported model schema {d.get('schema')!r}")
    fam = d["family"]
    classes = np.array(d["classes"])
    if fam == "qda":
        comps = [
            ClassGaussian(np.array(c["mean"], dtype=float),
                          np.array(c["basis"], dtype=float).reshape(len(c["mean"]), len(c["eigvals"])),
                          np.array(c["eigvals"], dtype=float), c["floor"], c["logdet"])
            for c in d["components"]
        ]
        return QdaModel(classes, np.array(d["priors"]), comps, d["reg"])
    if fam == "oracle":
        return OracleThresholdModel(d["n"], d["mu"], d["sigma1"], d["sigma2"], d["threshold"], classes)
    if fam == "logistic":
        return LogisticModel(classes, np.array(d["weights"], dtype=float), d["bias"], d["l2_strength"],
                             d["max_iter"], d["n_iter"], d["converged"])
    if fam == "knn":
        return KnnModel(classes, np.array(d["X"], dtype=float), np.array(d["y"], dtype=np.int64), d["k"])
    if fam == "tree":
        return TreeModel(classes, _tree_from_dict(d["tree"]), d["n_features"], d["max_depth"],
                         d["min_leaf"], d["seed"])
    if fam == "forest":
        return ForestModel(classes, [_tree_from_dict(t) for t in d["trees"]], d["n_features"], d["tree_count"],
                           d["max_depth"], d["min_leaf"], d["max_features"], d["bootstrap"], d["seed"])
    raise ValueError(f"unknown model family {fam!r}")


def model_to_json(model: TrainedModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))


def model_from_json(text: str) -> TrainedModel:
    return model_from_dict(json.loads(text))
