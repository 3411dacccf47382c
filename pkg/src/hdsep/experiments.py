"""Registry of the synthetic experiments (N1-N4, S1-S3) as parameter sweeps.

Every grid point gets its own seed, ``derive_seed(master_seed, id, coords,
repetition)``, and each class is drawn from a further sub-seed, so a report
is identical whatever the number of workers or the execution order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from ._parallel import pmap
from ._seeding import derive_seed
from .errors import DegenerateRuleError
from .evalharness import EvalPlan, Holdout, StratifiedKFold, evaluate
from .models import STANDARD_MODELS, ModelSpec, oracle_accuracy_analytic, oracle_threshold
from .synthgen import (
    GaussianClassSpec,
    Isotropic,
    LorentzianSpectrumSpec,
    SkewNormalClassSpec,
    SpectraMatrix,
    ToeplitzGeometric,
    generate_lorentzian_class,
    sample_gaussian_class,
    sample_skew_normal_class,
    stack_classes,
)

__all__ = [
    "EXPERIMENT_IDS",
    "ExperimentConfig",
    "AuditReport",
    "default_config",
    "grid_points",
    "make_dataset",
    "run_experiment",
    "apply_overrides",
]

EXPERIMENT_IDS = ("N1", "N2", "N3", "N4", "S1", "S2", "S3")

S_DIMS = [5, 10, 50, 100, 1000, 2000, 5000, 10000]
N4_SWEEPS = {"mu_sigma": ("rel_mu", "rel_sigma"), "mu_gamma": ("rel_mu", "rel_gamma"),
             "sigma_gamma": ("rel_sigma", "rel_gamma")}

ORACLE = ModelSpec("oracle")
_FOUR = ["logistic", "knn", "tree", "forest"]


def _r(values):
    return [round(float(v), 10) for v in values]


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    grid: Dict[str, List[Any]]
    params: Dict[str, Any]
    models: List[ModelSpec]
    plan: EvalPlan
    repetitions: int = 1
    master_seed: int = 0

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "grid": {k: list(v) for k, v in self.grid.items()},
            "params": dict(self.params),
            "models": [m.to_dict() for m in self.models],
            "plan": self.plan.to_dict(),
            "repetitions": self.repetitions,
            "master_seed": self.master_seed,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def _standard_models():
    return [replace(STANDARD_MODELS[k], seed=None) for k in _FOUR]


def default_config(experiment_id: str, seed: int = 0) -> ExperimentConfig:
    """Grids and settings of the experiment overview table."""
    eid = experiment_id.upper()
    qda = [STANDARD_MODELS["qda"]]
    holdout = EvalPlan(Holdout(0.2), seed)
    skf = EvalPlan(StratifiedKFold(5), seed)
    if eid == "N1":
        grid = {"delta_sigma": _r(np.linspace(0, 2, 21)), "n": [5, 10, 50, 500],
                "covariance": ["isotropic", "toeplitz"]}
        params = {"mu": 1.0, "sigma1": 1.0, "rho": 0.95, "count": 1000}
        return ExperimentConfig(eid, grid, params, qda, holdout, 1, seed)
    if eid == "N2":
        grid = {"delta_sigma": _r(np.linspace(0, 1, 21)), "n": [30, 100, 500, 1000, 5000]}
        params = {"mu": 1.0, "sigma1": 1.0, "count": 1000}
        return ExperimentConfig(eid, grid, params, [ORACLE], holdout, 1, seed)
    if eid == "N3":
        grid = {"delta_sigma": [0.1, 0.3, 0.6, 0.9, 1.2, 1.5, 2.0],
                "n": [1, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000]}
        params = {"mu": 0.0, "sigma1": 1.0, "count": 1000}
        return ExperimentConfig(eid, grid, params, qda, holdout, 1, seed)
    if eid == "N4":
        grid = {"sweep": list(N4_SWEEPS), "rel_mu": _r(np.linspace(0, 0.15, 6)),
                "rel_sigma": _r(np.linspace(0, 2, 6)), "rel_gamma": _r(np.linspace(0, 8, 6))}
        params = {"n": 50, "mu": 10.0, "sigma": 1.0, "gamma": 0.5, "count": 100}
        return ExperimentConfig(eid, grid, params, _standard_models(), skf, 1, seed)
    if eid in ("S1", "S2", "S3"):
        params = {"count": 500, "centre_mean": 50.0, "centre_sd": 10.0, "fwhm1": 7.0,
                  "fwhm2": 9.0 if eid == "S2" else 7.0}
        if eid == "S3":
            params.update(noise_mean1=0.0, noise_mean2=0.01, noise_sd=0.01)
        return ExperimentConfig(eid, {"n": list(S_DIMS)}, params, _standard_models(), skf, 1, seed)
    raise ValueError(f"unknown experiment id {experiment_id!r}; expected one of {EXPERIMENT_IDS}")


def apply_overrides(config: ExperimentConfig, overrides: Dict[str, Sequence[Any]]) -> ExperimentConfig:
    """Replace grid axes (lists) or scalar parameters (single value)."""
    grid = dict(config.grid)
    params = dict(config.params)
    for key, values in overrides.items():
        values = list(values)
        if key in grid:
            if not values:
                raise ValueError(f"grid axis {key!r} cannot be empty")
            grid[key] = values
        elif key in params:
            if len(values) != 1:
                raise ValueError(f"parameter {key!r} takes a single value")
            params[key] = type(params[key])(values[0]) if params[key] is not None else values[0]
        else:
            raise ValueError(f"invalid grid: {config.experiment_id} has no axis or parameter {key!r}")
    _validate(config.experiment_id, grid)
    return replace(config, grid=grid, params=params)


def _validate(eid: str, grid: Dict[str, list]):
    expected = set(default_config(eid).grid) if eid in EXPERIMENT_IDS else None
    if expected is None or set(grid) != expected:
        raise ValueError(f"invalid grid for {eid}: axes {sorted(grid)}")
    if "sweep" in grid and not set(grid["sweep"]) <= set(N4_SWEEPS):
        raise ValueError(f"unknown N4 sweep in {grid['sweep']}")
    if "covariance" in grid and not set(grid["covariance"]) <= {"isotropic", "toeplitz"}:
        raise ValueError("covariance must be isotropic or toeplitz")


def grid_points(config: ExperimentConfig) -> List[Dict[str, Any]]:
    """Grid coordinates in a fixed order (N4: three 2-D sweeps)."""
    _validate(config.experiment_id, config.grid)
    g = config.grid
    if config.experiment_id == "N4":
        pts = []
        for sweep in g["sweep"]:
            a, b = N4_SWEEPS[sweep]
            for va, vb in itertools.product(g[a], g[b]):
                p = {"sweep": sweep, "rel_mu": 0.0, "rel_sigma": 0.0, "rel_gamma": 0.0}
                p[a], p[b] = va, vb
                pts.append(p)
        return pts
    keys = list(g)
    return [dict(zip(keys, vals)) for vals in itertools.product(*(g[k] for k in keys))]


def make_dataset(eid: str, point: Dict[str, Any], params: Dict[str, Any], seed: int) -> SpectraMatrix:
    """Labelled two-class dataset (labels 0/1) for one grid point."""
    s0, s1 = derive_seed(seed, "class", 0), derive_seed(seed, "class", 1)
    count = int(params["count"])
    if eid in ("N1", "N2", "N3"):
        n = int(point["n"])
        sigma1 = float(params["sigma1"])
        sigma2 = sigma1 + float(point["delta_sigma"])
        cov = Isotropic()
        if point.get("covariance") == "toeplitz":
            cov = ToeplitzGeometric(float(params["rho"]))
        a = sample_gaussian_class(GaussianClassSpec(n, params["mu"], sigma1, cov), count, s0)
        b = sample_gaussian_class(GaussianClassSpec(n, params["mu"], sigma2, cov), count, s1)
        return stack_classes(a, b)
    if eid == "N4":
        mu, sig, gam = float(params["mu"]), float(params["sigma"]), float(params["gamma"])
        n = int(params["n"])
        a = sample_skew_normal_class(SkewNormalClassSpec(n, mu, sig, gam), count, s0)
        b = sample_skew_normal_class(
            SkewNormalClassSpec(n, mu * (1 + point["rel_mu"]), sig * (1 + point["rel_sigma"]),
                                gam * (1 + point["rel_gamma"])),
            count, s1,
        )
        return stack_classes(a, b)
    if eid in ("S1", "S2", "S3"):
        n = int(point["n"])
        noise = [None, None]
        if eid == "S3":
            noise = [(params["noise_mean1"], params["noise_sd"]), (params["noise_mean2"], params["noise_sd"])]
        specs = [
            LorentzianSpectrumSpec(n, params["centre_mean"], params["centre_sd"], params[f"fwhm{k + 1}"],
                                   count, noise[k])
            for k in range(2)
        ]
        return stack_classes(generate_lorentzian_class(specs[0], s0), generate_lorentzian_class(specs[1], s1))
    raise ValueError(f"unknown experiment id {eid!r}")


def _oracle_record(point, params, data) -> dict:
    n = int(point["n"])
    s1 = float(params["sigma1"])
    s2 = s1 + float(point["delta_sigma"])
    try:
        rule = oracle_threshold(n, params["mu"], s1, s2, labels=(0, 1))
        pred = rule.predict(data.values)
    except DegenerateRuleError:
        pred = np.zeros(data.n_samples, dtype=data.labels.dtype)
    acc = float(np.mean(pred == data.labels))
    return {"mean": acc, "sd": 0.0, "fold_accuracies": [acc], "fold_sizes": [data.n_samples],
            "analytic": oracle_accuracy_analytic(n, s1, s2)}


def _run_task(config: ExperimentConfig, point: Dict[str, Any], rep: int) -> List[dict]:
    eid = config.experiment_id
    seed = derive_seed(config.master_seed, eid, point, rep)
    data = make_dataset(eid, point, config.params, seed)
    plan = config.plan.with_seed(derive_seed(seed, "plan"))
    out = []
    for spec in config.models:
        if spec.family == "oracle":
            res = _oracle_record(point, config.params, data)
        else:
            res = evaluate(spec, data, plan).to_dict()
        rec = {"coords": dict(point), "model": spec.label, "repetition": rep, "seed": seed,
               "n_per_class": int(config.params["count"])}
        rec.update(res)
        out.append(rec)
    return out


def _run_task_star(args):
    return _run_task(*args)


@dataclass
class AuditReport:
    experiment_id: str
    records: List[dict]
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema": "hdsep.audit_report/1", "experiment_id": self.experiment_id,
                "provenance": self.provenance, "records": self.records}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def select(self, model: Optional[str] = None, **coords) -> List[dict]:
        out = []
        for r in self.records:
            if model is not None and r["model"] != model:
                continue
            if all(np.isclose(r["coords"].get(k), v) if isinstance(v, float) else r["coords"].get(k) == v
                   for k, v in coords.items()):
                out.append(r)
        return out

    def mean(self, model: Optional[str] = None, **coords) -> float:
        recs = self.select(model, **coords)
        if not recs:
            raise KeyError(f"no record for model={model} {coords}")
        return float(np.mean([r["mean"] for r in recs]))

    def to_csv(self) -> str:
        """Long format: one row per grid point x model x fold."""
        axes = []
        for r in self.records:
            for k in r["coords"]:
                if k not in axes:
                    axes.append(k)
        has_analytic = any("analytic" in r for r in self.records)
        cols = ["experiment_id", *axes, "model", "repetition", "fold", "fold_accuracy", "fold_size",
                "mean", "sd", "n_per_class", "seed"] + (["analytic"] if has_analytic else [])
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in self.records:
            for f, (acc, size) in enumerate(zip(r["fold_accuracies"], r["fold_sizes"])):
                row = {"experiment_id": self.experiment_id, "model": r["model"], "repetition": r["repetition"],
                       "fold": f, "fold_accuracy": repr(acc), "fold_size": size, "mean": repr(r["mean"]),
                       "sd": repr(r["sd"]), "n_per_class": r["n_per_class"], "seed": r["seed"]}
                for k in axes:
                    v = r["coords"].get(k, "")
                    row[k] = repr(v) if isinstance(v, float) else v
                if has_analytic:
                    row["analytic"] = repr(r["analytic"]) if "analytic" in r else ""
                w.writerow(row)
        return buf.getvalue()


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> AuditReport:
    """Evaluate every model at every grid point (and repetition)."""
    if config.repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    tasks = [(config, p, rep) for p in grid_points(config) for rep in range(config.repetitions)]
    chunks = pmap(_run_task_star, tasks, jobs)
    records = [r for chunk in chunks for r in chunk]
    prov = {"config": config.to_dict(), "config_hash": config.config_hash(), "code_version": __version__}
    return AuditReport(config.experiment_id, records, prov)
