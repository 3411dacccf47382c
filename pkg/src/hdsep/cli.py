"""Command-line front end.

Commands::

    hdsep run <ID>            synthetic experiments N1-N4, S1-S3, or with --data Ra1..Rb5
    hdsep concentration       norm histograms and overlaps of isotropic Gaussians
    hdsep audit <kind>        global-shuffle | row-shuffle | pixel-sweep | window-sweep | shap

Settings resolve as built-in defaults < ``--config`` file < flags. Results go
to ``--out-dir`` (default ``$HDSEP_OUT_DIR`` or ``./hdsep-out``) together with
``manifest.json``. Exit codes: 0 success, 2 usage or config error, 3 data
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .errors import DataFormatError, FoldError, SingularCovarianceError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

R_IDS = {f"R{t}{i}" for t in "ab" for i in range(1, 6)}
R_TASKS = {"a": "EVOO:LOO", "b": "EVOO:VOO"}
R_KINDS = {1: "global-shuffle", 2: "row-shuffle", 3: "pixel-sweep", 4: "window-sweep", 5: "shap"}
AUDIT_KINDS = tuple(R_KINDS.values())
DEFAULT_WIDTHS = (20, 50, 200, 400)


class UsageError(ValueError):
    pass


# --- small parsers ---------------------------------------------------------------


def _scalar(tok: str):
    tok = tok.strip()
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        return tok


def parse_values(text: str) -> list:
    """Comma list (``1,2,5``) or inclusive range ``start:stop:step``."""
    text = text.strip()
    if not text:
        raise UsageError("empty value list")
    if ":" in text and "," not in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"range must be start:stop:step, got {text!r}")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise UsageError(f"non-numeric range {text!r}") from None
        if step <= 0 or stop < start:
            raise UsageError(f"empty range {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        vals = [round(start + i * step, 10) for i in range(count)]
        if all(_scalar(p) == int(float(p)) and isinstance(_scalar(p), int) for p in parts):
            vals = [int(v) for v in vals]
        return vals
    return [_scalar(t) for t in text.split(",") if t.strip()]


def parse_grid_override(items: Sequence[str]) -> Dict[str, list]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--grid-override expects key=values, got {item!r}")
        key, vals = item.split("=", 1)
        out[key.strip()] = parse_values(vals)
    return out


def parse_config_file(path) -> Dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _int_list(text: str) -> List[int]:
    vals = parse_values(text)
    if not all(isinstance(v, int) for v in vals):
        raise UsageError(f"expected integers, got {text!r}")
    return vals


def _k_range(text: str):
    parts = text.replace(",", ":").split(":")
    if len(parts) != 2:
        raise UsageError(f"--k-range expects lo:hi, got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise UsageError(f"--k-range expects integers, got {text!r}") from None


# --- output helpers --------------------------------------------------------------


def _sha256_bytes(b: bytes) -> str:
    return hashlib.sha256(b).hexdigest()


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Outputs:
    """Writes result files and the run manifest."""

    def __init__(self, out_dir: Path):
        self.dir = out_dir
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: List[dict] = []

    def write(self, name: str, text: str):
        data = text.encode()
        (self.dir / name).write_bytes(data)
        self.files.append({"path": name, "sha256": _sha256_bytes(data)})

    def manifest(self, command, config, seed, inputs, started):
        doc = {
            "schema": "hdsep.manifest/1",
            "command": list(command),
            "config": config,
            "master_seed": seed,
            "code_version": __version__,
            "inputs": inputs,
            "outputs": self.files,
            "duration_s": round(time.time() - started, 3),
        }
        (self.dir / "manifest.json").write_text(json.dumps(doc, sort_keys=True, indent=1, default=str) + "\n")


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _table(rows: List[dict], cols: List[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


# --- settings resolution --------------------------------------------------------


def _resolve(args, file_cfg: Dict[str, str], key: str, default, conv=lambda x: x):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in file_cfg:
        try:
            return conv(file_cfg[key])
        except (ValueError, UsageError) as exc:
            raise UsageError(f"config key {key!r}: {exc}") from None
    return default


def _out_dir(args, file_cfg) -> Path:
    default = os.environ.get("HDSEP_OUT_DIR", "hdsep-out")
    return Path(_resolve(args, file_cfg, "out_dir", default))


def _load_task_data(path, task_text):
    from .dataio import ClassPairTask, filter_classes, load_spectra

    if not path:
        raise UsageError("--data is required for real-data experiments and audits")
    try:
        task = ClassPairTask.parse(task_text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = load_spectra(path)
    return task, filter_classes(data, task)


def _plan(cv: str, seed: int):
    from .evalharness import EvalPlan, LeaveOneOut, StratifiedKFold

    if cv in ("loo", "LOO"):
        return EvalPlan(LeaveOneOut(), seed)
    try:
        return EvalPlan(StratifiedKFold(int(cv)), seed)
    except ValueError:
        raise UsageError(f"--cv must be 'loo' or an integer >= 2, got {cv!r}") from None


# --- commands --------------------------------------------------------------------


def _run_synthetic(args, file_cfg, out: Outputs, eid: str) -> dict:
    from .experiments import apply_overrides, default_config, run_experiment
    from .models import STANDARD_MODELS, ModelSpec

    seed = int(_resolve(args, file_cfg, "seed", 0, int))
    jobs = int(_resolve(args, file_cfg, "jobs", 1, int))
    config = default_config(eid, seed)
    overrides = {k[5:]: parse_values(v) for k, v in file_cfg.items() if k.startswith("grid.")}
    overrides.update(parse_grid_override(args.grid_override))
    try:
        config = apply_overrides(config, overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    models = _resolve(args, file_cfg, "models", None)
    if models:
        specs = []
        for name in str(models).split(","):
            name = name.strip()
            if name == "oracle":
                specs.append(ModelSpec("oracle"))
            elif name in STANDARD_MODELS:
                spec = STANDARD_MODELS[name]
                specs.append(ModelSpec(spec.family, spec.params, None, spec.name))
            else:
                raise UsageError(f"unknown model {name!r}")
        if any(s.family == "oracle" for s in specs) and eid != "N2":
            raise UsageError("the oracle model applies to N2 only")
        from dataclasses import replace

        config = replace(config, models=specs)
    report = run_experiment(config, jobs=jobs)
    out.write(f"{eid}.json", report.to_json())
    out.write(f"{eid}.csv", report.to_csv())
    for rec in report.records:
        extra = f"  analytic={rec['analytic']:.4f}" if "analytic" in rec else ""
        coords = " ".join(f"{k}={v}" for k, v in rec["coords"].items())
        print(f"{eid} {coords} {rec['model']}: {rec['mean']:.4f} (sd {rec['sd']:.4f}){extra}")
    return {"experiment": config.to_dict(), "jobs": jobs}


def _audit(kind: str, args, file_cfg, out: Outputs, label: str) -> dict:
    from .attribution import windowed_shap_map
    from .audits import REGIONS, default_audit_model, permutation_audit, pixel_count_sweep, window_sweep

    seed = int(_resolve(args, file_cfg, "seed", 0, int))
    jobs = int(_resolve(args, file_cfg, "jobs", 1, int))
    task_text = _resolve(args, file_cfg, "task", "EVOO:LOO")
    cv = str(_resolve(args, file_cfg, "cv", "loo"))
    task, data = _load_task_data(_resolve(args, file_cfg, "data", None), task_text)
    plan = _plan(cv, seed)
    spec = default_audit_model(seed)
    settings = {"kind": kind, "task": task.name, "masks": [list(m) for m in task.masks], "seed": seed,
                "cv": cv, "rows": data.n_samples, "columns": data.n_features}

    if kind in ("global-shuffle", "row-shuffle"):
        res = permutation_audit(data, "global" if kind == "global-shuffle" else "row", spec, plan, seed)
        res["task"] = task.name
        out.write(f"{label}.json", _json(res))
        out.write(f"{label}.csv", _table([res], ["task", "kind", "unshuffled", "shuffled",
                                               "majority_baseline", "n_samples", "n_features"]))
        print(f"{task.name} {kind}: unshuffled {res['unshuffled']:.4f}  shuffled {res['shuffled']:.4f}"
              f"  majority baseline {res['majority_baseline']:.4f}")
    elif kind == "pixel-sweep":
        region_name = _resolve(args, file_cfg, "region", "first50")
        if region_name not in REGIONS:
            raise UsageError(f"unknown region {region_name!r}; choose from {sorted(REGIONS)}")
        k_range = _resolve(args, file_cfg, "k_range", (2, 35), _k_range)
        if isinstance(k_range, str):
            k_range = _k_range(k_range)
        repeats = int(_resolve(args, file_cfg, "repeats", 20, int))
        try:
            sweep = pixel_count_sweep(data, REGIONS[region_name], k_range, repeats, spec, plan, seed, jobs)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        out.write(f"{label}.json", sweep.to_json())
        out.write(f"{label}.csv", sweep.to_csv())
        for r in sweep.records:
            print(f"{task.name} {region_name} k={r['k']}: {r['mean']:.4f} (sd {r['sd']:.4f})")
        settings.update(region=region_name, k_range=list(k_range), repeats=repeats)
    elif kind in ("window-sweep", "shap"):
        widths = _resolve(args, file_cfg, "widths", list(DEFAULT_WIDTHS), _int_list)
        if isinstance(widths, str):
            widths = _int_list(widths)
        widths = [w for w in widths if w <= data.n_features] or widths
        if kind == "window-sweep":
            try:
                sweep = window_sweep(data, widths, spec, plan, seed, jobs)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            out.write(f"{label}.json", sweep.to_json())
            out.write(f"{label}.csv", sweep.to_csv())
            for r in sweep.records:
                print(f"{task.name} W={r['width']} start={r['start']}: {r['mean']:.4f}")
        else:
            try:
                maps = windowed_shap_map(data, widths, spec, None, seed)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            rows = [row for m in maps for row in m.csv_rows()]
            out.write(f"{label}.json", _json({"schema": "hdsep.attribution/1", "task": task.name,
                                               "maps": [m.to_dict() for m in maps]}))
            out.write(f"{label}.csv", _table(rows, ["window_start", "window_width", "pixel", "wavelength",
                                                  "mean_abs_shap"]))
            for m in maps:
                print(f"{task.name} W={m.window['width']} start={m.window['start']}: "
                      f"total mean|SHAP| {float(m.mean_abs.sum()):.4g}")
        settings["widths"] = list(widths)
    else:
        raise UsageError(f"unknown audit kind {kind!r}")
    return settings


def cmd_run(args, file_cfg, out: Outputs) -> dict:
    from .experiments import EXPERIMENT_IDS

    eid = args.experiment_id
    if eid.upper() in EXPERIMENT_IDS:
        return _run_synthetic(args, file_cfg, out, eid.upper())
    norm = eid[:1].upper() + eid[1:].lower()
    if norm in R_IDS:
        if not _resolve(args, file_cfg, "data", None):
            raise UsageError(f"{norm} needs --data <canonical spectra CSV>")
        if args.task is None and "task" not in file_cfg:
            args.task = R_TASKS[norm[1]]
        return _audit(R_KINDS[int(norm[2])], args, file_cfg, out, norm)
    raise UsageError(f"unknown experiment id {eid!r}; expected one of "
                     f"{', '.join(EXPERIMENT_IDS)} or Ra1..Rb5 (with --data)")


def cmd_concentration(args, file_cfg, out: Outputs) -> dict:
    from .synthgen import concentration_table

    n_list = _int_list(args.n_list)
    sigmas = [float(v) for v in parse_values(args.sigmas)]
    if any(n < 1 for n in n_list) or any(s <= 0 for s in sigmas) or args.samples < 2 or args.bins < 1:
        raise UsageError("n, sigma, samples and bins must be positive (samples >= 2)")
    seed = int(_resolve(args, file_cfg, "seed", 0, int))
    table = concentration_table(n_list, tuple(sigmas), args.samples, args.bins, seed=seed)
    hist_rows, summary = [], []
    for entry in table:
        n = entry["n"]
        for sigma, h in zip(entry["sigmas"], entry["histograms"]):
            for i, c in enumerate(h.counts):
                hist_rows.append({"n": n, "sigma": sigma, "bin_left": float(h.edges[i]),
                                  "bin_right": float(h.edges[i + 1]), "count": int(c),
                                  "density": float(h.density[i])})
            summary.append({"n": n, "sigma": sigma, "mean_norm": h.mean, "sd_norm": h.sd,
                            "sigma_sqrt_n": sigma * math.sqrt(n), "overlap": entry["overlap"]})
            overlap = "" if entry["overlap"] is None else f", overlap {entry['overlap']:.4f}"
            print(f"n={n} sigma={sigma}: mean |x| {h.mean:.4f} (sigma*sqrt(n) {sigma * math.sqrt(n):.4f}){overlap}")
    out.write("concentration_histograms.csv",
              _table(hist_rows, ["n", "sigma", "bin_left", "bin_right", "count", "density"]))
    out.write("concentration_summary.csv",
              _table(summary, ["n", "sigma", "mean_norm", "sd_norm", "sigma_sqrt_n", "overlap"]))
    out.write("concentration.json", _json({"schema": "hdsep.concentration/1", "summary": summary}))
    return {"n_list": n_list, "sigmas": sigmas, "samples": args.samples, "bins": args.bins, "seed": seed}


def cmd_audit(args, file_cfg, out: Outputs) -> dict:
    return _audit(args.kind, args, file_cfg, out, args.kind)


# --- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hdsep", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"hdsep {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
        sp.add_argument("--out-dir", dest="out_dir", default=None, help="output directory")
        sp.add_argument("--config", default=None, help="key = value settings file")
        sp.add_argument("--jobs", type=int, default=None, help="worker processes (results do not depend on it)")

    def data_flags(sp):
        sp.add_argument("--data", default=None, help="canonical spectra CSV")
        sp.add_argument("--task", default=None, help="class pair, e.g. EVOO:LOO")
        sp.add_argument("--region", default=None, help="pixel-sweep region: rho1..rho5 or first50")
        sp.add_argument("--k-range", dest="k_range", default=None, type=_k_range, help="lo:hi, default 2:35")
        sp.add_argument("--repeats", type=int, default=None, help="subsets per k (default 20)")
        sp.add_argument("--widths", default=None, type=_int_list, help="window widths, default 20,50,200,400")
        sp.add_argument("--cv", default=None, help="'loo' (default) or a fold count")

    r = sub.add_parser("run", help="run a registered experiment")
    r.add_argument("experiment_id")
    common(r)
    r.add_argument("--grid-override", dest="grid_override", action="append", default=[],
                   metavar="KEY=VALUES", help="comma list or start:stop:step; repeatable")
    r.add_argument("--models", default=None, help="comma list: logistic,knn,tree,forest,qda,oracle")
    data_flags(r)

    c = sub.add_parser("concentration", help="norm histograms of isotropic Gaussians")
    common(c)
    c.add_argument("--n-list", dest="n_list", default="2,50,500,5000")
    c.add_argument("--sigmas", default="1.0,1.1")
    c.add_argument("--samples", type=int, default=10000)
    c.add_argument("--bins", type=int, default=60)
    c.add_argument("--out", dest="out_dir_alias", default=None, help="alias of --out-dir")

    a = sub.add_parser("audit", help="regional sensitivity audit on real data")
    a.add_argument("kind", choices=AUDIT_KINDS)
    common(a)
    data_flags(a)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.time()
    try:
        file_cfg = parse_config_file(args.config) if args.config else {}
        if getattr(args, "out_dir_alias", None) and args.out_dir is None:
            args.out_dir = args.out_dir_alias
        out = Outputs(_out_dir(args, file_cfg))
        handler = {"run": cmd_run, "concentration": cmd_concentration, "audit": cmd_audit}[args.command]
        config = handler(args, file_cfg, out)
        inputs = {}
        data = getattr(args, "data", None) or file_cfg.get("data")
        if data and Path(data).exists():
            inputs[str(data)] = _sha256_file(data)
        out.manifest(["hdsep", *argv], config, int(_resolve(args, file_cfg, "seed", 0, int)), inputs, started)
    except UsageError as exc:
        print(f"hdsep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"hdsep: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SingularCovarianceError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"hdsep: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"hdsep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FoldError as exc:
        code = EXIT_NUMERIC if isinstance(exc.cause, (ArithmeticError, np.linalg.LinAlgError)) else EXIT_USAGE
        print(f"hdsep: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
