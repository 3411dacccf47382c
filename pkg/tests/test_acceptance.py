"""Exit criteria, each at its stated tolerance.

Every test prints one PASS/FAIL line (also collected in the terminal summary)
and then asserts, so a failing criterion stays visible as a failing test.
"""

import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdsep.attribution import tree_shap
from hdsep.audits import synthetic_controls
from hdsep.cli import main
from hdsep.experiments import apply_overrides, default_config, run_experiment
from hdsep.models import fit_forest, oracle_accuracy_analytic
from hdsep.synthgen import concentration_table
from shap_oracle import brute_force_shap

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


def _run(eid, seed=0, **grid):
    return run_experiment(apply_overrides(default_config(eid, seed), grid))


@pytest.fixture(scope="module")
def n3_reports(tmp_path_factory):
    """`run N3 --seed 7` with one and with eight workers (full default grid)."""
    root = tmp_path_factory.mktemp("n3")
    out = {}
    for jobs in (1, 8):
        d = root / f"jobs{jobs}"
        assert main(["run", "N3", "--seed", "7", "--jobs", str(jobs), "--out-dir", str(d)]) == 0
        out[jobs] = d
    return out


def test_criterion_1_s1_chance_level(verdict):
    cfg = apply_overrides(default_config("S1"), {"n": [100], "count": [1000]})
    report = run_experiment(cfg)
    means = {r["model"]: r["mean"] for r in report.records}
    ok = len(means) == 4 and all(0.45 <= m <= 0.58 for m in means.values())
    verdict(1, ok, "S1 n=100 accuracies " + ", ".join(f"{k}={v:.3f}" for k, v in means.items())
            + " (need all in [0.45, 0.58])")
    assert ok


def test_criterion_2_n2_oracle_equivalence(verdict):
    ds = [0.0, 0.05, 0.1, 0.3, 0.6, 1.0]
    report = _run("N2", n=[30, 100, 500, 1000], delta_sigma=ds, count=[1000])
    worst = max(abs(r["mean"] - r["analytic"]) for r in report.records)
    zero = [r["mean"] for r in report.records if r["coords"]["delta_sigma"] == 0.0]
    ok = worst <= 0.02 and all(abs(z - 0.5) <= 0.03 for z in zero)
    verdict(2, ok, f"max |empirical - analytic| = {worst:.4f} (need <= 0.02); "
                   f"delta_sigma=0 accuracies {[round(z, 3) for z in zero]} (need 0.50 +/- 0.03)")
    assert ok


def test_criterion_3_n3_dimensional_amplification(verdict, n3_reports):
    doc = json.loads((n3_reports[1] / "N3.json").read_text())
    acc = {(r["coords"]["delta_sigma"], r["coords"]["n"]): r["mean"] for r in doc["records"]}
    headline = acc[(0.3, 1000)]
    slack = {ds: acc[(ds, 5000)] - acc[(ds, 10)] for ds in sorted({k[0] for k in acc})}
    monotone = all(v >= -0.02 for v in slack.values())
    ok = headline >= 0.95 and monotone
    verdict(3, ok, f"QDA acc(0.3, n=1000) = {headline:.3f} (need >= 0.95); acc(n=5000) - acc(n=10) per "
                   "delta_sigma " + ", ".join(f"{k}:{v:+.3f}" for k, v in slack.items()) + " (need >= -0.02)")
    assert ok


def test_criterion_4_n1_correlation_slowdown(verdict):
    a = _run("N1", n=[50], delta_sigma=[0.5], covariance=["isotropic", "toeplitz"])
    iso, toe = a.mean("qda", covariance="isotropic"), a.mean("qda", covariance="toeplitz")
    far = _run("N1", n=[500], delta_sigma=[2.0], covariance=["toeplitz"]).records[0]["mean"]
    ok = toe <= iso and far >= 0.95
    verdict(4, ok, f"n=50 delta_sigma=0.5: toeplitz {toe:.3f} <= isotropic {iso:.3f}; "
                   f"toeplitz n=500 delta_sigma=2: {far:.3f} (need >= 0.95)")
    assert ok


def test_criterion_5_concentration(verdict):
    table = concentration_table((2, 50, 500, 5000), (1.0, 1.1), samples=10_000, bins=60, seed=0)
    last = table[-1]
    rel = [abs(h.mean - s * math.sqrt(5000)) / (s * math.sqrt(5000)) for s, h in zip(last["sigmas"], last["histograms"])]
    overlaps = [row["overlap"] for row in table]
    decreasing = all(a > b for a, b in zip(overlaps, overlaps[1:]))
    ok = max(rel) < 0.01 and last["overlap"] < 0.01 and decreasing
    verdict(5, ok, f"n=5000 relative norm error {max(rel):.5f} (need < 0.01), overlap {last['overlap']:.4f} "
                   f"(need < 0.01); overlaps {[round(o, 4) for o in overlaps]} strictly decreasing: {decreasing}")
    assert ok


def test_criterion_6_s2_width_separation(verdict):
    report = _run("S2", n=[10, 10000])
    parts, ok = [], True
    for model in ("forest", "logistic"):
        lo, hi = report.mean(model, n=10), report.mean(model, n=10000)
        good = hi >= 0.95 and hi - lo >= 0.1
        ok &= good
        parts.append(f"{model} n=10 {lo:.3f} -> n=10000 {hi:.3f} ({'ok' if good else 'short'})")
    verdict(6, ok, "; ".join(parts) + " (need >= 0.95 at n=10000 and a gain >= 0.1)")
    assert ok


def test_criterion_7_s3_noise_offset(verdict):
    report = _run("S3", n=[50, 1000, 2000, 5000, 10000])
    forest50 = report.mean("forest", n=50)
    trees = {n: report.mean("tree", n=n) for n in (1000, 2000, 5000, 10000)}
    knn = report.mean("knn", n=5000)
    checks = [forest50 >= 0.97, all(0.72 <= t <= 0.88 for t in trees.values()), 0.90 <= knn <= 0.97]
    verdict(7, all(checks), f"forest n=50 {forest50:.3f} (need >= 0.97); depth-5 tree at n>=1000 "
                            f"{ {k: round(v, 3) for k, v in trees.items()} } (need [0.72, 0.88]); "
                            f"kNN n=5000 {knn:.3f} (need [0.90, 0.97])")
    assert all(checks)


def test_criterion_8_synthetic_controls(verdict):
    # the olive-oil dataset is not available offline, so the synthetic controls stand in
    checks = synthetic_controls(seed=0)
    ok = all(c.passed for c in checks)
    verdict(8, ok, "synthetic controls (real dataset unavailable): "
                   + ", ".join(f"{c.name} {'pass' if c.passed else 'FAIL'}" for c in checks))
    assert ok


_forest_cases = st.tuples(st.integers(1, 4), st.integers(1, 3), st.integers(1, 2), st.integers(0, 2**31))


def _small_forest(n_features, trees, depth, seed):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(30, n_features)), 1)
    y = (X @ rng.normal(size=n_features) + 0.5 * rng.normal(size=30) > 0).astype(int)
    y[:2] = [0, 1]
    return fit_forest(X, y, tree_count=trees, max_depth=depth, max_features=None, seed=seed % 997), rng


_shap_worst = {"local": 0.0, "oracle": 0.0, "dummy": 0.0, "symmetry": 0.0}


@settings(max_examples=150, deadline=None, database=None)
@given(_forest_cases)
def _shap_properties(case):
    n_features, trees, depth, seed = case
    forest, rng = _small_forest(n_features, trees, depth, seed)
    Q = np.round(rng.normal(size=(5, n_features)), 1)
    amap = tree_shap(forest, Q)
    local = np.abs(amap.values.sum(1) + amap.base_value - forest.predict_proba(Q)[:, 1]).max()
    ref = np.mean([[brute_force_shap(t, t.proba[:, 1], q) for q in Q] for t in forest.trees], axis=0)
    oracle = np.abs(amap.values - ref).max()
    used = {int(f) for t in forest.trees for f in t.feature if f >= 0}
    unused = [j for j in range(n_features) if j not in used]
    dummy = np.abs(amap.values[:, unused]).max() if unused else 0.0
    sym = 0.0
    if n_features >= 2:
        # a tree plus its mirror under swapping features 0 and 1 is symmetric in them
        t = forest.trees[0]
        swap = np.where(t.feature == 0, 1, np.where(t.feature == 1, 0, t.feature))
        mirrored = replace(forest, trees=[t, replace(t, feature=swap)])
        Qs = Q.copy()
        Qs[:, [0, 1]] = Qs[:, [1, 0]]
        a, b = tree_shap(mirrored, Q).values, tree_shap(mirrored, Qs).values
        sym = np.abs(a[:, 0] - b[:, 1]).max()
        tied = Q.copy()
        tied[:, 1] = tied[:, 0]
        c = tree_shap(mirrored, tied).values
        sym = max(sym, np.abs(c[:, 0] - c[:, 1]).max())
    for key, v in (("local", local), ("oracle", oracle), ("dummy", dummy), ("symmetry", sym)):
        _shap_worst[key] = max(_shap_worst[key], float(v))
    assert local <= 1e-9 and oracle <= 1e-9 and dummy == 0.0 and sym <= 1e-9


def test_criterion_9_shap_correctness(verdict):
    try:
        _shap_properties()
        ok, err = True, ""
    except AssertionError as exc:
        ok, err = False, f" first failure: {exc}"
    verdict(9, ok, "worst errors over 150 random forests (<= 4 features, <= 3 trees, depth <= 2): "
                   + ", ".join(f"{k} {v:.1e}" for k, v in _shap_worst.items()) + " (need <= 1e-9, dummy == 0)" + err)
    assert ok


def test_criterion_10_determinism_across_jobs(verdict, n3_reports):
    same = {name: (n3_reports[1] / name).read_bytes() == (n3_reports[8] / name).read_bytes()
            for name in ("N3.json", "N3.csv")}
    ok = all(same.values())
    verdict(10, ok, f"run N3 --seed 7 with --jobs 1 vs --jobs 8, byte-identical: {same}")
    assert ok


def test_analytic_reference_is_monotone_sanity():
    # guards the reference the N2 criterion compares against
    assert oracle_accuracy_analytic(1000, 1.0, 1.3) > oracle_accuracy_analytic(30, 1.0, 1.3)
