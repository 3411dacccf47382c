import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from hdsep.errors import DegenerateRuleError, DimensionMismatchError, SingularCovarianceError
from hdsep.models import (
    STANDARD_MODELS,
    ModelSpec,
    fit_forest,
    fit_knn,
    fit_logistic,
    fit_model,
    fit_qda,
    fit_tree,
    loss_and_grad,
    model_from_json,
    model_to_json,
    oracle_accuracy_analytic,
    oracle_threshold,
    predict,
)
from hdsep.models.trees import grow_tree
from hdsep.synthgen import GaussianClassSpec, SpectraMatrix, sample_gaussian_class, stack_classes

# --- QDA -----------------------------------------------------------------------------


def _gauss_pair(n, s1, s2, count, seed, mu=0.0):
    a = sample_gaussian_class(GaussianClassSpec(n, mu, s1), count, seed)
    b = sample_gaussian_class(GaussianClassSpec(n, mu, s2), count, seed + 1)
    return stack_classes(a, b)


def test_qda_separated_blobs(blobs):
    X, y = blobs
    assert np.mean(fit_qda(X, y).predict(X) == y) == 1.0


def test_qda_matches_dense_log_density(rng):
    # independent route: scipy's multivariate normal with the dense regularised covariance
    X = np.vstack([rng.normal(0, 1, (40, 6)), rng.normal(0.3, 1.4, (30, 6))])
    y = np.repeat([0, 1], [40, 30])
    lam = 0.4
    model = fit_qda(X, y, reg=lam)
    Q = rng.normal(0, 1.2, (50, 6))
    scores = []
    for k in (0, 1):
        Xk = X[y == k]
        S = np.cov(Xk, rowvar=False)
        S = (1 - lam) * S + lam * np.trace(S) / 6 * np.eye(6)
        scores.append(stats.multivariate_normal(Xk.mean(0), S).logpdf(Q) + math.log(len(Xk) / len(X)))
    dense = np.stack(scores, 1)
    got = model.decision_function(Q)
    # decision function omits the common -n/2 log(2 pi) term
    diff = dense - got
    assert np.allclose(diff, diff[0, 0], atol=1e-9)


def test_qda_rank_deficient_with_shrinkage_matches_dense(rng):
    X = np.vstack([rng.normal(0, 1, (5, 12)), rng.normal(0, 2, (5, 12))])
    y = np.repeat([0, 1], 5)
    model = fit_qda(X, y, reg=0.4)
    Q = rng.normal(0, 1.5, (7, 12))
    for k, comp in enumerate(model.components):
        Xk = X[y == k]
        S = np.cov(Xk, rowvar=False)
        S = 0.6 * S + 0.4 * np.trace(S) / 12 * np.eye(12)
        v = Q - Xk.mean(0)
        dense = np.einsum("ij,ij->i", v, np.linalg.solve(S, v.T).T)
        assert np.allclose(comp.mahalanobis_sq(Q), dense, rtol=1e-9)
        assert comp.logdet == pytest.approx(np.linalg.slogdet(S)[1], rel=1e-10)


def test_qda_without_shrinkage_on_rank_deficient_data_raises(rng):
    X = rng.normal(size=(6, 10))
    with pytest.raises(SingularCovarianceError):
        fit_qda(X, np.repeat([0, 1], 3), reg=0.0)


def test_qda_priors_sum_to_one(rng):
    X = rng.normal(size=(30, 3))
    y = np.array([0] * 10 + [1] * 20)
    assert fit_qda(X, y).priors.sum() == pytest.approx(1.0)


def test_qda_row_order_invariance(rng):
    X = rng.normal(size=(40, 4))
    y = np.repeat([0, 1], 20)
    model = fit_qda(X, y)
    Q = rng.normal(size=(25, 4))
    perm = rng.permutation(25)
    assert np.array_equal(model.predict(Q)[perm], model.predict(Q[perm]))


def test_qda_high_dimension_near_perfect():
    data = _gauss_pair(500, 1.0, 1.5, 1000, 3, mu=1.0)
    idx = np.random.default_rng(0).permutation(2000)
    tr, te = idx[:1600], idx[1600:]
    model = fit_qda(data.values[tr], data.labels[tr])
    assert np.mean(model.predict(data.values[te]) == data.labels[te]) >= 0.99


def test_qda_equal_variances_near_chance():
    data = _gauss_pair(500, 1.0, 1.0, 1000, 5, mu=1.0)
    idx = np.random.default_rng(1).permutation(2000)
    tr, te = idx[:1600], idx[1600:]
    acc = np.mean(fit_qda(data.values[tr], data.labels[tr]).predict(data.values[te]) == data.labels[te])
    assert 0.45 <= acc <= 0.55


@pytest.mark.parametrize("n", [1, 10, 100, 500])
@pytest.mark.parametrize("ds", [0.1, 0.3, 0.6])
def test_qda_tracks_bayes_accuracy(n, ds):
    """Shrinkage QDA within 0.05 of the Bayes accuracy (N = 1000 per class)."""
    train = _gauss_pair(n, 1.0, 1.0 + ds, 800, 100 + n)
    test = _gauss_pair(n, 1.0, 1.0 + ds, 5000, 200 + n)
    model = fit_qda(train)
    acc = np.mean(model.predict(test.values) == test.labels)
    assert abs(acc - oracle_accuracy_analytic(n, 1.0, 1.0 + ds)) <= 0.05


# --- Bayes threshold -------------------------------------------------------------


def test_threshold_one_dimension():
    # frozen from ln(4) / 0.75
    assert oracle_threshold(1, 0.0, 1.0, 2.0).threshold == pytest.approx(1.8483924814931874, rel=1e-14)


def test_threshold_solves_equal_density():
    T = oracle_threshold(1, 0.0, 1.0, 2.0).threshold
    x = math.sqrt(T)
    assert stats.norm.pdf(x, 0, 1) == pytest.approx(stats.norm.pdf(x, 0, 2), rel=1e-12)


@given(st.integers(1, 5000), st.floats(0.1, 5), st.floats(0.01, 3))
def test_threshold_positive_and_linear_in_n(n, s1, gap):
    s2 = s1 + gap
    t1 = oracle_threshold(n, 0.0, s1, s2).threshold
    t2 = oracle_threshold(2 * n, 0.0, s1, s2).threshold
    assert t1 > 0
    assert t2 == pytest.approx(2 * t1, rel=1e-12)


def test_threshold_equal_sigmas_is_degenerate():
    with pytest.raises(DegenerateRuleError):
        oracle_threshold(100, 0.0, 1.0, 1.0)


def test_threshold_canonicalises_order():
    a = oracle_threshold(10, 1.0, 2.0, 1.0, labels=("wide", "narrow"))
    assert (a.sigma1, a.sigma2) == (1.0, 2.0)
    assert list(a.classes) == ["narrow", "wide"]
    x = np.full((1, 10), 1.0 + 3.0)
    assert a.predict(x)[0] == "wide"


def test_analytic_accuracy_one_dimension_by_quadrature():
    # frozen from direct integration of the two normal densities over |x| <= sqrt(T)
    assert oracle_accuracy_analytic(1, 1.0, 2.0) == pytest.approx(0.6613372844173844, abs=1e-10)
    T = math.log(4) / 0.75
    t = math.sqrt(T)
    p1 = integrate.quad(lambda x: stats.norm.pdf(x, 0, 1), -t, t)[0]
    p2 = 1 - integrate.quad(lambda x: stats.norm.pdf(x, 0, 2), -t, t)[0]
    assert oracle_accuracy_analytic(1, 1.0, 2.0) == pytest.approx(0.5 * (p1 + p2), abs=1e-10)


@pytest.mark.parametrize(
    "n,s2,expected",
    # frozen from scipy.stats.chi2 at the same threshold
    [(30, 1.05, 0.5745242064729146), (100, 1.1, 0.7494159872762799),
     (500, 1.3, 0.9999825645304696), (1000, 1.05, 0.8623035569350828), (5, 1.6, 0.7626100789845166)],
)
def test_analytic_accuracy_frozen_values(n, s2, expected):
    assert oracle_accuracy_analytic(n, 1.0, s2) == pytest.approx(expected, abs=1e-10)


@given(st.integers(1, 3000), st.floats(0.2, 3))
def test_analytic_accuracy_equal_sigmas_is_half(n, s):
    assert oracle_accuracy_analytic(n, s, s) == 0.5


@given(st.floats(0.01, 2.0))
def test_analytic_accuracy_non_decreasing_in_n(gap):
    accs = [oracle_accuracy_analytic(n, 1.0, 1.0 + gap) for n in (1, 2, 5, 10, 50, 100, 500, 2000)]
    assert all(b >= a - 1e-12 for a, b in zip(accs, accs[1:]))
    assert 0.5 <= accs[0] and accs[-1] <= 1.0


@pytest.mark.parametrize("n", [30, 100, 500, 1000])
@pytest.mark.parametrize("ds", [0.05, 0.1, 0.3, 0.6])
def test_oracle_empirical_within_three_binomial_se(n, ds):
    count = 10_000
    data = _gauss_pair(n, 1.0, 1.0 + ds, count, 7 * n, mu=1.0)
    rule = oracle_threshold(n, 1.0, 1.0, 1.0 + ds)
    acc = np.mean(rule.predict(data.values) == data.labels)
    p = oracle_accuracy_analytic(n, 1.0, 1.0 + ds)
    se = math.sqrt(max(p * (1 - p), 1e-12) / (2 * count))
    assert abs(acc - p) <= max(3 * se, 1.0 / (2 * count))


# --- logistic regression ---------------------------------------------------------


def test_logistic_gradient_matches_finite_differences(rng):
    X = rng.normal(size=(40, 5))
    y = rng.integers(0, 2, 40).astype(float)
    for _ in range(10):
        p = rng.normal(size=6)
        _, g = loss_and_grad(p, X, y, 0.7)
        h = 1e-6
        fd = np.array([
            (loss_and_grad(p + h * e, X, y, 0.7)[0] - loss_and_grad(p - h * e, X, y, 0.7)[0]) / (2 * h)
            for e in np.eye(6)
        ])
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(g), 1.0)


def test_logistic_separable_one_dimension(rng):
    X = np.concatenate([rng.normal(-10, 0.1, 20), rng.normal(10, 0.1, 20)])[:, None]
    y = np.repeat([0, 1], 20)
    model = fit_logistic(X, y)
    assert np.mean(model.predict(X) == y) == 1.0
    assert model.converged


def test_logistic_constant_features_give_zero_weights():
    X = np.ones((40, 3))
    y = np.repeat([0, 1], 20)
    model = fit_logistic(X, y)
    assert np.allclose(model.weights, 0.0, atol=1e-4)
    assert np.mean(model.predict(X) == y) == pytest.approx(0.5)


def test_logistic_rejects_three_classes(rng):
    with pytest.raises(ValueError):
        fit_logistic(rng.normal(size=(9, 2)), [0, 1, 2] * 3)


def test_logistic_flags_max_iter(rng):
    X = rng.normal(size=(50, 4))
    y = (X[:, 0] > 0).astype(int)
    model = fit_logistic(X, y, l2_strength=0.0, max_iter=2)
    assert model.n_iter <= 2 and not model.converged


# --- kNN ----------------------------------------------------------------------------


def test_knn_one_neighbour_recovers_training_label(rng):
    X = rng.normal(size=(30, 3))
    y = rng.integers(0, 2, 30)
    model = fit_knn(X, y, k=1)
    assert np.array_equal(model.predict(X), y)


def test_knn_k_larger_than_training_set(rng):
    with pytest.raises(ValueError):
        fit_knn(rng.normal(size=(4, 2)), [0, 1, 0, 1], k=5)


def test_knn_tie_broken_by_summed_distance():
    X = np.array([[0.0], [1.0], [-3.0], [4.0]])
    y = np.array([0, 1, 1, 0])
    # k=2 from 0.4: neighbours 0 (d=.4) and 1 (d=.6), one vote each; class 0 is closer overall
    assert fit_knn(X, y, k=2).predict([[0.4]])[0] == 0
    assert fit_knn(X, y, k=2).predict([[0.6]])[0] == 1


def test_knn_tie_then_lowest_label():
    X = np.array([[-1.0], [1.0]])
    y = np.array([1, 0])
    assert fit_knn(X, y, k=2).predict([[0.0]])[0] == 0


# --- trees and forests ------------------------------------------------------------


def test_pure_node_becomes_leaf(rng):
    t = fit_tree(rng.normal(size=(10, 3)), np.zeros(10, dtype=int))
    assert t.tree.n_nodes == 1


def test_single_split_separates_threshold_data(rng):
    x = rng.uniform(0, 1, 50)
    y = (x > 0.37).astype(int)
    t = fit_tree(x[:, None], y)
    assert t.tree.n_nodes == 3
    assert np.mean(t.predict(x[:, None]) == y) == 1.0
    # midpoint between the two closest values straddling the boundary
    lo, hi = x[y == 0].max(), x[y == 1].min()
    assert t.tree.threshold[0] == pytest.approx(0.5 * (lo + hi))


def test_tree_tie_break_prefers_lowest_feature():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 0, 1])
    t = fit_tree(X, y)
    assert t.tree.feature[0] == 0


def test_tree_max_depth_respected(rng):
    X = rng.normal(size=(200, 5))
    y = rng.integers(0, 2, 200)
    assert fit_tree(X, y, max_depth=3).tree.depth() <= 3


def test_gini_split_matches_brute_force(rng):
    X = np.round(rng.normal(size=(30, 3)), 1)
    y = rng.integers(0, 2, 30)
    t = fit_tree(X, y, max_depth=1)

    def weighted_gini(mask):
        total = 0.0
        for part in (y[mask], y[~mask]):
            p = np.bincount(part, minlength=2) / len(part)
            total += len(part) * (1 - np.sum(p**2))
        return total

    best = min(
        (weighted_gini(X[:, f] <= thr), f, thr)
        for f in range(3)
        for a, b in zip(np.unique(X[:, f])[:-1], np.unique(X[:, f])[1:])
        for thr in [0.5 * (a + b)]
    )
    assert t.tree.feature[0] == best[1]
    assert t.tree.threshold[0] == pytest.approx(best[2])


def test_tree_permutation_equivariance(rng):
    X = rng.normal(size=(60, 5))
    y = (X[:, 1] + X[:, 3] ** 2 > 0.8).astype(int)
    Q = rng.normal(size=(40, 5))
    perm = rng.permutation(5)
    a = fit_tree(X, y).predict(Q)
    b = fit_tree(X[:, perm], y).predict(Q[:, perm])
    assert np.array_equal(a, b)


def test_knn_and_qda_permutation_equivariance(rng):
    X = rng.normal(size=(60, 5))
    y = (X[:, 1] * X[:, 2] > 0).astype(int)
    Q = rng.normal(size=(40, 5))
    perm = rng.permutation(5)
    for fit in (fit_knn, fit_qda):
        assert np.array_equal(fit(X, y).predict(Q), fit(X[:, perm], y).predict(Q[:, perm]))


def test_forest_memorises_distinct_rows(rng):
    X = rng.normal(size=(20, 6))
    y = rng.integers(0, 2, 20)
    model = fit_forest(X, y, tree_count=100, seed=3)
    assert np.array_equal(model.predict(X), y)


def test_forest_deterministic_given_seed(rng):
    X = rng.normal(size=(50, 8))
    y = rng.integers(0, 2, 50)
    a = model_to_json(fit_forest(X, y, tree_count=10, seed=4))
    b = model_to_json(fit_forest(X, y, tree_count=10, seed=4))
    c = model_to_json(fit_forest(X, y, tree_count=10, seed=5))
    assert a == b and a != c


def test_forest_vote_tie_goes_to_lowest_label():
    X = np.array([[0.0], [1.0]])
    y = np.array([1, 0])
    model = fit_forest(X, y, tree_count=2, bootstrap=False, seed=0)
    # force one vote each by replacing the trees with single leaves
    from dataclasses import replace

    from hdsep.models.trees import TreeArrays

    def leaf(counts):
        return TreeArrays(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
                          np.array([counts], dtype=float), np.array([1.0]))

    tied = replace(model, trees=[leaf([0, 1]), leaf([1, 0])])
    assert tied.predict([[0.5]])[0] == 0


def test_forest_feature_subset_size(rng):
    # with ceil(sqrt(16)) = 4 candidate features per node the root split varies across trees
    X = rng.normal(size=(80, 16))
    y = (X.sum(1) > 0).astype(int)
    roots = {int(t.feature[0]) for t in fit_forest(X, y, tree_count=30, seed=1).trees}
    assert len(roots) > 3


def test_grow_tree_counts_bootstrap_cover(rng):
    X = rng.normal(size=(10, 2))
    y = np.repeat([0, 1], 5)
    idx = np.array([0, 0, 0, 5, 6, 7, 7], dtype=np.int64)
    t = grow_tree(X, y, 2, idx)
    assert t.cover[0] == 7
    assert t.value[0].tolist() == [3.0, 4.0]


# --- registry, predict, serialisation --------------------------------------------


def test_predict_empty_matrix(rng):
    X = rng.normal(size=(20, 3))
    y = np.repeat([0, 1], 10)
    for spec in STANDARD_MODELS.values():
        model = fit_model(spec, X, y)
        assert predict(model, np.zeros((0, 3))).shape == (0,)


def test_predict_dimension_mismatch(rng):
    X = rng.normal(size=(20, 3))
    y = np.repeat([0, 1], 10)
    for spec in STANDARD_MODELS.values():
        with pytest.raises(DimensionMismatchError):
            predict(fit_model(spec, X, y), np.zeros((2, 4)))


def test_every_family_round_trips_through_json(rng):
    X = rng.normal(size=(30, 4))
    y = np.array(["a", "b"] * 15)
    Q = rng.normal(size=(12, 4))
    for spec in STANDARD_MODELS.values():
        model = fit_model(spec, X, y, seed=2)
        text = model_to_json(model)
        back = model_from_json(text)
        assert model_to_json(back) == text
        assert np.array_equal(back.predict(Q), model.predict(Q))
    rule = oracle_threshold(4, 0.0, 1.0, 2.0)
    assert model_to_json(model_from_json(model_to_json(rule))) == model_to_json(rule)


def test_qda_round_trip_rank_deficient(rng):
    X = rng.normal(size=(6, 20))
    model = fit_qda(X, np.repeat([0, 1], 3))
    back = model_from_json(model_to_json(model))
    Q = rng.normal(size=(4, 20))
    assert np.array_equal(back.decision_function(Q), model.decision_function(Q))


def test_fits_are_bit_identical(rng):
    X = rng.normal(size=(40, 5))
    y = np.repeat([0, 1], 20)
    for spec in STANDARD_MODELS.values():
        assert model_to_json(fit_model(spec, X, y, seed=9)) == model_to_json(fit_model(spec, X, y, seed=9))


def test_spec_seed_overrides_caller_seed(rng):
    X = rng.normal(size=(40, 5))
    y = np.repeat([0, 1], 20)
    spec = ModelSpec("forest", {"tree_count": 5}, seed=11)
    assert model_to_json(fit_model(spec, X, y, seed=1)) == model_to_json(fit_model(spec, X, y, seed=2))


def test_unknown_family():
    with pytest.raises(ValueError):
        fit_model(ModelSpec("svm"), np.zeros((2, 1)), [0, 1])


def test_models_accept_spectra_matrix(rng):
    data = SpectraMatrix(rng.normal(size=(20, 3)), labels=np.repeat([0, 1], 10))
    model = fit_model(STANDARD_MODELS["knn"], data)
    assert model.predict(data).shape == (20,)
