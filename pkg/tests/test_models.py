import warnings

import numpy as np
import pytest

from opebench.errors import DataError
from opebench.feedback import LoggedBanditFeedback
from opebench.models import (
    DEFAULT_MODEL_SPACES,
    GradientBoostedTrees,
    HyperparamRange,
    ModelSpec,
    cross_fit_reward_matrices,
    fit_behavior_policy,
    fit_reward_model,
    floored_propensities,
    predict_reward_matrix,
    random_search,
    sample_model_spec,
)

from conftest import make_feedback


def test_ridge_constant_target_predicts_constant():
    fb = make_feedback(n=20, n_actions=2, rewards=np.full(20, 0.7), dim=3, seed=0)
    model = fit_reward_model(ModelSpec("ridge", {"alpha": 5.0}), fb, np.arange(20))
    mat = predict_reward_matrix(model, fb, np.arange(20))
    assert mat.shape == (20, 2)
    assert np.allclose(mat, 0.7, atol=1e-9)


def test_ridge_closed_form_two_points():
    # x = 0, 1 with targets 0, 1 and alpha = 1: centered solve gives slope
    # 1/3 and intercept 1/3, hence prediction 0.5 at x = 0.5
    fb = LoggedBanditFeedback(
        contexts=np.array([[0.0], [1.0]]),
        actions=np.array([0, 0]),
        rewards=np.array([0.0, 1.0]),
        n_actions=1,
        r_max=1.0,
    )
    model = fit_reward_model(ModelSpec("ridge", {"alpha": 1.0}), fb, np.arange(2))
    assert model.inner.coef_[0] == pytest.approx(1 / 3, abs=1e-9)
    pred = model.predict(np.array([[0.5]]), np.array([0]))
    assert pred[0] == pytest.approx(0.5, abs=1e-9)


def test_logistic_separable_training_fit():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(100, 2))
    y = (X[:, 0] > 0).astype(float)
    fb = LoggedBanditFeedback(X, np.zeros(100, dtype=int), y, 1, 1.0)
    model = fit_reward_model(ModelSpec("logistic", {"C": 10.0}), fb, np.arange(100))
    p = model.predict(X, np.zeros(100, dtype=int))
    assert np.all(p[y == 1] > 0.5)
    assert np.all((p >= 0) & (p <= 1))


def test_empty_subset_rejected():
    fb = make_feedback(n=5)
    with pytest.raises(DataError, match="empty"):
        fit_reward_model(ModelSpec("ridge", {"alpha": 1.0}), fb, np.array([], int))


def test_model_spec_validation():
    with pytest.raises(ValueError, match="C"):
        ModelSpec("logistic", {"C": 0.0})
    with pytest.raises(ValueError, match="alpha"):
        ModelSpec("ridge", {"alpha": -1.0})
    with pytest.raises(ValueError, match="max_depth"):
        ModelSpec("boosted_trees", {"max_depth": 0})
    with pytest.raises(ValueError, match="family"):
        ModelSpec("forest", {})


def test_hyperparam_range_validation_and_sampling():
    with pytest.raises(ValueError, match="log-scaled"):
        HyperparamRange(0.0, 1.0, log_scale=True)
    with pytest.raises(ValueError, match="lower"):
        HyperparamRange(2.0, 1.0)
    rng = np.random.default_rng(0)
    r = HyperparamRange(1e-3, 1e3, log_scale=True)
    vals = [r.sample(rng) for _ in range(200)]
    assert all(1e-3 <= v <= 1e3 for v in vals)
    # log-uniform puts roughly half the mass below the geometric midpoint
    assert 0.3 < np.mean(np.array(vals) < 1.0) < 0.7
    ri = HyperparamRange(2, 10, integer=True)
    ints = {ri.sample(rng) for _ in range(300)}
    assert ints == set(range(2, 11))
    rc = HyperparamRange(choices=(5, 7))
    assert {rc.sample(rng) for _ in range(50)} == {5, 7}


def test_boosted_trees_fit_improves_and_is_deterministic():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(400, 4))
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1] ** 2
    a = GradientBoostedTrees(0.2, 3, 5, n_rounds=40).fit(X, y)
    b = GradientBoostedTrees(0.2, 3, 5, n_rounds=40).fit(X, y)
    resid = y - a.predict(X)
    assert resid.var() < 0.2 * y.var()
    assert np.array_equal(a.predict(X), b.predict(X))


def test_boosted_trees_respect_min_samples_leaf():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(60, 2))
    y = rng.normal(size=60)
    model = GradientBoostedTrees(1.0, 8, 25, n_rounds=1).fit(X, y)
    tree = model.trees_[0]
    bins = model._bin(X)
    # count rows per leaf by re-walking: every leaf must hold >= 25 rows
    idx = np.zeros(60, dtype=int)
    for _ in range(tree.depth):
        f = tree.feature[idx]
        internal = f >= 0
        bvals = bins[np.arange(60), np.where(internal, f, 0)]
        go_left = internal & (bvals <= tree.thresh_bin[idx])
        idx = np.where(go_left, tree.left[idx], np.where(internal, tree.right[idx], idx))
    _, counts = np.unique(idx, return_counts=True)
    assert counts.min() >= 25


def test_reward_matrix_has_action_columns():
    fb = make_feedback(n=10, n_actions=3, seed=5,
                       actions=np.arange(10) % 3)
    model = fit_reward_model(ModelSpec("ridge", {"alpha": 1.0}), fb, np.arange(10))
    mat = predict_reward_matrix(model, fb, np.arange(4))
    assert mat.shape == (4, 3)
    assert np.all(np.isfinite(mat))


def test_cross_fit_single_fold_covers_all_rows():
    fb = make_feedback(n=12, seed=6)
    folds = cross_fit_reward_matrices(ModelSpec("ridge", {"alpha": 1.0}), fb, 1, 0)
    assert len(folds) == 1
    assert np.array_equal(folds[0][0], np.arange(12))


def test_cross_fit_equal_folds_and_determinism():
    fb = make_feedback(n=4, seed=7)
    folds = cross_fit_reward_matrices(ModelSpec("ridge", {"alpha": 1.0}), fb, 2, 3)
    assert [len(f[0]) for f in folds] == [2, 2]
    again = cross_fit_reward_matrices(ModelSpec("ridge", {"alpha": 1.0}), fb, 2, 3)
    assert all(np.array_equal(a[0], b[0]) for a, b in zip(folds, again))
    assert all(np.array_equal(a[1], b[1]) for a, b in zip(folds, again))


def test_cross_fit_truncates_indivisible_rows():
    fb = make_feedback(n=10, seed=8)
    folds = cross_fit_reward_matrices(ModelSpec("ridge", {"alpha": 1.0}), fb, 3, 5)
    sizes = [len(f[0]) for f in folds]
    assert sizes == [3, 3, 3]
    covered = np.concatenate([f[0] for f in folds])
    assert np.unique(covered).size == 9


def test_cross_fit_rejects_k_above_n():
    fb = make_feedback(n=3)
    with pytest.raises(DataError, match="folds"):
        cross_fit_reward_matrices(ModelSpec("ridge", {"alpha": 1.0}), fb, 4, 0)


@pytest.mark.parametrize("k", [2, 3, 5])
def test_cross_fit_no_leakage_under_target_poisoning(k):
    spec = ModelSpec("ridge", {"alpha": 1.0})
    fb = make_feedback(n=40, n_actions=2, seed=9,
                       actions=np.arange(40) % 2)
    folds = cross_fit_reward_matrices(spec, fb, k, 11)
    fold0 = folds[0][0]
    poisoned = np.array(fb.rewards)
    poisoned[fold0] = 99.0
    fb_poisoned = LoggedBanditFeedback(
        fb.contexts, fb.actions, poisoned, fb.n_actions, 100.0
    )
    folds_p = cross_fit_reward_matrices(spec, fb_poisoned, k, 11)
    # fold-0 predictions come from models that never saw fold-0 targets
    assert np.array_equal(folds[0][1], folds_p[0][1])


def test_behavior_policy_degenerate_single_action():
    fb = make_feedback(n=30, n_actions=4, actions=np.full(30, 2), seed=10)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        model = fit_behavior_policy(ModelSpec("logistic", {"C": 1.0}), fb)
    assert any("degenerate" in str(w.message) for w in rec)
    dist = model.predict_dist(np.random.default_rng(0).normal(size=(5, 1)))
    assert np.all(dist[:, 2] >= 1 - 1e-6)
    assert np.allclose(dist.sum(axis=1), 1.0, atol=1e-9)


def test_behavior_policy_uniform_actions_near_uniform_prediction():
    rng = np.random.default_rng(1)
    n = 10_000
    X = rng.normal(size=(n, 3))
    a = rng.integers(4, size=n)
    fb = LoggedBanditFeedback(X, a, rng.uniform(0, 1, n), 4, 1.0)
    model = fit_behavior_policy(ModelSpec("logistic", {"C": 1.0}), fb)
    dist = model.predict_dist(X)
    assert np.abs(dist - 0.25).max() < 0.05
    assert np.allclose(dist.sum(axis=1), 1.0, atol=1e-9)


def test_behavior_policy_temperature_recovery():
    rng = np.random.default_rng(1)
    n = 10_000
    X = rng.normal(size=(n, 3))
    W = rng.normal(size=(3, 4))
    logits = X @ W
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs = e / e.sum(axis=1, keepdims=True)
    cdf = np.cumsum(probs, axis=1)
    a = np.minimum((rng.uniform(size=(n, 1)) > cdf).sum(axis=1), 3)
    fb = LoggedBanditFeedback(X, a, rng.uniform(0, 1, n), 4, 1.0)
    model = fit_behavior_policy(
        ModelSpec("logistic", {"C": 1e4}), fb, calibration="temperature", seed=5
    )
    assert model.temperature == pytest.approx(1.0, abs=0.1)


def test_behavior_policy_rows_stochastic_for_boosted_family():
    rng = np.random.default_rng(12)
    n = 300
    X = rng.normal(size=(n, 2))
    a = (X[:, 0] > 0).astype(int) + 2 * (X[:, 1] > 0).astype(int)
    fb = LoggedBanditFeedback(X, a, rng.uniform(0, 1, n), 4, 1.0)
    model = fit_behavior_policy(
        ModelSpec("boosted_trees", {"learning_rate": 0.3, "max_depth": 3,
                                    "min_samples_leaf": 5, "n_rounds": 20}),
        fb,
    )
    dist = model.predict_dist(X)
    assert np.all(dist >= 0)
    assert np.allclose(dist.sum(axis=1), 1.0, atol=1e-9)
    # the fit should mostly recover this cleanly separated logging rule
    assert (dist.argmax(axis=1) == a).mean() > 0.9


def test_floored_propensities_floor_and_passthrough(caplog):
    dist = np.array([[1e-12, 1.0 - 1e-12], [0.4, 0.6]])
    actions = np.array([0, 1])
    with caplog.at_level("INFO", logger="opebench.models"):
        props = floored_propensities(dist, actions)
    assert props[0] == 1e-7
    assert props[1] == 0.6
    assert any("floored 1 of 2" in r.message for r in caplog.records)


def test_determinism_identical_specs_and_data():
    fb = make_feedback(n=50, n_actions=3, seed=13, actions=np.arange(50) % 3)
    spec = ModelSpec("logistic", {"C": 2.0})
    a = fit_reward_model(spec, fb, np.arange(50))
    b = fit_reward_model(spec, fb, np.arange(50))
    assert np.array_equal(a.inner.w_, b.inner.w_)


def test_random_search_single_iteration_returns_sample():
    fb = make_feedback(n=30, seed=14)
    spec = random_search(DEFAULT_MODEL_SPACES["ridge"], "ridge", fb, n_iter=1, seed=3)
    assert spec.family == "ridge"
    assert 1e-2 <= spec.hyperparams["alpha"] <= 1e2


def test_random_search_single_point_space():
    fb = make_feedback(n=30, seed=15)
    space = {"alpha": HyperparamRange(choices=(3.0,))}
    for seed in (0, 1, 2):
        assert random_search(space, "ridge", fb, 4, seed).hyperparams["alpha"] == 3.0


def test_random_search_prefers_perfect_fit():
    # targets are an exact linear function; the tiny penalty fits exactly
    x = np.linspace(0, 1, 50).reshape(-1, 1)
    fb = LoggedBanditFeedback(x, np.zeros(50, dtype=int), 2.0 * x[:, 0], 1, 2.0)
    space = {"alpha": HyperparamRange(choices=(1e-8, 1e8))}
    best = random_search(space, "ridge", fb, n_iter=6, seed=0)
    assert best.hyperparams["alpha"] == 1e-8


def test_random_search_deterministic():
    fb = make_feedback(n=40, seed=16)
    a = random_search(DEFAULT_MODEL_SPACES["ridge"], "ridge", fb, 5, seed=7)
    b = random_search(DEFAULT_MODEL_SPACES["ridge"], "ridge", fb, 5, seed=7)
    assert a == b


def test_sample_model_spec_uses_space():
    rng = np.random.default_rng(17)
    spec = sample_model_spec("boosted_trees", DEFAULT_MODEL_SPACES["boosted_trees"], rng)
    assert spec.family == "boosted_trees"
    assert 2 <= spec.hyperparams["max_depth"] <= 10
    assert 5 <= spec.hyperparams["min_samples_leaf"] <= 20
    assert 1e-4 <= spec.hyperparams["learning_rate"] <= 1e-1
