"""Build runnable experiments from a parsed configuration and drive them."""

import os
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import (
    ExperimentConfig,
    PolicyConfig,
    resolve_out_dir,
    resolved_model_spaces,
)
from .datagen import (
    MixedPolicy,
    SyntheticEnvironment,
    classification_ground_truth,
    classification_to_feedback,
    generate_synthetic_feedback,
    make_classification_task,
    make_synthetic_environment,
    mixed_policy_distribution,
    train_test_split_rows,
    true_policy_value,
)
from .errors import ConfigError, DataError
from .io import (
    export_results,
    load_classification_csv,
    load_feedback_csv,
    load_policy_csv,
    summarize,
)
from .models import (
    BOOSTED_TREES,
    LOGISTIC,
    RIDGE,
    GradientBoostedTrees,
    SoftmaxClassifier,
)
from .plots import render_cdf_plot
from .protocol import (
    BehaviorModelConfig,
    EstimatorSpace,
    EvaluationPolicy,
    GroundTruthSource,
    LoggerDataset,
    ResultSet,
    RunConfig,
    run_with_ground_truth,
    run_with_multiple_loggers,
)

# Fixed settings for the classifiers that define policies (as opposed to the
# reward models sampled per seed, which draw from the search spaces).
POLICY_CLASSIFIER_PARAMS = {
    LOGISTIC: {"C": 100.0, "max_iter": 10_000},
    BOOSTED_TREES: {
        "learning_rate": 0.1,
        "max_depth": 10,
        "min_samples_leaf": 5,
        "n_rounds": 100,
    },
}


def _train_choice_rule(
    family: str,
    params: Dict[str, float],
    features: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
):
    """Fit a multiclass classifier and return its argmax decision function."""
    merged = {**POLICY_CLASSIFIER_PARAMS[family], **params}
    if family == LOGISTIC:
        clf = SoftmaxClassifier(
            n_classes=n_classes,
            C=merged["C"],
            max_iter=int(merged["max_iter"]),
        )
        clf.fit(features, labels)
        return lambda X: clf.predict_dist(X).argmax(axis=1)
    models = []
    for a in range(n_classes):
        m = GradientBoostedTrees(
            learning_rate=merged["learning_rate"],
            max_depth=int(merged["max_depth"]),
            min_samples_leaf=int(merged["min_samples_leaf"]),
            n_rounds=int(merged["n_rounds"]),
        )
        m.fit(features, (labels == a).astype(float))
        models.append(m)
    return lambda X: np.stack([m.predict(X) for m in models], axis=1).argmax(axis=1)


def _mixed_policy(
    cfg: PolicyConfig,
    choice_rules: Dict[str, object],
) -> MixedPolicy:
    if cfg.family == "uniform":
        return MixedPolicy(deterministic_choice=None, alpha=0.0)
    return MixedPolicy(
        deterministic_choice=choice_rules[cfg.family], alpha=cfg.alpha
    )


def build_estimator_spaces(
    cfg: ExperimentConfig, reward_kind: str
) -> List[EstimatorSpace]:
    spaces = resolved_model_spaces(cfg)
    linear = LOGISTIC if reward_kind == "binary" else RIDGE
    out = []
    for e in cfg.estimators:
        families: Tuple[str, ...] = ()
        if e.kind in ("dm", "dr_ps", "sndr", "switch_dr", "dr_os"):
            families = e.families if e.families else (linear, BOOSTED_TREES)
        out.append(
            EstimatorSpace(
                kind=e.kind,
                name=e.name,
                shrink_grid=e.shrink_grid,
                k_grid=e.k_grid,
                model_families=families,
                model_spaces=spaces,
            )
        )
    return out


def _run_config(cfg: ExperimentConfig, fail_fast: bool) -> RunConfig:
    behavior = None
    if cfg.propensities == "estimated":
        bm = cfg.behavior_model
        spaces = resolved_model_spaces(cfg)
        if bm.params:
            spaces = _pin_params(spaces, bm.params)
        behavior = BehaviorModelConfig(
            families=bm.families,
            model_spaces=spaces,
            calibration=bm.calibration,
            holdout_fraction=bm.holdout_fraction,
        )
    return RunConfig(
        seeds=cfg.seeds,
        sampler_mode=cfg.sampler,
        bootstrap_size=cfg.bootstrap_size,
        delta=cfg.delta,
        propensity_mode=cfg.propensities,
        behavior_model=behavior,
        fail_fast=fail_fast,
    )


def _pin_params(spaces, params):
    """Replace sampled ranges with single-point choices for pinned values."""
    from .models import HyperparamRange

    pinned = {fam: dict(sp) for fam, sp in spaces.items()}
    for fam, overrides in params.items():
        fam_space = dict(pinned.get(fam, {}))
        for name, value in overrides.items():
            fam_space[name] = HyperparamRange(choices=(value,))
        pinned[fam] = fam_space
    return pinned


def build_classification_source(cfg: ExperimentConfig) -> GroundTruthSource:
    data = cfg.data
    if "csv" in data:
        ds = load_classification_csv(data["csv"])
    else:
        task = data["synthetic_task"]
        ds = make_classification_task(
            n_samples=int(task["n_samples"]),
            n_classes=int(task["n_classes"]),
            dim=int(task["dim"]),
            class_sep=float(task.get("class_sep", 1.0)),
            seed=int(task.get("seed", 12345)),
        )
    train_fraction = float(data.get("train_fraction", 0.3))
    split_seed = int(data.get("split_seed", 12345))
    conversion_seed = int(data.get("conversion_seed", 12345))

    train_idx, test_idx = train_test_split_rows(
        ds.n_samples, train_fraction, split_seed
    )
    train, test = ds.take(train_idx), ds.take(test_idx)

    needed = {cfg.behavior_policy.family} | {
        p.family for p in cfg.policies if p.family != "uniform"
    }
    unsupported = needed - set(POLICY_CLASSIFIER_PARAMS)
    if unsupported:
        raise ConfigError(
            f"classification mode trains classifier policies only; got "
            f"{sorted(unsupported)}"
        )
    param_overrides: Dict[str, Dict[str, float]] = {}
    for p in [cfg.behavior_policy, *cfg.policies]:
        if p.family != "uniform" and p.params:
            param_overrides.setdefault(p.family, {}).update(p.params)
    choice_rules = {
        fam: _train_choice_rule(
            fam,
            param_overrides.get(fam, {}),
            train.features,
            train.labels,
            ds.n_classes,
        )
        for fam in needed
    }

    behavior = _mixed_policy(cfg.behavior_policy, choice_rules)
    fb = classification_to_feedback(test, behavior, conversion_seed)

    policies = []
    for p in cfg.policies:
        mixed = _mixed_policy(p, choice_rules)
        dist = mixed_policy_distribution(mixed, test.features, ds.n_classes)
        truth = classification_ground_truth(test, dist)
        policies.append(
            EvaluationPolicy(
                policy_id=p.label, action_dist=dist, ground_truth=truth
            )
        )
    return GroundTruthSource(feedback=fb, policies=tuple(policies))


def build_synthetic_source(
    cfg: ExperimentConfig,
) -> Tuple[GroundTruthSource, SyntheticEnvironment]:
    data = cfg.data
    env = make_synthetic_environment(
        dim_context=int(data.get("dim_context", 5)),
        n_actions=int(data.get("n_actions", 10)),
        reward_kind=data.get("reward_kind", "binary"),
        r_max=float(data.get("r_max", 1.0)),
        seed=int(data.get("env_seed", 12345)),
    )
    n_rounds = int(data.get("n_rounds", 10_000))
    fb, _true_q = generate_synthetic_feedback(
        env, n_rounds, int(data.get("feedback_seed", 12345))
    )
    gt = data.get("ground_truth", {}) or {}
    n_mc = int(gt.get("n_mc", 100_000))
    gt_seed = int(gt.get("seed", 54321))

    def greedy_choice(contexts: np.ndarray) -> np.ndarray:
        return env.mean_rewards(contexts).argmax(axis=1)

    policies = []
    for p in cfg.policies:
        if p.family == "uniform":
            mixed = MixedPolicy(deterministic_choice=None, alpha=0.0)
        elif p.family == "greedy":
            mixed = MixedPolicy(deterministic_choice=greedy_choice, alpha=p.alpha)
        else:
            raise ConfigError(
                f"synthetic mode supports 'greedy' and 'uniform' policies, "
                f"got {p.family!r}"
            )
        dist = mixed_policy_distribution(mixed, fb.contexts, env.n_actions)
        truth = true_policy_value(env, mixed, n_mc, gt_seed).value
        policies.append(
            EvaluationPolicy(policy_id=p.label, action_dist=dist, ground_truth=truth)
        )
    return GroundTruthSource(feedback=fb, policies=tuple(policies)), env


def build_realworld_datasets(cfg: ExperimentConfig) -> List[LoggerDataset]:
    feedbacks = {}
    for d in cfg.datasets:
        feedbacks[d.name] = load_feedback_csv(
            d.feedback_csv, require_propensities=True
        )
    n_actions = {fb.n_actions for fb in feedbacks.values()}
    if len(n_actions) != 1:
        # Action ids are shared across loggers; align counts to the maximum.
        top = max(n_actions)
        feedbacks = {
            name: replace(fb, n_actions=top) for name, fb in feedbacks.items()
        }
    out = []
    for d in cfg.datasets:
        expected = {
            other.name: feedbacks[other.name].n_rounds
            for other in cfg.datasets
            if other.name != d.name
        }
        dists = load_policy_csv(d.policy_csv, expected)
        for other_name, dist in dists.items():
            if dist.n_actions != feedbacks[d.name].n_actions:
                raise DataError(
                    f"{d.policy_csv}: policy has {dist.n_actions} actions, "
                    f"feedback has {feedbacks[d.name].n_actions}"
                )
        out.append(
            LoggerDataset(
                name=d.name, feedback=feedbacks[d.name], policy_dists=dists
            )
        )
    return out


def run_experiment(
    cfg: ExperimentConfig,
    workers: Optional[int] = None,
    out_dir: Optional[str] = None,
    fail_fast: bool = False,
) -> Tuple[ResultSet, Dict, float]:
    """Execute the configured sweep and write all report files.

    Returns the result set, the per-estimator summary scores, and the AU-CDF
    cutoff that was used.
    """
    workers = workers if workers is not None else cfg.workers
    out_dir = resolve_out_dir(out_dir, cfg.outputs.directory)
    run_cfg = _run_config(cfg, fail_fast)

    if cfg.mode == "classification":
        source = build_classification_source(cfg)
        spaces = build_estimator_spaces(cfg, "binary")
        results = run_with_ground_truth(run_cfg, source, spaces, workers=workers)
    elif cfg.mode == "synthetic":
        source, env = build_synthetic_source(cfg)
        spaces = build_estimator_spaces(cfg, env.reward_kind)
        results = run_with_ground_truth(run_cfg, source, spaces, workers=workers)
    else:
        datasets = build_realworld_datasets(cfg)
        reward_kind = (
            "binary"
            if all(
                np.all(np.isin(d.feedback.rewards, (0.0, 1.0))) for d in datasets
            )
            else "continuous"
        )
        spaces = build_estimator_spaces(cfg, reward_kind)
        results = run_with_multiple_loggers(run_cfg, datasets, spaces, workers=workers)

    scores, z_max = summarize(
        results,
        z_max=cfg.outputs.z_max,
        cvar_alpha=cfg.outputs.cvar_alpha,
        drop_flagged=cfg.outputs.drop_flagged,
    )
    write_report(results, scores, z_max, out_dir, cfg.outputs.drop_flagged)
    return results, scores, z_max


def write_report(
    results: ResultSet,
    scores: Dict,
    z_max: float,
    out_dir: str,
    drop_flagged: bool = False,
) -> None:
    """Emit the delimited outputs and the CDF figure for a finished run."""
    os.makedirs(out_dir, exist_ok=True)
    export_results(results, scores, out_dir)
    z_by_est = {
        name: results.squared_errors(name, include_flagged=not drop_flagged)
        for name in results.estimator_names()
    }
    render_cdf_plot(z_by_est, z_max, os.path.join(out_dir, "cdf.svg"))
