"""Seeded robustness sweeps over estimator configurations.

For every seed, a hyperparameter setting is sampled for each estimator, an
evaluation policy is drawn, the logged data is bootstrapped, and each
estimator's squared error against the policy's ground-truth value is
recorded. The resulting per-estimator error samples feed the distributional
summaries in :mod:`opebench.metrics`.

Two drivers cover the two ground-truth regimes: sources whose true policy
values are computable (synthetic or classification data), and collections of
real logs where each logger's on-policy mean reward serves as the truth for
its own policy while the remaining logs are evaluated off-policy.

Determinism contract: every random draw comes from a stream keyed by
``(seed, stream, estimator)``, so results are bitwise identical across
reruns and worker counts, and adding an estimator never changes the draws
of existing ones.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import estimators as est_mod
from .errors import ConfigError, DataError, EstimatorError
from .estimators import (
    MODEL_BASED,
    SHRINKAGE_PARAM,
    WEIGHT_BASED,
    EstimatorHyperparams,
    cross_fit_estimate,
    estimate,
)
from .feedback import (
    ActionDistribution,
    LoggedBanditFeedback,
    compute_importance_weights,
)
from .models import (
    DEFAULT_MODEL_SPACES,
    HyperparamSpace,
    ModelSpec,
    _fmt,
    cross_fit_reward_matrices,
    fit_behavior_policy,
    floored_propensities,
    sample_model_spec,
)
from .rng import (
    STREAM_BOOTSTRAP,
    STREAM_HYPERPARAM,
    STREAM_MODEL,
    STREAM_POLICY,
    name_tag,
    stream_rng,
)
from .tuning import DEFAULT_CANDIDATE_GRID, select_hyperparameter

ORACLE = "oracle"

UNIFORM_SAMPLER = "uniform"
TUNED_SAMPLER = "tuned"


@dataclass(frozen=True)
class EstimatorSpace:
    """One estimator plus the candidate structure its settings are drawn from."""

    kind: str
    name: Optional[str] = None
    shrink_grid: Optional[Tuple[float, ...]] = None
    k_grid: Tuple[int, ...] = (1,)
    model_families: Tuple[str, ...] = ()
    model_spaces: Mapping[str, HyperparamSpace] = field(
        default_factory=lambda: DEFAULT_MODEL_SPACES
    )

    def __post_init__(self):
        if self.kind != ORACLE and self.kind not in est_mod.ESTIMATOR_KINDS:
            raise ConfigError(f"unknown estimator kind {self.kind!r}")
        if self.name is None:
            object.__setattr__(self, "name", self.kind)
        if self.kind in SHRINKAGE_PARAM and not self.shrink_grid:
            object.__setattr__(self, "shrink_grid", DEFAULT_CANDIDATE_GRID)
        if self.kind in MODEL_BASED and not self.model_families:
            raise ConfigError(
                f"estimator {self.name!r} needs at least one reward-model family"
            )

    @property
    def uses_model(self) -> bool:
        return self.kind in MODEL_BASED

    @property
    def uses_weights(self) -> bool:
        return self.kind in WEIGHT_BASED


@dataclass(frozen=True)
class BehaviorModelConfig:
    """How to estimate the logging policy when true propensities are withheld."""

    families: Tuple[str, ...]
    model_spaces: Mapping[str, HyperparamSpace] = field(
        default_factory=lambda: DEFAULT_MODEL_SPACES
    )
    calibration: Optional[str] = "temperature"
    holdout_fraction: float = 0.5


@dataclass(frozen=True)
class RunConfig:
    """Seeds and sampling behavior of a robustness sweep."""

    seeds: Tuple[int, ...]
    sampler_mode: str = UNIFORM_SAMPLER
    bootstrap_size: Optional[int] = None
    delta: float = 0.05
    propensity_mode: str = "true"  # "true" | "estimated"
    behavior_model: Optional[BehaviorModelConfig] = None
    fail_fast: bool = False

    def __post_init__(self):
        if len(self.seeds) == 0:
            raise ConfigError("seed set is empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seed set contains duplicates")
        if self.sampler_mode not in (UNIFORM_SAMPLER, TUNED_SAMPLER):
            raise ConfigError(f"unknown sampler mode {self.sampler_mode!r}")
        if self.propensity_mode not in ("true", "estimated"):
            raise ConfigError(f"unknown propensity mode {self.propensity_mode!r}")
        if self.propensity_mode == "estimated" and self.behavior_model is None:
            raise ConfigError(
                "estimated-propensity runs need a behavior_model configuration"
            )


@dataclass(frozen=True)
class EvaluationPolicy:
    """A candidate policy: its distribution at the logged contexts plus truth."""

    policy_id: str
    action_dist: ActionDistribution
    ground_truth: float


@dataclass(frozen=True)
class GroundTruthSource:
    """Logged feedback together with policies whose true values are known."""

    feedback: LoggedBanditFeedback
    policies: Tuple[EvaluationPolicy, ...]

    def __post_init__(self):
        if len(self.policies) == 0:
            raise ConfigError("policy set is empty")
        for p in self.policies:
            if p.action_dist.n_rounds != self.feedback.n_rounds:
                raise DataError(
                    f"policy {p.policy_id!r} distribution rows do not match feedback"
                )


@dataclass(frozen=True)
class LoggerDataset:
    """One real-world log and its policy's distribution on the other logs."""

    name: str
    feedback: LoggedBanditFeedback
    policy_dists: Mapping[str, ActionDistribution]


@dataclass(frozen=True)
class SeRecord:
    """One squared-error observation with its sampling provenance."""

    estimator: str
    seed: int
    policy_id: str
    theta_digest: str
    squared_error: float
    flagged: bool = False


@dataclass
class ResultSet:
    """All records of a sweep, ordered by (estimator, seed)."""

    records: List[SeRecord]

    def estimator_names(self) -> List[str]:
        seen: Dict[str, None] = {}
        for r in self.records:
            seen.setdefault(r.estimator, None)
        return list(seen)

    def squared_errors(
        self, estimator: str, include_flagged: bool = True
    ) -> np.ndarray:
        vals = [
            r.squared_error
            for r in self.records
            if r.estimator == estimator and (include_flagged or not r.flagged)
        ]
        return np.asarray(vals, dtype=float)

    def n_flagged(self, estimator: str) -> int:
        return sum(1 for r in self.records if r.estimator == estimator and r.flagged)


# ---------------------------------------------------------------------------
# Per-seed sampling and estimation
# ---------------------------------------------------------------------------


def _sample_behavior_spec(
    cfg: BehaviorModelConfig, rng: np.random.Generator
) -> ModelSpec:
    family = cfg.families[int(rng.integers(len(cfg.families)))]
    return sample_model_spec(family, cfg.model_spaces[family], rng)


def _estimated_propensity_feedback(
    fb: LoggedBanditFeedback, config: RunConfig, seed: int
) -> Tuple[LoggedBanditFeedback, str]:
    """Replace logged propensities with a per-seed estimated behavior model."""
    rng = stream_rng(seed, STREAM_MODEL)
    spec = _sample_behavior_spec(config.behavior_model, rng)
    model = fit_behavior_policy(
        spec,
        fb,
        calibration=config.behavior_model.calibration,
        holdout_fraction=config.behavior_model.holdout_fraction,
        seed=int(rng.integers(2**31 - 1)),
    )
    dist = model.predict_dist(fb.contexts)
    props = floored_propensities(dist, fb.actions)
    return fb.with_propensities(props), f"pb={spec.digest()}"


def _shrink_param_name(kind: str) -> str:
    return SHRINKAGE_PARAM[kind]


def _estimate_one(
    space: EstimatorSpace,
    seed: int,
    fb_star: LoggedBanditFeedback,
    dist_star: ActionDistribution,
    config: RunConfig,
) -> Tuple[float, str]:
    """Sample this estimator's setting and produce its value on the bootstrap."""
    hp_rng = stream_rng(seed, STREAM_HYPERPARAM, name_tag(space.name))
    model_rng = stream_rng(seed, STREAM_MODEL, name_tag(space.name))

    digest_parts: List[str] = []
    model_spec = None
    k = 1
    if space.uses_model:
        family = space.model_families[int(hp_rng.integers(len(space.model_families)))]
        model_spec = sample_model_spec(family, space.model_spaces[family], hp_rng)
        k = int(space.k_grid[int(hp_rng.integers(len(space.k_grid)))])
        digest_parts.append(f"q={model_spec.digest()}")
        digest_parts.append(f"K={k}")

    shrink = None
    if space.shrink_grid and config.sampler_mode == UNIFORM_SAMPLER:
        shrink = float(space.shrink_grid[int(hp_rng.integers(len(space.shrink_grid)))])

    # Equal fold sizes: drop trailing bootstrap rows when K does not divide n.
    n_keep = (fb_star.n_rounds // k) * k
    if n_keep < fb_star.n_rounds:
        keep = np.arange(n_keep)
        fb_star = fb_star.take(keep)
        dist_star = dist_star.take(keep)

    folds = None
    q_full = None
    if space.uses_model:
        fold_seed = int(model_rng.integers(2**31 - 1))
        folds = cross_fit_reward_matrices(model_spec, fb_star, k, fold_seed)
        q_full = np.empty((fb_star.n_rounds, fb_star.n_actions))
        for idx, preds in folds:
            q_full[idx] = preds

    weights = None
    if space.uses_weights:
        weights = compute_importance_weights(dist_star, fb_star)

    if space.shrink_grid and config.sampler_mode == TUNED_SAMPLER:
        q_for_tuning = (
            q_full
            if q_full is not None
            else np.zeros((fb_star.n_rounds, fb_star.n_actions))
        )
        shrink = select_hyperparameter(
            space.kind,
            space.shrink_grid,
            fb_star,
            dist_star,
            weights,
            q_for_tuning,
            config.delta,
        )

    kwargs = {"k_folds": k}
    if model_spec is not None:
        kwargs["reward_model"] = model_spec
    if shrink is not None:
        kwargs[_shrink_param_name(space.kind)] = shrink
        digest_parts.append(f"{_shrink_param_name(space.kind)}={_fmt(shrink)}")
    params = EstimatorHyperparams(**kwargs)

    if space.uses_model:
        value = cross_fit_estimate(
            fb_star, dist_star, space.kind, params, folds, weights
        )
    else:
        value = estimate(space.kind, fb_star, dist_star, params, weights, None)
    digest = ",".join(digest_parts) if digest_parts else "-"
    return value, digest


def _seed_records(
    seed: int,
    fb: LoggedBanditFeedback,
    eval_dist: ActionDistribution,
    policy_id: str,
    ground_truth: float,
    spaces: Sequence[EstimatorSpace],
    config: RunConfig,
    behavior_digest: str = "",
) -> List[SeRecord]:
    n = fb.n_rounds
    size = config.bootstrap_size if config.bootstrap_size is not None else n
    boot_idx = stream_rng(seed, STREAM_BOOTSTRAP).integers(0, n, size=size)
    fb_star = fb.take(boot_idx)
    dist_star = eval_dist.take(boot_idx)

    records = []
    for space in spaces:
        digest = behavior_digest or "-"
        try:
            if space.kind == ORACLE:
                value, digest = ground_truth, "oracle"
            else:
                value, digest = _estimate_one(space, seed, fb_star, dist_star, config)
                if behavior_digest:
                    digest = (
                        behavior_digest
                        if digest == "-"
                        else f"{digest},{behavior_digest}"
                    )
            z = (ground_truth - value) ** 2
            flagged = not math.isfinite(z)
        except Exception as exc:
            if config.fail_fast:
                raise EstimatorError(
                    f"estimator {space.name!r} failed on seed {seed}: {exc}"
                ) from exc
            z = math.inf
            flagged = True
        records.append(
            SeRecord(
                estimator=space.name,
                seed=seed,
                policy_id=policy_id,
                theta_digest=digest,
                squared_error=float(z),
                flagged=flagged,
            )
        )
    return records


def _collect(per_seed: List[List[SeRecord]], spaces: Sequence[EstimatorSpace]) -> ResultSet:
    by_est: Dict[str, List[SeRecord]] = {s.name: [] for s in spaces}
    for recs in per_seed:
        for r in recs:
            by_est[r.estimator].append(r)
    ordered = [r for s in spaces for r in by_est[s.name]]
    return ResultSet(records=ordered)


def _run_seeds(seed_fn, seeds: Sequence[int], workers: int) -> List[List[SeRecord]]:
    if workers <= 1:
        return [seed_fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(seed_fn, seeds))


def _check_names_unique(spaces: Sequence[EstimatorSpace]) -> None:
    names = [s.name for s in spaces]
    if len(set(names)) != len(names):
        raise ConfigError(f"estimator names are not unique: {names}")


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------


def run_with_ground_truth(
    config: RunConfig,
    source: GroundTruthSource,
    spaces: Sequence[EstimatorSpace],
    workers: int = 1,
) -> ResultSet:
    """Sweep estimators against policies whose true values are known.

    Per seed: sample each estimator's setting, draw one evaluation policy
    uniformly, bootstrap the log with replacement, and record every
    estimator's squared error against the drawn policy's ground truth. A
    failing estimator records an infinite, flagged error instead of aborting
    the sweep (unless the config requests fail-fast).
    """
    _check_names_unique(spaces)

    def seed_fn(s: int) -> List[SeRecord]:
        fb = source.feedback
        behavior_digest = ""
        if config.propensity_mode == "estimated":
            fb, behavior_digest = _estimated_propensity_feedback(fb, config, s)
        pol_idx = int(stream_rng(s, STREAM_POLICY).integers(len(source.policies)))
        policy = source.policies[pol_idx]
        return _seed_records(
            s,
            fb,
            policy.action_dist,
            policy.policy_id,
            policy.ground_truth,
            spaces,
            config,
            behavior_digest,
        )

    return _collect(_run_seeds(seed_fn, config.seeds, workers), spaces)


def _concat_feedback(parts: Sequence[LoggedBanditFeedback]) -> LoggedBanditFeedback:
    n_actions = {fb.n_actions for fb in parts}
    r_max = {fb.r_max for fb in parts}
    dims = {fb.dim_context for fb in parts}
    if len(n_actions) != 1 or len(r_max) != 1 or len(dims) != 1:
        raise DataError(
            "logger datasets disagree on action count, reward bound, or "
            "context dimension"
        )
    if any(fb.propensities is None for fb in parts):
        raise DataError("multi-logger evaluation requires logged propensities")
    return LoggedBanditFeedback(
        contexts=np.vstack([fb.contexts for fb in parts]),
        actions=np.concatenate([fb.actions for fb in parts]),
        rewards=np.concatenate([fb.rewards for fb in parts]),
        n_actions=parts[0].n_actions,
        r_max=parts[0].r_max,
        propensities=np.concatenate([fb.propensities for fb in parts]),
    )


def run_with_multiple_loggers(
    config: RunConfig,
    datasets: Sequence[LoggerDataset],
    spaces: Sequence[EstimatorSpace],
    workers: int = 1,
) -> ResultSet:
    """Sweep estimators over real logs collected by several policies.

    Per seed, one logger's policy becomes the evaluation target: its own log
    is held out as the test set (whose mean reward is the on-policy truth),
    the remaining logs are concatenated, bootstrapped, and evaluated
    off-policy against that truth.
    """
    _check_names_unique(spaces)
    if len(datasets) < 2:
        raise DataError(
            f"need at least two logger datasets, got {len(datasets)}"
        )
    if config.propensity_mode != "true":
        raise ConfigError(
            "multi-logger evaluation uses the logged propensities; estimated "
            "propensities are not supported here"
        )
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        raise ConfigError(f"logger dataset names are not unique: {names}")
    for d in datasets:
        for other in datasets:
            if other.name == d.name:
                continue
            if other.name not in d.policy_dists:
                raise DataError(
                    f"policy of {d.name!r} lacks its distribution on "
                    f"{other.name!r} contexts"
                )
            if (
                d.policy_dists[other.name].n_rounds
                != other.feedback.n_rounds
            ):
                raise DataError(
                    f"policy of {d.name!r} has wrong row count for {other.name!r}"
                )

    # Precompute, per held-out logger, the evaluation pool and distributions.
    pools = []
    for j, target in enumerate(datasets):
        rest = [d for i, d in enumerate(datasets) if i != j]
        fb_ev = _concat_feedback([d.feedback for d in rest])
        dist_ev = ActionDistribution(
            probs=np.vstack([target.policy_dists[d.name].probs for d in rest])
        )
        v_on = float(np.mean(target.feedback.rewards))
        pools.append((target.name, fb_ev, dist_ev, v_on))

    def seed_fn(s: int) -> List[SeRecord]:
        j = int(stream_rng(s, STREAM_POLICY).integers(len(datasets)))
        name, fb_ev, dist_ev, v_on = pools[j]
        return _seed_records(s, fb_ev, dist_ev, name, v_on, spaces, config)

    return _collect(_run_seeds(seed_fn, config.seeds, workers), spaces)
