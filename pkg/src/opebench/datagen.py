"""Synthetic bandit environments and classification-to-bandit conversion.

Two data routes feed the benchmark: a fully synthetic environment whose true
mean-reward function is known, and the standard reduction that turns a
labeled classification set into logged bandit feedback by running a
stochastic policy over it and rewarding label matches.
"""

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import DataError
from .feedback import ActionDistribution, LoggedBanditFeedback, validate_feedback
from .models import _softmax


@dataclass(frozen=True)
class SyntheticEnvironment:
    """A contextual bandit with linear-parameterized rewards and logging policy.

    The mean reward of action `a` at context `x` is a logistic link of
    ``x @ reward_params[:, a]`` for binary rewards and the linear value
    clipped to ``[0, r_max]`` for continuous ones. The logging policy is a
    softmax over ``x @ behavior_params``.
    """

    dim_context: int
    n_actions: int
    reward_kind: str  # "binary" | "continuous"
    reward_params: np.ndarray  # (dim_context, n_actions)
    behavior_params: np.ndarray  # (dim_context, n_actions)
    r_max: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.reward_kind not in ("binary", "continuous"):
            raise ValueError(f"unknown reward kind {self.reward_kind!r}")
        if self.reward_kind == "binary" and self.r_max != 1.0:
            raise ValueError("binary rewards require r_max = 1")
        if self.reward_params.shape != (self.dim_context, self.n_actions):
            raise ValueError("reward_params shape mismatch")
        if self.behavior_params.shape != (self.dim_context, self.n_actions):
            raise ValueError("behavior_params shape mismatch")

    def mean_rewards(self, contexts: np.ndarray) -> np.ndarray:
        """True expected reward of every action at each context: (n, n_actions)."""
        scores = contexts @ self.reward_params
        if self.reward_kind == "binary":
            return 1.0 / (1.0 + np.exp(-scores))
        return np.clip(scores, 0.0, self.r_max)

    def behavior_dist(self, contexts: np.ndarray) -> np.ndarray:
        return _softmax(contexts @ self.behavior_params)


def make_synthetic_environment(
    dim_context: int,
    n_actions: int,
    reward_kind: str = "binary",
    r_max: float = 1.0,
    seed: int = 0,
) -> SyntheticEnvironment:
    """Draw random reward and behavior parameter matrices for an environment."""
    rng = np.random.default_rng(seed)
    scale = 1.0 / math.sqrt(dim_context)
    return SyntheticEnvironment(
        dim_context=dim_context,
        n_actions=n_actions,
        reward_kind=reward_kind,
        reward_params=rng.normal(size=(dim_context, n_actions)) * scale * 3.0,
        behavior_params=rng.normal(size=(dim_context, n_actions)) * scale,
        r_max=r_max,
        seed=seed,
    )


def generate_synthetic_feedback(
    env: SyntheticEnvironment, n: int, seed: int
) -> tuple[LoggedBanditFeedback, np.ndarray]:
    """Sample a logged dataset of `n` rounds plus the true reward matrix.

    Contexts are standard normal, actions follow the environment's logging
    policy (with the chosen probability recorded exactly as the propensity),
    and rewards are Bernoulli draws of the true mean for binary environments
    or the mean plus clipped uniform noise for continuous ones.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    contexts = rng.normal(size=(n, env.dim_context))
    dist = env.behavior_dist(contexts)
    # Inverse-CDF draw per row, vectorized.
    cdf = np.cumsum(dist, axis=1)
    u = rng.uniform(size=(n, 1))
    actions = (u > cdf).sum(axis=1)
    actions = np.minimum(actions, env.n_actions - 1)
    q = env.mean_rewards(contexts)
    q_chosen = q[np.arange(n), actions]
    if env.reward_kind == "binary":
        rewards = (rng.uniform(size=n) < q_chosen).astype(float)
    else:
        noise = rng.uniform(-0.1, 0.1, size=n) * env.r_max
        rewards = np.clip(q_chosen + noise, 0.0, env.r_max)
    fb = LoggedBanditFeedback(
        contexts=contexts,
        actions=actions,
        rewards=rewards,
        n_actions=env.n_actions,
        r_max=env.r_max,
        propensities=dist[np.arange(n), actions],
    )
    validate_feedback(fb)
    return fb, q


class MonteCarloValue(NamedTuple):
    value: float
    stderr: float


def true_policy_value(
    env: SyntheticEnvironment,
    eval_policy,
    n_mc: int,
    seed: int,
) -> MonteCarloValue:
    """Monte Carlo estimate (and standard error) of a policy's expected reward.

    `eval_policy` must expose ``action_distribution(contexts, n_actions)``.
    When the per-context expected reward is constant the exact value is
    returned with zero standard error.
    """
    if n_mc < 1:
        raise ValueError(f"n_mc must be >= 1, got {n_mc}")
    rng = np.random.default_rng(seed)
    contexts = rng.normal(size=(n_mc, env.dim_context))
    dist = eval_policy.action_distribution(contexts, env.n_actions)
    per_context = np.einsum("ia,ia->i", dist, env.mean_rewards(contexts))
    if np.all(per_context == per_context[0]):
        return MonteCarloValue(float(per_context[0]), 0.0)
    return MonteCarloValue(
        float(np.mean(per_context)),
        float(np.std(per_context, ddof=1) / math.sqrt(n_mc)),
    )


@dataclass(frozen=True)
class MixedPolicy:
    """A deterministic choice rule blended with the uniform policy.

    The mixture puts ``alpha + (1 - alpha) / n_actions`` on the deterministic
    choice and ``(1 - alpha) / n_actions`` elsewhere. ``alpha = 0`` is the
    uniform policy and needs no choice rule.
    """

    deterministic_choice: Optional[Callable[[np.ndarray], np.ndarray]]
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.alpha > 0 and self.deterministic_choice is None:
            raise ValueError("a deterministic choice rule is required when alpha > 0")

    def action_distribution(self, contexts: np.ndarray, n_actions: int) -> np.ndarray:
        return mixed_policy_distribution(self, contexts, n_actions).probs


def mixed_policy_distribution(
    policy: MixedPolicy, contexts: np.ndarray, n_actions: int
) -> ActionDistribution:
    """Closed-form action distribution of a mixed policy at given contexts."""
    n = contexts.shape[0]
    base = (1.0 - policy.alpha) / n_actions
    probs = np.full((n, n_actions), base)
    if policy.alpha > 0:
        chosen = np.asarray(policy.deterministic_choice(contexts), dtype=int)
        probs[np.arange(n), chosen] += policy.alpha
    return ActionDistribution(probs=probs)


@dataclass(frozen=True)
class ClassificationDataset:
    """Labeled feature vectors; labels double as the optimal actions."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        if self.labels.shape[0] != self.features.shape[0]:
            raise DataError("features and labels disagree on length")
        if self.features.shape[0] < self.n_classes:
            raise DataError("need at least one sample per class")
        if np.any((self.labels < 0) | (self.labels >= self.n_classes)):
            raise DataError("label out of range")

    @property
    def n_samples(self) -> int:
        return self.labels.shape[0]

    def take(self, indices: np.ndarray) -> "ClassificationDataset":
        return ClassificationDataset(
            features=self.features[indices],
            labels=self.labels[indices],
            n_classes=self.n_classes,
        )


def classification_to_feedback(
    ds: ClassificationDataset, behavior: MixedPolicy, seed: int
) -> LoggedBanditFeedback:
    """Run a stochastic policy over a labeled set; reward = chose the label.

    The sampled action's mixture probability is recorded as the propensity.
    The behavior policy's choice rule should come from a model trained on a
    disjoint split; this function only performs the conversion.
    """
    dist = mixed_policy_distribution(behavior, ds.features, ds.n_classes)
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(dist.probs, axis=1)
    u = rng.uniform(size=(ds.n_samples, 1))
    sampled = np.minimum((u > cdf).sum(axis=1), ds.n_classes - 1)
    rewards = (sampled == ds.labels).astype(float)
    fb = LoggedBanditFeedback(
        contexts=ds.features,
        actions=sampled,
        rewards=rewards,
        n_actions=ds.n_classes,
        r_max=1.0,
        propensities=dist.probs[np.arange(ds.n_samples), sampled],
    )
    validate_feedback(fb)
    return fb


def classification_ground_truth(
    ds_test: ClassificationDataset, eval_dist_at_test: ActionDistribution
) -> float:
    """Exact policy value on a labeled set: mean probability of the true label."""
    if eval_dist_at_test.n_rounds != ds_test.n_samples:
        raise DataError(
            f"distribution has {eval_dist_at_test.n_rounds} rows, dataset has "
            f"{ds_test.n_samples}"
        )
    if eval_dist_at_test.n_actions != ds_test.n_classes:
        raise DataError(
            f"distribution has {eval_dist_at_test.n_actions} actions, dataset "
            f"has {ds_test.n_classes} classes"
        )
    return float(
        np.mean(
            eval_dist_at_test.probs[np.arange(ds_test.n_samples), ds_test.labels]
        )
    )


def make_classification_task(
    n_samples: int,
    n_classes: int,
    dim: int,
    class_sep: float = 1.0,
    seed: int = 0,
) -> ClassificationDataset:
    """Gaussian-blob multiclass task with controllable overlap.

    Class centers are standard normal scaled by `class_sep`; samples add unit
    noise, so smaller separations make the labels harder to recover.
    """
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(n_classes, dim)) * class_sep
    labels = rng.integers(n_classes, size=n_samples)
    features = centers[labels] + rng.normal(size=(n_samples, dim))
    return ClassificationDataset(
        features=features, labels=labels, n_classes=n_classes
    )


def train_test_split_rows(
    n: int, train_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded row split; returns (train_indices, test_indices), each sorted."""
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_train = max(1, int(round(train_fraction * n)))
    return np.sort(order[:n_train]), np.sort(order[n_train:])
