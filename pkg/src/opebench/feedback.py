"""Core data model for logged bandit feedback, policies, and importance weights.

All types are immutable after construction and safe to share across
concurrent workers; the operations on them are pure functions.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DataError

# Rows of an action distribution must sum to one within this tolerance.
ROW_SUM_ATOL = 1e-9
# Rows further off than ROW_SUM_ATOL but within this bound are renormalized
# on ingestion; anything worse is rejected.
ROW_SUM_RENORM_ATOL = 1e-6


@dataclass(frozen=True)
class LoggedBanditFeedback:
    """A logged dataset of (context, action, reward) triples.

    Parameters
    ----------
    contexts: array of shape (n, dim_context)
        Feature vector observed for each round.

    actions: integer array of shape (n,)
        Action chosen by the logging policy, in ``{0, ..., n_actions - 1}``.

    rewards: array of shape (n,)
        Observed reward for the chosen action, in ``[0, r_max]``.

    n_actions: int
        Size of the action set.

    r_max: float
        Upper bound of the reward support.

    propensities: array of shape (n,), optional
        Probability the logging policy assigned to the chosen action.
        Strictly positive when present.
    """

    contexts: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    n_actions: int
    r_max: float
    propensities: Optional[np.ndarray] = None

    @property
    def n_rounds(self) -> int:
        return self.actions.shape[0]

    @property
    def dim_context(self) -> int:
        return self.contexts.shape[1]

    def take(self, indices: np.ndarray) -> "LoggedBanditFeedback":
        """Row subset (or resample, if `indices` repeats) of the dataset."""
        return replace(
            self,
            contexts=self.contexts[indices],
            actions=self.actions[indices],
            rewards=self.rewards[indices],
            propensities=None
            if self.propensities is None
            else self.propensities[indices],
        )

    def with_propensities(self, propensities: np.ndarray) -> "LoggedBanditFeedback":
        return replace(self, propensities=propensities)


@dataclass(frozen=True)
class ActionDistribution:
    """A policy evaluated at logged contexts: row-stochastic (n, n_actions) matrix."""

    probs: np.ndarray

    def __post_init__(self):
        probs = self.probs
        if probs.ndim != 2:
            raise DataError(f"action distribution must be 2-d, got ndim={probs.ndim}")
        if np.any(probs < 0):
            i, a = np.argwhere(probs < 0)[0]
            raise DataError(f"negative probability at row {i}, action {a}")
        row_sums = probs.sum(axis=1)
        off = np.abs(row_sums - 1.0)
        if np.any(off > ROW_SUM_ATOL):
            i = int(np.argmax(off))
            raise DataError(
                f"row {i} of action distribution sums to {row_sums[i]!r}, not 1"
            )

    @classmethod
    def from_matrix(cls, probs: np.ndarray) -> "ActionDistribution":
        """Ingest a probability matrix, renormalizing rows within 1e-6 of 1."""
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 2:
            raise DataError(f"action distribution must be 2-d, got ndim={probs.ndim}")
        row_sums = probs.sum(axis=1)
        off = np.abs(row_sums - 1.0)
        if np.any(off > ROW_SUM_RENORM_ATOL):
            i = int(np.argmax(off))
            raise DataError(
                f"row {i} of action distribution sums to {row_sums[i]!r}; "
                f"outside renormalization tolerance {ROW_SUM_RENORM_ATOL}"
            )
        if np.any(off > ROW_SUM_ATOL):
            probs = probs / row_sums[:, None]
        return cls(probs=probs)

    @property
    def n_rounds(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]

    def take(self, indices: np.ndarray) -> "ActionDistribution":
        return ActionDistribution(probs=self.probs[indices])

    def at_chosen_actions(self, actions: np.ndarray) -> np.ndarray:
        """Probability this policy puts on each logged action."""
        return self.probs[np.arange(actions.shape[0]), actions]


@dataclass(frozen=True)
class ImportanceWeights:
    """Per-round ratio of evaluation to behavior action probability.

    `rho_max` is the maximum weight over the logged (context, action) pairs.
    The logged pairs are the only ones whose behavior probability is
    observable, so the maximum is taken over them rather than over the full
    context-action product space.
    """

    weights: np.ndarray
    rho_max: float

    def take(self, indices: np.ndarray) -> "ImportanceWeights":
        # rho_max is kept: a subset cannot exceed the parent maximum, and the
        # tail bound it feeds stays valid (if conservative) under subsetting.
        return ImportanceWeights(weights=self.weights[indices], rho_max=self.rho_max)


def validate_feedback(fb: LoggedBanditFeedback) -> None:
    """Check every invariant of `LoggedBanditFeedback`, naming the first offender.

    Raises
    ------
    DataError
        On dimension mismatch, reward outside ``[0, r_max]``, nonpositive
        propensity, or out-of-range action id.
    """
    n = fb.actions.shape[0]
    if n < 1:
        raise DataError("feedback must contain at least one round")
    if fb.contexts.ndim != 2 or fb.contexts.shape[0] != n:
        raise DataError(
            f"contexts shape {fb.contexts.shape} inconsistent with {n} actions"
        )
    if fb.rewards.shape != (n,):
        raise DataError(
            f"rewards shape {fb.rewards.shape} inconsistent with {n} actions"
        )
    if fb.propensities is not None and fb.propensities.shape != (n,):
        raise DataError(
            f"propensities shape {fb.propensities.shape} inconsistent with {n} actions"
        )
    if fb.n_actions < 1:
        raise DataError("n_actions must be positive")
    if not fb.r_max > 0:
        raise DataError(f"r_max must be positive, got {fb.r_max}")
    out = (fb.actions < 0) | (fb.actions >= fb.n_actions)
    if np.any(out):
        i = int(np.argmax(out))
        raise DataError(f"action id {fb.actions[i]} out of range at index {i}")
    bad = (fb.rewards < 0) | (fb.rewards > fb.r_max)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DataError(
            f"reward {fb.rewards[i]} outside [0, {fb.r_max}] at index {i}"
        )
    if fb.propensities is not None:
        nonpos = fb.propensities <= 0
        if np.any(nonpos):
            i = int(np.argmax(nonpos))
            raise DataError(
                f"nonpositive propensity {fb.propensities[i]} at index {i}"
            )


def compute_importance_weights(
    eval_dist: ActionDistribution,
    fb: LoggedBanditFeedback,
    behavior_dist: Optional[ActionDistribution] = None,
) -> ImportanceWeights:
    """Importance weights of the evaluation policy against the logging policy.

    ``weights[i] = pi_e(a_i | x_i) / pi_b(a_i | x_i)``. The denominator comes
    from `fb.propensities` (the logged truth) unless `behavior_dist` supplies
    an estimated behavior distribution instead.

    Raises
    ------
    DataError
        If no propensity source is available, or an estimated behavior
        probability is zero at a logged action.
    """
    if eval_dist.n_rounds != fb.n_rounds or eval_dist.n_actions != fb.n_actions:
        raise DataError(
            f"evaluation distribution shape {eval_dist.probs.shape} does not "
            f"match feedback ({fb.n_rounds}, {fb.n_actions})"
        )
    if behavior_dist is not None:
        denom = behavior_dist.at_chosen_actions(fb.actions)
        zero = denom <= 0
        if np.any(zero):
            i = int(np.argmax(zero))
            raise DataError(
                f"estimated behavior probability is zero at logged action, index {i}"
            )
    else:
        if fb.propensities is None:
            raise DataError(
                "feedback carries no propensities and no behavior distribution "
                "was supplied"
            )
        denom = fb.propensities
    weights = eval_dist.at_chosen_actions(fb.actions) / denom
    return ImportanceWeights(weights=weights, rho_max=float(np.max(weights)))
