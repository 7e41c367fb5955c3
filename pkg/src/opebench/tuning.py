"""Shrinkage-hyperparameter selection for the weight-modifying estimators.

A candidate clipping or switching threshold is scored by an estimable proxy
for its mean squared error: a high-probability upper bound on the squared
bias plus the sample variance of the per-round estimator contributions. The
candidate with the smallest score wins; ties go to the smallest candidate.
"""

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .estimators import EstimatorHyperparams, SHRINKAGE_PARAM, shrunk_weights
from .feedback import ActionDistribution, ImportanceWeights, LoggedBanditFeedback

# Alternating 1/5 decade grid, ending open-ended.
DEFAULT_CANDIDATE_GRID = (
    1.0, 5.0, 10.0, 50.0, 100.0, 500.0,
    1e3, 5e3, 1e4, 5e4, 1e5, math.inf,
)
DEFAULT_DELTA = 0.05


@dataclass(frozen=True)
class TuningConfig:
    """Confidence level and candidate grid for shrinkage selection."""

    delta: float = DEFAULT_DELTA
    candidate_grid: Sequence[float] = field(default=DEFAULT_CANDIDATE_GRID)

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValueError(f"delta must be in (0, 1], got {self.delta}")
        if len(self.candidate_grid) == 0:
            raise ValueError("candidate grid must be nonempty")


def direct_bias_ub(
    weights: ImportanceWeights,
    shrunk: np.ndarray,
    fb: LoggedBanditFeedback,
    reward_predictions: np.ndarray,
    delta: float,
) -> float:
    """High-probability upper bound on the bias introduced by weight shrinkage.

    The observable part is the absolute mean of (shrunk minus raw weight)
    times the reward-model residual; two concentration terms cover the gap
    between that empirical mean and the population bias. The second moment of
    the weights is taken empirically over the logged pairs, the only pairs
    the data exposes.
    """
    if not 0 < delta <= 1:
        raise ValueError(f"delta must be in (0, 1], got {delta}")
    n = fb.n_rounds
    w = weights.weights
    residuals = fb.rewards - reward_predictions[np.arange(n), fb.actions]
    empirical = abs(float(np.mean((shrunk - w) * residuals)))
    log_term = math.log(2.0 / delta)
    second_moment = float(np.mean(w**2))
    tail1 = math.sqrt(2.0 * second_moment * log_term / n)
    tail2 = 2.0 * weights.rho_max * log_term / (3.0 * n)
    return empirical + tail1 + tail2


def sample_variance(per_sample_terms: np.ndarray) -> float:
    """Variance of the estimator: unbiased sample variance of its per-round
    contributions, divided by the sample size."""
    terms = np.asarray(per_sample_terms, dtype=float)
    n = terms.size
    if n < 2:
        raise ValueError(f"need at least 2 terms, got {n}")
    return float(np.var(terms, ddof=1) / n)


def per_sample_contributions(
    fb: LoggedBanditFeedback,
    eval_dist: ActionDistribution,
    shrunk: np.ndarray,
    reward_predictions: np.ndarray,
) -> np.ndarray:
    """Per-round terms whose mean is the (shrunk-weight) estimator value."""
    base = np.einsum("ia,ia->i", eval_dist.probs, reward_predictions)
    residuals = fb.rewards - reward_predictions[np.arange(fb.n_rounds), fb.actions]
    return base + shrunk * residuals


def select_hyperparameter(
    estimator_kind: str,
    candidate_grid: Sequence[float],
    fb: LoggedBanditFeedback,
    eval_dist: ActionDistribution,
    weights: ImportanceWeights,
    reward_predictions: np.ndarray,
    delta: float = DEFAULT_DELTA,
) -> float:
    """Pick the candidate minimizing squared bias bound plus sample variance.

    Ties break toward the smallest candidate, treating inf as largest. The
    reward-prediction matrix should be all zeros for estimators that use no
    reward model.
    """
    if len(candidate_grid) == 0:
        raise ValueError("candidate grid must be nonempty")
    if estimator_kind not in SHRINKAGE_PARAM:
        raise ValueError(
            f"estimator {estimator_kind!r} has no shrinkage hyperparameter"
        )
    param_name = SHRINKAGE_PARAM[estimator_kind]

    best_value = None
    best_score = math.inf
    for candidate in sorted(candidate_grid):
        params = EstimatorHyperparams(**{param_name: float(candidate)})
        shrunk = shrunk_weights(weights, estimator_kind, params)
        bias = direct_bias_ub(weights, shrunk, fb, reward_predictions, delta)
        variance = sample_variance(
            per_sample_contributions(fb, eval_dist, shrunk, reward_predictions)
        )
        score = bias**2 + variance
        if score < best_score:
            best_score = score
            best_value = float(candidate)
    return best_value
