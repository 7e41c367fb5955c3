"""Policy-value estimators for logged bandit feedback.

Each estimator is a pure function of the dataset, the evaluation policy's
action distribution, the importance weights, an optional reward-prediction
matrix, and its own hyperparameters. Limiting cases are exact: the clipping
and switching thresholds accept ``math.inf``, under which the clipped
estimators coincide bitwise with their unclipped forms.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DataError, EstimatorError
from .feedback import ActionDistribution, ImportanceWeights, LoggedBanditFeedback

DM = "dm"
IPW_PS = "ipw_ps"
SNIPW = "snipw"
DR_PS = "dr_ps"
SNDR = "sndr"
SWITCH_DR = "switch_dr"
DR_OS = "dr_os"

ESTIMATOR_KINDS = (DM, IPW_PS, SNIPW, DR_PS, SNDR, SWITCH_DR, DR_OS)

# Which inputs each estimator consumes.
MODEL_BASED = frozenset({DM, DR_PS, SNDR, SWITCH_DR, DR_OS})
WEIGHT_BASED = frozenset({IPW_PS, SNIPW, DR_PS, SNDR, SWITCH_DR, DR_OS})
# Estimators with a tunable weight-shrinkage hyperparameter.
SHRINKAGE_PARAM = {IPW_PS: "lam", DR_PS: "lam", SWITCH_DR: "tau", DR_OS: "lam"}


@dataclass(frozen=True)
class EstimatorHyperparams:
    """Tunable knobs of an estimator.

    `lam` clips (or, for the optimistic-shrinkage variant, shrinks) the
    importance weights; `tau` is the switching threshold; `k_folds` controls
    cross-fitting of the reward model; `reward_model` names the model family
    and its hyperparameters (resolved by the models module).
    """

    lam: float = math.inf
    tau: float = math.inf
    k_folds: int = 1
    reward_model: Optional[object] = None  # ModelSpec; opaque at this layer

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if self.tau < 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")
        if self.k_folds < 1:
            raise ValueError(f"k_folds must be >= 1, got {self.k_folds}")


def _check_shapes(
    fb: LoggedBanditFeedback,
    eval_dist: Optional[ActionDistribution] = None,
    weights: Optional[ImportanceWeights] = None,
    reward_predictions: Optional[np.ndarray] = None,
) -> None:
    n = fb.n_rounds
    if eval_dist is not None and (
        eval_dist.n_rounds != n or eval_dist.n_actions != fb.n_actions
    ):
        raise DataError(
            f"evaluation distribution shape {eval_dist.probs.shape} does not "
            f"match feedback ({n}, {fb.n_actions})"
        )
    if weights is not None and weights.weights.shape != (n,):
        raise DataError(
            f"weights shape {weights.weights.shape} does not match n={n}"
        )
    if reward_predictions is not None and reward_predictions.shape != (
        n,
        fb.n_actions,
    ):
        raise DataError(
            f"reward prediction matrix shape {reward_predictions.shape} does "
            f"not match ({n}, {fb.n_actions})"
        )


def _policy_expected_rewards(
    eval_dist: ActionDistribution, reward_predictions: np.ndarray
) -> np.ndarray:
    """Per-round expectation of predicted reward under the evaluation policy."""
    return np.einsum("ia,ia->i", eval_dist.probs, reward_predictions)


def estimate_dm(
    eval_dist: ActionDistribution, reward_predictions: np.ndarray
) -> float:
    """Direct method: average the model's expected reward under the policy.

    Accurate exactly when the reward model is; weights and rewards are unused.
    """
    if reward_predictions is None:
        raise DataError("direct method requires a reward prediction matrix")
    if eval_dist.probs.shape != reward_predictions.shape:
        raise DataError(
            f"reward prediction matrix shape {reward_predictions.shape} does "
            f"not match evaluation distribution {eval_dist.probs.shape}"
        )
    return float(np.mean(_policy_expected_rewards(eval_dist, reward_predictions)))


def estimate_ipw(fb: LoggedBanditFeedback, weights: ImportanceWeights) -> float:
    """Inverse probability weighting: mean of reward times importance weight.

    Unbiased when the behavior propensities are exact, but unbounded in
    variance when the policies overlap poorly.
    """
    _check_shapes(fb, weights=weights)
    return float(np.mean(weights.weights * fb.rewards))


def estimate_ipw_ps(
    fb: LoggedBanditFeedback, weights: ImportanceWeights, lam: float
) -> float:
    """Inverse probability weighting with weights clipped at `lam`.

    Lower `lam` trades bias for variance; ``lam=inf`` recovers plain IPW
    exactly.
    """
    _check_shapes(fb, weights=weights)
    clipped = np.minimum(weights.weights, lam)
    return float(np.mean(clipped * fb.rewards))


def estimate_snipw(fb: LoggedBanditFeedback, weights: ImportanceWeights) -> float:
    """Self-normalized inverse probability weighting.

    Divides the weighted-reward mean by the weight mean, which keeps the
    estimate inside the reward support.
    """
    _check_shapes(fb, weights=weights)
    w = weights.weights
    denom = np.mean(w)
    if denom <= 0:
        raise EstimatorError("importance weights sum to zero; ratio undefined")
    return float(np.mean(w * fb.rewards) / denom)


def _dr_value(
    fb: LoggedBanditFeedback,
    eval_dist: ActionDistribution,
    shrunk: np.ndarray,
    reward_predictions: np.ndarray,
) -> float:
    base = _policy_expected_rewards(eval_dist, reward_predictions)
    residuals = fb.rewards - reward_predictions[np.arange(fb.n_rounds), fb.actions]
    return float(np.mean(base + shrunk * residuals))


def estimate_dr(
    fb: LoggedBanditFeedback,
    eval_dist: ActionDistribution,
    weights: ImportanceWeights,
    reward_predictions: np.ndarray,
) -> float:
    """Doubly robust: model baseline plus weighted residual correction."""
    return estimate_dr_ps(fb, eval_dist, weights, reward_predictions, math.inf)


def estimate_dr_ps(
    fb: LoggedBanditFeedback,
    eval_dist: ActionDistribution,
    weights: ImportanceWeights,
    reward_predictions: np.ndarray,
    lam: float,
) -> float:
    """Doubly robust with the residual weights clipped at `lam`.

    ``lam=inf`` recovers plain DR exactly; a zero reward model recovers
    clipped IPW exactly.
    """
    _check_shapes(fb, eval_dist, weights, reward_predictions)
    clipped = np.minimum(weights.weights, lam)
    return _dr_value(fb, eval_dist, clipped, reward_predictions)


def estimate_sndr(
    fb: LoggedBanditFeedback,
    eval_dist: ActionDistribution,
    weights: ImportanceWeights,
    reward_predictions: np.ndarray,
) -> float:
    """Self-normalized doubly robust.

    The residual correction is divided by the mean importance weight, giving
    the same stabilization as self-normalized IPW.
    """
    _check_shapes(fb, eval_dist, weights, reward_predictions)
    w = weights.weights
    denom = np.mean(w)
    if denom <= 0:
        raise EstimatorError("importance weights sum to zero; ratio undefined")
    base = float(np.mean(_policy_expected_rewards(eval_dist, reward_predictions)))
    residuals = fb.rewards - reward_predictions[np.arange(fb.n_rounds), fb.actions]
    return base + float(np.mean(w * residuals) / denom)


def estimate_switch_dr(
    fb: LoggedBanditFeedback,
    eval_dist: ActionDistribution,
    weights: ImportanceWeights,
    reward_predictions: np.ndarray,
    tau: float,
) -> float:
    """Doubly robust that switches to the model where weights exceed `tau`.

    Rounds with weight at most `tau` keep their residual correction (ties
    included); the rest fall back to the model baseline. ``tau=0`` is the
    direct method, ``tau=inf`` is plain DR, both exactly.
    """
    _check_shapes(fb, eval_dist, weights, reward_predictions)
    w = weights.weights
    shrunk = w * (w <= tau)
    return _dr_value(fb, eval_dist, shrunk, reward_predictions)


def estimate_dr_os(
    fb: LoggedBanditFeedback,
    eval_dist: ActionDistribution,
    weights: ImportanceWeights,
    reward_predictions: np.ndarray,
    lam: float,
) -> float:
    """Doubly robust with optimistic shrinkage of the residual weights.

    Each weight ``w`` is replaced by ``lam * w / (w**2 + lam)``, which
    interpolates from the direct method (``lam=0``, exactly) to plain DR
    (``lam=inf``, exactly).
    """
    _check_shapes(fb, eval_dist, weights, reward_predictions)
    shrunk = _optimistic_shrinkage(weights.weights, lam)
    return _dr_value(fb, eval_dist, shrunk, reward_predictions)


def _optimistic_shrinkage(w: np.ndarray, lam: float) -> np.ndarray:
    # Endpoints must be exact: the formula yields nan at lam=inf and at
    # (lam=0, w=0).
    if lam == 0:
        return np.zeros_like(w)
    if math.isinf(lam):
        return w
    return lam * w / (w**2 + lam)


def shrunk_weights(
    weights: ImportanceWeights, kind: str, params: EstimatorHyperparams
) -> np.ndarray:
    """The hyperparameter-modified weights an estimator applies to residuals.

    Clipping for the pessimistic-shrinkage family, thresholding for the
    switch estimator, optimistic shrinkage for its namesake, the raw weights
    for the self-normalized family, and all zeros for the direct method.
    """
    w = weights.weights
    if kind in (IPW_PS, DR_PS):
        return np.minimum(w, params.lam)
    if kind == SWITCH_DR:
        return w * (w <= params.tau)
    if kind == DR_OS:
        return _optimistic_shrinkage(w, params.lam)
    if kind in (SNIPW, SNDR):
        return w.copy()
    if kind == DM:
        return np.zeros_like(w)
    raise ValueError(f"unknown estimator kind: {kind!r}")


def estimate(
    kind: str,
    fb: LoggedBanditFeedback,
    eval_dist: ActionDistribution,
    params: EstimatorHyperparams,
    weights: Optional[ImportanceWeights] = None,
    reward_predictions: Optional[np.ndarray] = None,
) -> float:
    """Dispatch to the estimator named by `kind`."""
    if kind in WEIGHT_BASED and weights is None:
        raise DataError(f"estimator {kind!r} requires importance weights")
    if kind in MODEL_BASED and reward_predictions is None:
        raise DataError(f"estimator {kind!r} requires a reward prediction matrix")
    if kind == DM:
        return estimate_dm(eval_dist, reward_predictions)
    if kind == IPW_PS:
        return estimate_ipw_ps(fb, weights, params.lam)
    if kind == SNIPW:
        return estimate_snipw(fb, weights)
    if kind == DR_PS:
        return estimate_dr_ps(fb, eval_dist, weights, reward_predictions, params.lam)
    if kind == SNDR:
        return estimate_sndr(fb, eval_dist, weights, reward_predictions)
    if kind == SWITCH_DR:
        return estimate_switch_dr(
            fb, eval_dist, weights, reward_predictions, params.tau
        )
    if kind == DR_OS:
        return estimate_dr_os(fb, eval_dist, weights, reward_predictions, params.lam)
    raise ValueError(f"unknown estimator kind: {kind!r}")


def cross_fit_estimate(
    fb: LoggedBanditFeedback,
    eval_dist: ActionDistribution,
    kind: str,
    params: EstimatorHyperparams,
    fold_reward_matrices: Sequence[Tuple[np.ndarray, Optional[np.ndarray]]],
    weights: Optional[ImportanceWeights] = None,
) -> float:
    """Average the estimator over cross-fitting folds.

    `fold_reward_matrices` pairs each fold's row indices with the reward
    predictions of a model fit without that fold. Folds must be disjoint,
    equal-sized, and in range; the fold builder guarantees this, dropping
    trailing rows when the count is not a multiple of the fold count. A
    single fold covering all rows applies the estimator once, unchanged.
    """
    if not fold_reward_matrices:
        raise DataError("no folds supplied")
    sizes = {len(idx) for idx, _ in fold_reward_matrices}
    if len(sizes) != 1 or 0 in sizes:
        raise DataError(f"folds are not equal-sized nonempty sets: sizes {sorted(sizes)}")
    all_idx = np.concatenate([idx for idx, _ in fold_reward_matrices])
    if np.unique(all_idx).size != all_idx.size:
        raise DataError("folds overlap")
    if all_idx.min() < 0 or all_idx.max() >= fb.n_rounds:
        raise DataError("fold indices out of range")

    fold_values = []
    for idx, preds in fold_reward_matrices:
        fold_fb = fb.take(idx)
        fold_dist = eval_dist.take(idx)
        fold_w = weights.take(idx) if weights is not None else None
        fold_values.append(
            estimate(kind, fold_fb, fold_dist, params, fold_w, preds)
        )
    return float(np.mean(fold_values))
