"""In-house supervised models for reward regression and behavior-policy estimation.

Three families cover the two bias characters the benchmark varies over:
linear (ridge for continuous rewards, logistic for binary) and nonlinear
(gradient-boosted, depth-limited regression trees on binned features). All
fits are deterministic functions of (spec, data, seed): ridge is closed form,
the logistic/softmax fits run full-batch gradient descent from zero weights
with a step fixed by a curvature bound, and tree construction breaks ties by
first index.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit

from .errors import DataError
from .feedback import LoggedBanditFeedback

logger = logging.getLogger(__name__)

LOGISTIC = "logistic"
RIDGE = "ridge"
BOOSTED_TREES = "boosted_trees"
MODEL_FAMILIES = (LOGISTIC, RIDGE, BOOSTED_TREES)

GD_MAX_ITER = 10_000
GD_TOL = 1e-8
PROPENSITY_FLOOR = 1e-7


@dataclass(frozen=True)
class HyperparamRange:
    """Sampling domain for one model hyperparameter.

    Either a continuous/integer interval (optionally log-scaled) or an
    explicit finite set of choices.
    """

    lower: Optional[float] = None
    upper: Optional[float] = None
    log_scale: bool = False
    integer: bool = False
    choices: Optional[Tuple] = None

    def __post_init__(self):
        if self.choices is not None:
            if len(self.choices) == 0:
                raise ValueError("empty choice set")
            return
        if self.lower is None or self.upper is None:
            raise ValueError("range needs lower and upper (or explicit choices)")
        if self.lower > self.upper:
            raise ValueError(f"lower {self.lower} > upper {self.upper}")
        if self.log_scale and self.lower <= 0:
            raise ValueError("log-scaled range requires lower > 0")

    def sample(self, rng: np.random.Generator):
        if self.choices is not None:
            return self.choices[int(rng.integers(len(self.choices)))]
        if self.integer:
            return int(rng.integers(int(self.lower), int(self.upper) + 1))
        if self.log_scale:
            return float(
                math.exp(rng.uniform(math.log(self.lower), math.log(self.upper)))
            )
        return float(rng.uniform(self.lower, self.upper))


HyperparamSpace = Mapping[str, HyperparamRange]

DEFAULT_MODEL_SPACES: Dict[str, Dict[str, HyperparamRange]] = {
    LOGISTIC: {"C": HyperparamRange(1e-3, 1e3, log_scale=True)},
    RIDGE: {"alpha": HyperparamRange(1e-2, 1e2, log_scale=True)},
    BOOSTED_TREES: {
        "learning_rate": HyperparamRange(1e-4, 1e-1, log_scale=True),
        "max_depth": HyperparamRange(2, 10, integer=True),
        "min_samples_leaf": HyperparamRange(5, 20, integer=True),
    },
}


@dataclass(frozen=True)
class ModelSpec:
    """A model family plus concrete hyperparameter values."""

    family: str
    hyperparams: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in MODEL_FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        hp = self.hyperparams
        if self.family == LOGISTIC and hp.get("C", 1.0) <= 0:
            raise ValueError("logistic C must be positive")
        if self.family == RIDGE and hp.get("alpha", 1.0) <= 0:
            raise ValueError("ridge alpha must be positive")
        if self.family == BOOSTED_TREES:
            if hp.get("learning_rate", 0.1) <= 0:
                raise ValueError("learning_rate must be positive")
            if hp.get("max_depth", 2) < 1:
                raise ValueError("max_depth must be >= 1")
            if hp.get("min_samples_leaf", 1) < 1:
                raise ValueError("min_samples_leaf must be >= 1")

    def digest(self) -> str:
        parts = ",".join(
            f"{k}={_fmt(v)}" for k, v in sorted(self.hyperparams.items())
        )
        return f"{self.family}({parts})"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def sample_model_spec(
    family: str, space: HyperparamSpace, rng: np.random.Generator
) -> ModelSpec:
    """Draw one concrete spec from a family's hyperparameter space."""
    return ModelSpec(
        family=family, hyperparams={k: r.sample(rng) for k, r in sorted(space.items())}
    )


# ---------------------------------------------------------------------------
# Base learners
# ---------------------------------------------------------------------------


class RidgeRegressor:
    """Linear least squares with an L2 penalty and an unpenalized intercept."""

    def __init__(self, alpha: float):
        self.alpha = float(alpha)
        self.coef_ = None
        self.intercept_ = 0.0

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RidgeRegressor":
        x_mean = X.mean(axis=0)
        y_mean = y.mean()
        Xc = X - x_mean
        yc = y - y_mean
        gram = Xc.T @ Xc + self.alpha * np.eye(X.shape[1])
        try:
            self.coef_ = np.linalg.solve(gram, Xc.T @ yc)
        except np.linalg.LinAlgError:
            logger.warning("ridge system singular; falling back to least squares")
            self.coef_ = np.linalg.lstsq(gram, Xc.T @ yc, rcond=None)[0]
        self.intercept_ = float(y_mean - x_mean @ self.coef_)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coef_ + self.intercept_


def _lipschitz_step(Xb: np.ndarray, curvature: float, reg: float) -> float:
    # Largest eigenvalue of the design Gram bounds the loss curvature.
    sigma = float(np.linalg.eigvalsh(Xb.T @ Xb)[-1])
    n = Xb.shape[0]
    return 1.0 / (curvature * sigma / n + reg)


class LogisticRegressor:
    """Binary cross-entropy fit by full-batch gradient descent.

    The step size is fixed at the inverse curvature bound; iteration stops at
    a gradient-norm tolerance or the iteration cap. The intercept is not
    penalized.
    """

    def __init__(self, C: float, max_iter: int = GD_MAX_ITER, tol: float = GD_TOL):
        self.C = float(C)
        self.max_iter = int(max_iter)
        self.tol = float(tol)
        self.w_ = None  # (d + 1,), intercept last

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LogisticRegressor":
        n = X.shape[0]
        Xb = np.hstack([X, np.ones((n, 1))])
        w = np.zeros(Xb.shape[1])
        reg = 1.0 / (self.C * n)
        step = _lipschitz_step(Xb, 0.25, reg)
        for _ in range(self.max_iter):
            p = expit(Xb @ w)
            grad = Xb.T @ (p - y) / n
            grad[:-1] += reg * w[:-1]
            if np.linalg.norm(grad) <= self.tol:
                break
            w = w - step * grad
        self.w_ = w
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        return expit(X @ self.w_[:-1] + self.w_[-1])


class SoftmaxClassifier:
    """Multinomial logistic regression over a discrete action set."""

    def __init__(
        self,
        n_classes: int,
        C: float,
        max_iter: int = GD_MAX_ITER,
        tol: float = GD_TOL,
    ):
        self.n_classes = int(n_classes)
        self.C = float(C)
        self.max_iter = int(max_iter)
        self.tol = float(tol)
        self.W_ = None  # (d + 1, n_classes), intercept row last

    def fit(self, X: np.ndarray, y: np.ndarray) -> "SoftmaxClassifier":
        n = X.shape[0]
        Xb = np.hstack([X, np.ones((n, 1))])
        W = np.zeros((Xb.shape[1], self.n_classes))
        onehot = np.zeros((n, self.n_classes))
        onehot[np.arange(n), y] = 1.0
        reg = 1.0 / (self.C * n)
        step = _lipschitz_step(Xb, 0.5, reg)
        for _ in range(self.max_iter):
            probs = _softmax(Xb @ W)
            grad = Xb.T @ (probs - onehot) / n
            grad[:-1] += reg * W[:-1]
            if np.linalg.norm(grad) <= self.tol:
                break
            W = W - step * grad
        self.W_ = W
        return self

    def predict_dist(self, X: np.ndarray) -> np.ndarray:
        Xb = np.hstack([X, np.ones((X.shape[0], 1))])
        return _softmax(Xb @ self.W_)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Gradient-boosted trees on binned features
# ---------------------------------------------------------------------------


class _BinnedTree:
    """One depth-limited regression tree over pre-binned features."""

    __slots__ = ("feature", "thresh_bin", "left", "right", "value", "depth")

    def __init__(self, feature, thresh_bin, left, right, value, depth):
        self.feature = feature
        self.thresh_bin = thresh_bin
        self.left = left
        self.right = right
        self.value = value
        self.depth = depth

    def predict(self, bins: np.ndarray) -> np.ndarray:
        idx = np.zeros(bins.shape[0], dtype=np.int64)
        for _ in range(self.depth):
            f = self.feature[idx]
            internal = f >= 0
            if not internal.any():
                break
            b = bins[np.arange(bins.shape[0]), np.where(internal, f, 0)]
            go_left = internal & (b <= self.thresh_bin[idx])
            idx = np.where(
                go_left, self.left[idx], np.where(internal, self.right[idx], idx)
            )
        return self.value[idx]


def _fit_binned_tree(
    bins: np.ndarray,
    grad: np.ndarray,
    n_bins: int,
    max_depth: int,
    min_samples_leaf: int,
) -> _BinnedTree:
    n, n_features = bins.shape
    feature = [-1]
    thresh_bin = [-1]
    left = [-1]
    right = [-1]
    value = [float(grad.mean())]
    node_of_row = np.zeros(n, dtype=np.int64)
    frontier = np.array([0], dtype=np.int64)

    for _ in range(max_depth):
        if frontier.size == 0:
            break
        m = frontier.size
        slot_of_node = np.full(len(feature), -1, dtype=np.int64)
        slot_of_node[frontier] = np.arange(m)
        row_slot = slot_of_node[node_of_row]
        active = row_slot >= 0

        best_gain = np.zeros(m)
        best_feat = np.full(m, -1)
        best_bin = np.full(m, -1)
        flat_slot = row_slot[active]
        g_active = grad[active]
        totals = np.bincount(flat_slot, weights=g_active, minlength=m)
        counts = np.bincount(flat_slot, minlength=m)
        for j in range(n_features):
            key = flat_slot * n_bins + bins[active, j]
            hist_g = np.bincount(key, weights=g_active, minlength=m * n_bins)
            hist_c = np.bincount(key, minlength=m * n_bins)
            hist_g = hist_g.reshape(m, n_bins)
            hist_c = hist_c.reshape(m, n_bins)
            left_g = np.cumsum(hist_g, axis=1)[:, :-1]
            left_c = np.cumsum(hist_c, axis=1)[:, :-1]
            right_g = totals[:, None] - left_g
            right_c = counts[:, None] - left_c
            ok = (left_c >= min_samples_leaf) & (right_c >= min_samples_leaf)
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = (
                    left_g**2 / left_c
                    + right_g**2 / right_c
                    - (totals[:, None] ** 2) / counts[:, None]
                )
            gain = np.where(ok, gain, -np.inf)
            cand_bin = gain.argmax(axis=1)
            cand_gain = gain[np.arange(m), cand_bin]
            better = cand_gain > best_gain + 1e-12
            best_gain = np.where(better, cand_gain, best_gain)
            best_feat = np.where(better, j, best_feat)
            best_bin = np.where(better, cand_bin, best_bin)

        splitting = np.where(best_feat >= 0)[0]
        if splitting.size == 0:
            break
        first_child = len(feature)
        child_left = np.full(m, -1, dtype=np.int64)
        child_right = np.full(m, -1, dtype=np.int64)
        for pos, i in enumerate(splitting):
            node = int(frontier[i])
            li = first_child + 2 * pos
            child_left[i] = li
            child_right[i] = li + 1
            feature[node] = int(best_feat[i])
            thresh_bin[node] = int(best_bin[i])
            left[node] = li
            right[node] = li + 1
            feature.extend((-1, -1))
            thresh_bin.extend((-1, -1))
            left.extend((-1, -1))
            right.extend((-1, -1))
            value.extend((0.0, 0.0))

        # Vectorized reassignment of rows in splitting nodes to their children.
        row_splits = active & (best_feat[np.clip(row_slot, 0, None)] >= 0) & (
            row_slot >= 0
        )
        slot = np.clip(row_slot, 0, None)
        feat_of_row = np.clip(best_feat[slot], 0, None)
        go_left = (
            bins[np.arange(n), feat_of_row] <= best_bin[slot]
        )
        new_nodes = np.where(go_left, child_left[slot], child_right[slot])
        node_of_row = np.where(row_splits, new_nodes, node_of_row)

        sums = np.bincount(node_of_row, weights=grad, minlength=len(feature))
        cnts = np.bincount(node_of_row, minlength=len(feature))
        for pos, i in enumerate(splitting):
            li = first_child + 2 * pos
            value[li] = float(sums[li] / cnts[li])
            value[li + 1] = float(sums[li + 1] / cnts[li + 1])

        frontier = np.concatenate([child_left[splitting], child_right[splitting]])

    return _BinnedTree(
        np.asarray(feature),
        np.asarray(thresh_bin),
        np.asarray(left),
        np.asarray(right),
        np.asarray(value),
        max_depth,
    )


class GradientBoostedTrees:
    """Squared-loss boosting of depth-limited trees on quantile-binned features."""

    def __init__(
        self,
        learning_rate: float,
        max_depth: int,
        min_samples_leaf: int,
        n_rounds: int = 100,
        n_bins: int = 32,
    ):
        self.learning_rate = float(learning_rate)
        self.max_depth = int(max_depth)
        self.min_samples_leaf = int(min_samples_leaf)
        self.n_rounds = int(n_rounds)
        self.n_bins = int(n_bins)
        self.edges_ = None
        self.trees_ = None
        self.base_ = 0.0

    def _bin(self, X: np.ndarray) -> np.ndarray:
        cols = [
            np.searchsorted(self.edges_[j], X[:, j], side="right")
            for j in range(X.shape[1])
        ]
        return np.stack(cols, axis=1)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GradientBoostedTrees":
        qs = np.linspace(0.0, 1.0, self.n_bins + 1)[1:-1]
        self.edges_ = [np.unique(np.quantile(X[:, j], qs)) for j in range(X.shape[1])]
        bins = self._bin(X)
        self.base_ = float(y.mean())
        pred = np.full(X.shape[0], self.base_)
        self.trees_ = []
        for _ in range(self.n_rounds):
            resid = y - pred
            tree = _fit_binned_tree(
                bins, resid, self.n_bins, self.max_depth, self.min_samples_leaf
            )
            self.trees_.append(tree)
            pred = pred + self.learning_rate * tree.predict(bins)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        bins = self._bin(X)
        out = np.full(X.shape[0], self.base_)
        for tree in self.trees_:
            out = out + self.learning_rate * tree.predict(bins)
        return out


# ---------------------------------------------------------------------------
# Reward models over (context, action) pairs
# ---------------------------------------------------------------------------


def _reward_features(
    contexts: np.ndarray, actions: np.ndarray, n_actions: int
) -> np.ndarray:
    onehot = np.zeros((contexts.shape[0], n_actions))
    onehot[np.arange(contexts.shape[0]), actions] = 1.0
    return np.hstack([contexts, onehot])


@dataclass
class FittedRewardModel:
    """A fitted mean-reward predictor over (context, action) pairs."""

    inner: object
    n_actions: int
    dim_context: int
    family: str

    def predict(self, contexts: np.ndarray, actions: np.ndarray) -> np.ndarray:
        if contexts.shape[1] != self.dim_context:
            raise DataError(
                f"context dim {contexts.shape[1]} != fitted dim {self.dim_context}"
            )
        return self.inner.predict(
            _reward_features(contexts, actions, self.n_actions)
        )

    def predict_matrix(self, contexts: np.ndarray) -> np.ndarray:
        """Predicted reward for every action at each context: (n, n_actions)."""
        n = contexts.shape[0]
        out = np.empty((n, self.n_actions))
        for a in range(self.n_actions):
            out[:, a] = self.predict(contexts, np.full(n, a, dtype=int))
        return out


def _build_learner(spec: ModelSpec):
    hp = dict(spec.hyperparams)
    if spec.family == RIDGE:
        return RidgeRegressor(alpha=hp.get("alpha", 1.0))
    if spec.family == LOGISTIC:
        return LogisticRegressor(
            C=hp.get("C", 1.0),
            max_iter=int(hp.get("max_iter", GD_MAX_ITER)),
        )
    return GradientBoostedTrees(
        learning_rate=hp.get("learning_rate", 0.1),
        max_depth=int(hp.get("max_depth", 2)),
        min_samples_leaf=int(hp.get("min_samples_leaf", 5)),
        n_rounds=int(hp.get("n_rounds", 100)),
        n_bins=int(hp.get("n_bins", 32)),
    )


def fit_reward_model(
    spec: ModelSpec, fb: LoggedBanditFeedback, row_subset: np.ndarray
) -> FittedRewardModel:
    """Fit the specified family on (context, one-hot action) -> reward pairs."""
    rows = np.asarray(row_subset)
    if rows.size == 0:
        raise DataError("cannot fit a reward model on an empty row subset")
    X = _reward_features(fb.contexts[rows], fb.actions[rows], fb.n_actions)
    y = fb.rewards[rows]
    learner = _build_learner(spec).fit(X, y)
    return FittedRewardModel(
        inner=learner,
        n_actions=fb.n_actions,
        dim_context=fb.dim_context,
        family=spec.family,
    )


def predict_reward_matrix(
    model: FittedRewardModel, fb: LoggedBanditFeedback, row_subset: np.ndarray
) -> np.ndarray:
    """Predictions for every (row in subset, action): shape (len(subset), n_actions)."""
    if model.n_actions != fb.n_actions:
        raise DataError(
            f"model fitted for {model.n_actions} actions, feedback has {fb.n_actions}"
        )
    return model.predict_matrix(fb.contexts[np.asarray(row_subset)])


def cross_fit_reward_matrices(
    spec: ModelSpec,
    fb: LoggedBanditFeedback,
    k_folds: int,
    seed: int,
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Fold-wise reward predictions from models fit on each fold's complement.

    Rows are shuffled by `seed` and split into `k_folds` equal folds; when the
    row count is not a multiple of the fold count, the trailing remainder of
    the shuffle is dropped so every fold carries identical weight. With one
    fold, the model is fit and evaluated on all rows, in their natural order.
    """
    n = fb.n_rounds
    if k_folds < 1:
        raise ValueError(f"k_folds must be >= 1, got {k_folds}")
    if k_folds > n:
        raise DataError(f"cannot split {n} rows into {k_folds} folds")
    if k_folds == 1:
        all_rows = np.arange(n)
        model = fit_reward_model(spec, fb, all_rows)
        return [(all_rows, predict_reward_matrix(model, fb, all_rows))]

    rng = np.random.default_rng(seed)
    order = rng.permutation(n)[: (n // k_folds) * k_folds]
    folds = [np.sort(chunk) for chunk in np.split(order, k_folds)]
    out = []
    for k, fold in enumerate(folds):
        train = np.sort(np.concatenate([f for j, f in enumerate(folds) if j != k]))
        model = fit_reward_model(spec, fb, train)
        out.append((fold, predict_reward_matrix(model, fb, fold)))
    return out


# ---------------------------------------------------------------------------
# Behavior-policy models
# ---------------------------------------------------------------------------


class FittedPolicyModel:
    """Interface: predict_dist(contexts) -> row-stochastic (n, n_actions)."""

    def predict_dist(self, contexts: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass
class _SoftmaxPolicy(FittedPolicyModel):
    clf: SoftmaxClassifier

    def predict_dist(self, contexts):
        return self.clf.predict_dist(contexts)


@dataclass
class _OneVsRestPolicy(FittedPolicyModel):
    """Per-action regressors on action indicators, normalized to a distribution.

    Scores are clipped below at zero before normalizing, so an overfit model
    can emit exactly zero probability on unobserved actions.
    """

    models: List[GradientBoostedTrees]

    def predict_dist(self, contexts):
        scores = np.stack([m.predict(contexts) for m in self.models], axis=1)
        scores = np.clip(scores, 0.0, None)
        sums = scores.sum(axis=1, keepdims=True)
        uniform = np.full_like(scores, 1.0 / scores.shape[1])
        return np.where(sums > 0, scores / np.where(sums > 0, sums, 1.0), uniform)


@dataclass
class _DegeneratePolicy(FittedPolicyModel):
    """Single observed action: nearly all mass there, a sliver spread uniformly."""

    action: int
    n_actions: int
    epsilon: float = 1e-6

    def predict_dist(self, contexts):
        n = contexts.shape[0]
        out = np.full((n, self.n_actions), 0.0)
        if self.n_actions == 1:
            out[:, self.action] = 1.0
            return out
        out[:] = self.epsilon / (self.n_actions - 1)
        out[:, self.action] = 1.0 - self.epsilon
        return out


@dataclass
class _TemperatureScaledPolicy(FittedPolicyModel):
    base: FittedPolicyModel
    temperature: float

    def predict_dist(self, contexts):
        p = np.clip(self.base.predict_dist(contexts), 1e-300, None)
        scaled = p ** (1.0 / self.temperature)
        return scaled / scaled.sum(axis=1, keepdims=True)


def _fit_temperature(dist: np.ndarray, actions: np.ndarray) -> float:
    def nll(log_t: float) -> float:
        t = math.exp(log_t)
        scaled = np.clip(dist, 1e-300, None) ** (1.0 / t)
        probs = scaled / scaled.sum(axis=1, keepdims=True)
        chosen = probs[np.arange(actions.shape[0]), actions]
        return -float(np.mean(np.log(np.clip(chosen, 1e-12, None))))

    res = minimize_scalar(
        nll, bounds=(math.log(0.05), math.log(20.0)), method="bounded"
    )
    return float(math.exp(res.x))


def fit_behavior_policy(
    spec: ModelSpec,
    fb: LoggedBanditFeedback,
    calibration: Optional[str] = None,
    holdout_fraction: float = 0.5,
    seed: int = 0,
) -> FittedPolicyModel:
    """Fit a distribution-valued classifier of logged actions given contexts.

    `calibration="temperature"` holds out a seeded fraction of rows, fits the
    base model on the rest, and picks the single temperature minimizing the
    holdout negative log-likelihood. Data containing only one action yields a
    degenerate model (with a warning) rather than an error.
    """
    observed = np.unique(fb.actions)
    if observed.size == 1:
        warnings.warn(
            f"only action {int(observed[0])} observed; behavior model is degenerate"
        )
        return _DegeneratePolicy(action=int(observed[0]), n_actions=fb.n_actions)
    if fb.n_rounds < 2 * fb.n_actions:
        warnings.warn(
            f"{fb.n_rounds} rounds for {fb.n_actions} actions; behavior fit "
            "may be unreliable"
        )

    fit_rows = np.arange(fb.n_rounds)
    holdout_rows = None
    if calibration == "temperature":
        rng = np.random.default_rng(seed)
        order = rng.permutation(fb.n_rounds)
        n_holdout = max(1, int(round(holdout_fraction * fb.n_rounds)))
        holdout_rows = np.sort(order[:n_holdout])
        fit_rows = np.sort(order[n_holdout:])
        if fit_rows.size == 0 or np.unique(fb.actions[fit_rows]).size == 1:
            # Calibration split degenerated; fall back to an uncalibrated fit.
            fit_rows = np.arange(fb.n_rounds)
            holdout_rows = None

    base = _fit_policy_family(spec, fb.contexts[fit_rows], fb.actions[fit_rows],
                              fb.n_actions)
    if holdout_rows is None:
        return base
    dist = base.predict_dist(fb.contexts[holdout_rows])
    t = _fit_temperature(dist, fb.actions[holdout_rows])
    return _TemperatureScaledPolicy(base=base, temperature=t)


def _fit_policy_family(
    spec: ModelSpec, contexts: np.ndarray, actions: np.ndarray, n_actions: int
) -> FittedPolicyModel:
    hp = dict(spec.hyperparams)
    if spec.family in (LOGISTIC, RIDGE):
        clf = SoftmaxClassifier(
            n_classes=n_actions,
            C=hp.get("C", 1.0),
            max_iter=int(hp.get("max_iter", GD_MAX_ITER)),
        )
        clf.fit(contexts, actions)
        return _SoftmaxPolicy(clf=clf)
    models = []
    for a in range(n_actions):
        m = GradientBoostedTrees(
            learning_rate=hp.get("learning_rate", 0.1),
            max_depth=int(hp.get("max_depth", 2)),
            min_samples_leaf=int(hp.get("min_samples_leaf", 5)),
            n_rounds=int(hp.get("n_rounds", 100)),
            n_bins=int(hp.get("n_bins", 32)),
        )
        m.fit(contexts, (actions == a).astype(float))
        models.append(m)
    return _OneVsRestPolicy(models=models)


def floored_propensities(
    dist: np.ndarray, actions: np.ndarray, floor: float = PROPENSITY_FLOOR
) -> np.ndarray:
    """Estimated choice probabilities at logged actions, floored away from zero.

    Flooring keeps downstream importance weights finite; engagement is logged
    because it signals an overconfident behavior model.
    """
    props = dist[np.arange(actions.shape[0]), actions]
    n_floored = int(np.sum(props < floor))
    if n_floored:
        logger.info(
            "floored %d of %d estimated propensities below %.1e",
            n_floored, props.shape[0], floor,
        )
    return np.maximum(props, floor)


# ---------------------------------------------------------------------------
# Randomized hyperparameter search
# ---------------------------------------------------------------------------


def random_search(
    space: HyperparamSpace,
    family: str,
    fb: LoggedBanditFeedback,
    n_iter: int,
    seed: int,
) -> ModelSpec:
    """Sample `n_iter` specs and return the one with the best 2-fold CV loss.

    Loss is the log loss for the logistic family and squared error otherwise,
    evaluated on reward prediction from (context, action) features.
    """
    if n_iter < 1:
        raise ValueError(f"n_iter must be >= 1, got {n_iter}")
    if not space:
        raise ValueError("empty hyperparameter space")
    rng = np.random.default_rng(seed)
    candidates = [sample_model_spec(family, space, rng) for _ in range(n_iter)]

    n = fb.n_rounds
    order = rng.permutation(n)
    halves = (np.sort(order[: n // 2]), np.sort(order[n // 2 :]))

    best_spec, best_loss = None, math.inf
    for spec in candidates:
        losses = []
        for train, test in (halves, halves[::-1]):
            model = fit_reward_model(spec, fb, train)
            pred = model.predict(fb.contexts[test], fb.actions[test])
            truth = fb.rewards[test]
            if family == LOGISTIC:
                p = np.clip(pred, 1e-12, 1 - 1e-12)
                losses.append(
                    -float(np.mean(truth * np.log(p) + (1 - truth) * np.log(1 - p)))
                )
            else:
                losses.append(float(np.mean((pred - truth) ** 2)))
        loss = float(np.mean(losses))
        if loss < best_loss:
            best_loss = loss
            best_spec = spec
    return best_spec
