import numpy as np
import pytest

from opebench.feedback import (
    ActionDistribution,
    LoggedBanditFeedback,
    compute_importance_weights,
)


def make_feedback(
    n=2,
    n_actions=2,
    rewards=None,
    actions=None,
    propensities=None,
    r_max=1.0,
    dim=1,
    seed=0,
):
    rng = np.random.default_rng(seed)
    return LoggedBanditFeedback(
        contexts=rng.normal(size=(n, dim)),
        actions=np.asarray(actions if actions is not None else np.arange(n) % n_actions),
        rewards=np.asarray(
            rewards if rewards is not None else rng.uniform(0, r_max, size=n),
            dtype=float,
        ),
        n_actions=n_actions,
        r_max=r_max,
        propensities=None if propensities is None else np.asarray(propensities, dtype=float),
    )


def random_case(rng, n_max=50, n_actions_max=5):
    """A random consistent (feedback, eval_dist, weights, q) quadruple."""
    n = int(rng.integers(1, n_max + 1))
    n_actions = int(rng.integers(2, n_actions_max + 1))
    fb = LoggedBanditFeedback(
        contexts=rng.normal(size=(n, 2)),
        actions=rng.integers(n_actions, size=n),
        rewards=rng.uniform(0, 1, size=n),
        n_actions=n_actions,
        r_max=1.0,
        propensities=rng.uniform(0.1, 1.0, size=n),
    )
    probs = rng.uniform(0.01, 1.0, size=(n, n_actions))
    dist = ActionDistribution(probs / probs.sum(axis=1, keepdims=True))
    weights = compute_importance_weights(dist, fb)
    q = rng.normal(size=(n, n_actions))
    return fb, dist, weights, q


@pytest.fixture
def two_round_case():
    """The hand-checkable two-round dataset used across estimator tests."""
    fb = make_feedback(
        rewards=[1.0, 0.0], actions=[0, 1], propensities=[0.5, 0.5]
    )
    dist = ActionDistribution(np.array([[0.8, 0.2], [0.8, 0.2]]))
    weights = compute_importance_weights(dist, fb)
    return fb, dist, weights
