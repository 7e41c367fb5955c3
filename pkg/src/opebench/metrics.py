"""Distributional summaries of a sample of squared errors.

A benchmark run produces, per estimator, a multiset of squared errors. These
functions condense it: the empirical CDF, the area under that CDF up to a
cutoff (higher is better), the conditional value-at-risk of the worst tail
(lower is better), and the plain mean and standard deviation.
"""

from typing import Callable, Union

import numpy as np

ArrayLike = Union[np.ndarray, list, tuple]


def _as_sample(z: ArrayLike) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise ValueError("empty sample")
    return z.ravel()


def empirical_cdf(z: ArrayLike) -> Callable[[ArrayLike], np.ndarray]:
    """Right-continuous step function: fraction of sample values <= query."""
    zs = np.sort(_as_sample(z))
    m = zs.size

    def cdf(query):
        q = np.asarray(query, dtype=float)
        out = np.searchsorted(zs, q, side="right") / m
        return float(out) if np.isscalar(query) else out

    return cdf


def au_cdf(z: ArrayLike, z_max: float) -> float:
    """Exact area under the empirical CDF on ``[0, z_max]``.

    Each sample point z_i contributes the length of ``[z_i, z_max]`` clipped
    to the interval, divided by the sample size; values above `z_max`
    (including failures recorded as inf) contribute nothing. Computed as
    ``z_max - mean(min(z_i, z_max))`` so an all-zero sample scores exactly
    `z_max`.
    """
    if not z_max > 0:
        raise ValueError(f"z_max must be positive, got {z_max}")
    zs = _as_sample(z)
    return max(0.0, z_max - float(np.mean(np.clip(zs, 0.0, z_max))))


def cvar(z: ArrayLike, alpha: float) -> float:
    """Mean of the sample at or above its `alpha`-quantile.

    The quantile is the smallest sample value whose CDF reaches `alpha`, so
    ``alpha=0`` averages the whole sample and ``alpha=0.7`` averages the
    worst 30 percent of values (ties at the quantile are all included).
    """
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    zs = np.sort(_as_sample(z))
    m = zs.size
    cdf_vals = np.arange(1, m + 1) / m
    q = zs[int(np.argmax(cdf_vals >= alpha))]
    tail = zs[zs >= q]
    return float(np.mean(tail))


def cdf_step_points(z: ArrayLike, z_max: float) -> tuple[np.ndarray, np.ndarray]:
    """Knots of the empirical CDF restricted to ``[0, z_max]``.

    Returns matching arrays of query points and CDF values: the origin, every
    distinct sample value up to `z_max`, and `z_max` itself. Plotting these
    with a post-step interpolation reproduces the CDF exactly.
    """
    if not z_max > 0:
        raise ValueError(f"z_max must be positive, got {z_max}")
    cdf = empirical_cdf(z)
    zs = np.unique(_as_sample(z))
    knots = [0.0]
    knots.extend(float(v) for v in zs if 0.0 < v <= z_max)
    if knots[-1] != z_max:
        knots.append(z_max)
    knots_arr = np.asarray(knots)
    return knots_arr, cdf(knots_arr)


def std_score(z: ArrayLike) -> float:
    """Population standard deviation (second central moment, divided by m)."""
    zs = _as_sample(z)
    if np.any(np.isinf(zs)):
        # inf - inf in the centered moment would yield nan; the honest
        # summary of a sample containing a failure is an infinite spread.
        return float("inf")
    return float(np.std(zs))


def mean_score(z: ArrayLike) -> float:
    """Arithmetic mean of the sample; the empirical mean squared error."""
    return float(np.mean(_as_sample(z)))
