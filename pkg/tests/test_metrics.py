import numpy as np
import pytest

from opebench.metrics import (
    au_cdf,
    cdf_step_points,
    cvar,
    empirical_cdf,
    mean_score,
    std_score,
)


def test_cdf_basic_queries():
    cdf = empirical_cdf([0.1, 0.2, 0.3, 0.4])
    assert cdf(0.25) == 0.5
    assert cdf(0.05) == 0.0
    assert cdf(0.4) == 1.0
    assert cdf(10.0) == 1.0


def test_cdf_ties_are_inclusive():
    cdf = empirical_cdf([1.0, 1.0, 2.0])
    assert cdf(1.0) == pytest.approx(2 / 3)


def test_cdf_monotone_right_continuous():
    rng = np.random.default_rng(0)
    z = rng.exponential(size=200)
    cdf = empirical_cdf(z)
    qs = np.sort(rng.uniform(0, z.max() * 1.2, size=500))
    vals = cdf(qs)
    assert np.all(np.diff(vals) >= 0)
    # right continuity: approaching a sample point from above keeps its value
    for zi in z[:20]:
        assert cdf(zi + 1e-12) >= cdf(zi)


def test_cdf_empty_rejected():
    with pytest.raises(ValueError, match="empty"):
        empirical_cdf([])


def test_au_cdf_hand_value():
    assert au_cdf([1.0, 3.0], 4.0) == 2.0
    assert au_cdf([5.0, 6.0], 4.0) == 0.0
    assert au_cdf([0.0, 0.0], 4.0) == 4.0


def test_au_cdf_matches_riemann_oracle():
    rng = np.random.default_rng(1)
    for _ in range(50):
        z = rng.exponential(scale=rng.uniform(0.1, 5), size=int(rng.integers(1, 60)))
        z_max = float(rng.uniform(0.5, 6))
        cdf = empirical_cdf(z)
        grid = np.linspace(0, z_max, 100_001)
        riemann = np.trapezoid(cdf(grid), grid)
        assert au_cdf(z, z_max) == pytest.approx(riemann, abs=1e-4 * z_max)


def test_au_cdf_rejects_bad_zmax():
    with pytest.raises(ValueError, match="z_max"):
        au_cdf([1.0], 0.0)


def test_cvar_hand_values():
    assert cvar([1, 2, 3, 4], 0.5) == 3.0
    assert cvar([1, 2, 3, 4], 0.0) == 2.5
    assert cvar([7, 7, 7], 0.3) == 7.0


def test_cvar_matches_bruteforce():
    rng = np.random.default_rng(2)
    for _ in range(200):
        z = rng.exponential(size=int(rng.integers(1, 50)))
        alpha = float(rng.uniform(0, 0.99))
        # brute force straight from the definition
        zs = np.sort(z)
        m = zs.size
        q = None
        for v in zs:
            if np.sum(zs <= v) / m >= alpha:
                q = v
                break
        expected = np.mean(zs[zs >= q])
        assert cvar(z, alpha) == expected


def test_cvar_monotone_in_alpha():
    rng = np.random.default_rng(3)
    z = rng.exponential(size=97)
    vals = [cvar(z, a) for a in np.linspace(0, 0.95, 40)]
    assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))


def test_cvar_alpha_range():
    with pytest.raises(ValueError, match="alpha"):
        cvar([1.0], 1.0)


def test_std_population_form():
    assert std_score([1, 1, 1]) == 0.0
    assert std_score([0, 2]) == 1.0


def test_std_homogeneity():
    rng = np.random.default_rng(4)
    z = rng.uniform(size=30)
    assert std_score(3.5 * z) == pytest.approx(3.5 * std_score(z), rel=1e-12)


def test_mean_score():
    assert mean_score([0, 0]) == 0.0
    assert mean_score([1, 3]) == 2.0
    rng = np.random.default_rng(5)
    z = rng.uniform(size=11)
    assert mean_score(z) == mean_score(z[::-1])


def test_infinite_samples_handled():
    z = [1.0, float("inf"), 2.0]
    assert mean_score(z) == float("inf")
    assert std_score(z) == float("inf")
    assert cvar(z, 0.5) == float("inf")
    assert au_cdf(z, 4.0) == pytest.approx((3 + 2 + 0) / 3)


def test_cdf_step_points_match_examples():
    zs, fs = cdf_step_points([1.0, 3.0], 4.0)
    assert list(zs) == [0.0, 1.0, 3.0, 4.0]
    assert list(fs) == [0.0, 0.5, 1.0, 1.0]
    # querying anywhere in [1, 3) gives 0.5 per the step structure
    cdf = empirical_cdf([1.0, 3.0])
    assert cdf(2.9999) == 0.5
