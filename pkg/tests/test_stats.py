import numpy as np
import pytest
from scipy import stats

from supplyshock.stats import midranks, wilcoxon_rank_sum

from oracles import brute_force_rank_sum_p


def test_identical_samples():
    assert wilcoxon_rank_sum([1, 2, 3, 4], [1, 2, 3, 4]) == 1.0
    assert wilcoxon_rank_sum([5, 5, 5], [5, 5, 5, 5]) == 1.0


def test_fully_separated_exact():
    assert wilcoxon_rank_sum([1, 2, 3], [10, 11, 12]) == pytest.approx(0.1)


def test_needs_three_each():
    with pytest.raises(ValueError):
        wilcoxon_rank_sum([1, 2], [3, 4, 5])


def test_midranks():
    assert midranks([3, 1, 3, 2]).tolist() == [3.5, 1.0, 3.5, 2.0]


def test_exact_matches_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(3, 10))
        m = int(rng.integers(3, 13 - n))  # n + m <= 12
        # small integer support forces frequent ties
        a = rng.integers(0, 6, n).astype(float)
        b = rng.integers(0, 6, m).astype(float)
        if np.all(np.concatenate([a, b]) == a[0]):
            continue
        assert wilcoxon_rank_sum(a, b) == pytest.approx(brute_force_rank_sum_p(a, b), abs=1e-12)


def test_untied_exact_matches_scipy():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a, b = rng.normal(size=7), rng.normal(0.5, size=9)
        ref = stats.mannwhitneyu(a, b, alternative="two-sided", method="exact").pvalue
        assert wilcoxon_rank_sum(a, b) == pytest.approx(ref, rel=1e-9)


def test_asymptotic_matches_scipy_with_ties():
    rng = np.random.default_rng(2)
    for _ in range(50):
        a = rng.integers(0, 20, 30).astype(float)
        b = rng.integers(2, 22, 25).astype(float)
        ref = stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True).pvalue
        assert wilcoxon_rank_sum(a, b) == pytest.approx(ref, rel=1e-9)


def test_null_p_values_rarely_tiny():
    small = 0
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        p = wilcoxon_rank_sum(rng.normal(size=50), rng.normal(size=50))
        assert 0.0 <= p <= 1.0
        small += p <= 0.001
    assert small <= 1
