import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from mack_reserve import (
    empirical_moments,
    estimation_variance_limit_tilde,
    ks_two_sample,
    process_variance_limit,
    rmmse,
)
from mack_reserve.evaluation import _kolmogorov_sf
from mack_reserve.exceptions import EmptySample, SampleTooSmall, ShapeMismatch


def test_ks_examples():
    same = ks_two_sample([1, 2, 3], [1, 2, 3])
    assert same.statistic == 0 and same.p_value == 1
    assert ks_two_sample([1, 2, 3], [4, 5, 6]).statistic == 1
    assert ks_two_sample([1, 2], [1.5, 2.5]).statistic == 0.5


def test_ks_with_ties():
    assert ks_two_sample([1, 1, 2, 2], [1, 2]).statistic == 0


def test_ks_empty():
    with pytest.raises(EmptySample):
        ks_two_sample([], [1.0])


@pytest.mark.parametrize("lam", [0.05, 0.3, 0.49, 0.5, 0.8, 1.0, 1.36, 2.0, 4.0, 8.0])
def test_kolmogorov_tail_against_scipy(lam):
    assert _kolmogorov_sf(lam) == pytest.approx(special.kolmogorov(lam), abs=1e-14)


def test_ks_p_decreases_in_statistic():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(300)
    ps = [ks_two_sample(x, x + s).p_value for s in (0.0, 0.1, 0.2, 0.4, 0.8)]
    assert all(a >= b for a, b in zip(ps, ps[1:]))


samples = st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=40)


@settings(max_examples=80, deadline=None)
@given(samples, samples)
def test_ks_symmetry(x, y):
    a, b = ks_two_sample(x, y), ks_two_sample(y, x)
    assert (a.statistic, a.p_value) == (b.statistic, b.p_value)
    assert 0 <= a.statistic <= 1 and 0 <= a.p_value <= 1


def test_rmmse_examples():
    assert rmmse([[0, 0]], [[3, 4]]) == pytest.approx(np.sqrt(12.5))
    x = np.random.default_rng(0).standard_normal((3, 20))
    assert rmmse(x, x) == 0
    assert rmmse(x[:, ::-1], x) == 0


def test_rmmse_shape():
    with pytest.raises(ShapeMismatch):
        rmmse(np.zeros((2, 3)), np.zeros((2, 4)))


F = (1.5, 1.2)
S2 = (0.5, 0.2)


def test_process_variance_limit():
    assert process_variance_limit([180, 176, 120], F, S2) == pytest.approx(157.6)
    assert process_variance_limit([180, 176, 120], F, (0, 0)) == 0
    assert process_variance_limit([360, 352, 240], F, S2) == pytest.approx(2 * 157.6)


def test_process_variance_limit_shape():
    with pytest.raises(ShapeMismatch):
        process_variance_limit([180, 176, 120], (1.5,), (0.5,))


def _xi_tilde_bruteforce(diag, f, s2, mu0):
    # development order: c[i] is the diagonal claim with i development periods observed
    c = np.asarray(diag, dtype=float)[::-1]
    J = len(f)
    mu = mu0 * np.concatenate([[1.0], np.cumprod(f)])
    total = 0.0
    for i1 in range(len(c)):
        for i2 in range(len(c)):
            lo, hi = min(i1, i2), max(i1, i2)
            inner = 0.0
            for j in range(hi, J):
                term = s2[j] / mu[j]
                for l in range(hi, J):
                    if l != j:
                        term *= f[l] ** 2
                for k in range(lo, hi):
                    term *= f[k]
                inner += term
            total += c[i1] * c[i2] * inner
    return total


def test_estimation_variance_limit():
    assert estimation_variance_limit_tilde([180, 176, 120], F, (0, 0), 100.0) == 0
    assert estimation_variance_limit_tilde([7.0], (1.3,), (0.4,), 5.0) == pytest.approx(49 * 0.4 / 5)
    rng = np.random.default_rng(3)
    for _ in range(5):
        A = int(rng.integers(2, 8))
        diag = rng.uniform(50, 150, A)
        f = rng.uniform(1.0, 1.6, A - 1)
        s2 = rng.uniform(0, 2, A - 1)
        got = estimation_variance_limit_tilde(diag, f, s2, 80.0)
        assert got == pytest.approx(_xi_tilde_bruteforce(diag, f, s2, 80.0), rel=1e-12)


def test_estimation_variance_limit_symmetry():
    # the double sum is symmetric in (i1, i2), so a two-entry diagonal can be summed either way
    d = [120.0, 150.0]
    got = estimation_variance_limit_tilde(d, (1.4,), (0.3,), 100.0)
    assert got == pytest.approx(_xi_tilde_bruteforce(d, (1.4,), (0.3,), 100.0), rel=1e-12)


def test_empirical_moments():
    m = empirical_moments([-1, 1])
    assert (m["mean"], m["variance"], m["skewness"]) == (0, 1, 0)
    assert np.isnan(m["excess_kurtosis"])
    m = empirical_moments([0, 0, 0, 3])
    assert m["mean"] == 0.75 and m["variance"] == pytest.approx(1.6875)
    x = np.random.default_rng(1).gamma(2.0, size=500)
    a, b = empirical_moments(x), empirical_moments(x + 1e3)
    for k in ("variance", "skewness", "excess_kurtosis"):
        assert a[k] == pytest.approx(b[k], rel=1e-6)
    with pytest.raises(SampleTooSmall):
        empirical_moments([1.0])


def test_moments_match_scipy():
    from scipy import stats

    x = np.random.default_rng(2).lognormal(size=1000)
    m = empirical_moments(x)
    assert m["skewness"] == pytest.approx(stats.skew(x), rel=1e-10)
    assert m["excess_kurtosis"] == pytest.approx(stats.kurtosis(x), rel=1e-10)
