"""Evaluation statistics: two-sample KS, RMMSE, moments and limiting variances."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import EmptySample, SampleTooSmall, ShapeMismatch

__all__ = [
    "CellSummary",
    "KsResult",
    "empirical_moments",
    "estimation_variance_limit_tilde",
    "ks_two_sample",
    "process_variance_limit",
    "rmmse",
]

KS_TERM_TOL = 1e-12
KS_MIN_TERMS = 25


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n1: int
    n2: int

    def rejects(self, level: float = 0.05) -> bool:
        return self.p_value < level


def _kolmogorov_sf(lam: float) -> float:
    """``2 * sum_k (-1)^(k-1) exp(-2 k^2 lam^2)``, clipped to [0, 1].

    For small ``lam`` the alternating series needs ~1/lam terms, so the
    equivalent Jacobi-theta form of the CDF is used there instead.
    """
    if lam <= 0:
        return 1.0
    if lam < 0.5:
        # 1 - sqrt(2 pi)/lam * sum_k exp(-(2k-1)^2 pi^2 / (8 lam^2)); three terms reach 1e-60
        ks = np.arange(1, 4)
        cdf = math.sqrt(2 * math.pi) / lam * float(np.sum(np.exp(-((2 * ks - 1) ** 2) * math.pi**2 / (8 * lam * lam))))
        return min(max(1.0 - cdf, 0.0), 1.0)
    total = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += term if k % 2 else -term
        if k >= KS_MIN_TERMS and term < KS_TERM_TOL:
            break
        k += 1
    return min(max(2.0 * total, 0.0), 1.0)


def ks_two_sample(x, y) -> KsResult:
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    x = np.sort(np.asarray(x, dtype=float).ravel())
    y = np.sort(np.asarray(y, dtype=float).ravel())
    n1, n2 = x.size, y.size
    if n1 == 0 or n2 == 0:
        raise EmptySample("both samples must be non-empty")
    # evaluate both ECDFs right after every jump point
    pts = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, pts, side="right") / n1
    cdf_y = np.searchsorted(y, pts, side="right") / n2
    d = float(np.max(np.abs(cdf_x - cdf_y)))
    lam = d * math.sqrt(n1 * n2 / (n1 + n2))
    p = _kolmogorov_sf(lam)
    return KsResult(statistic=d, p_value=p, n1=n1, n2=n2)


def rmmse(boot_roots, oracle_roots) -> float:
    """Root of the mean over simulations of the mean squared gap between order statistics.

    Both inputs are ``(M, B)``; each row is sorted before comparison.
    """
    b = np.atleast_2d(np.asarray(boot_roots, dtype=float))
    o = np.atleast_2d(np.asarray(oracle_roots, dtype=float))
    if b.shape != o.shape or b.size == 0:
        raise ShapeMismatch(f"shapes differ or are empty: {b.shape} vs {o.shape}")
    diff = np.sort(b, axis=1) - np.sort(o, axis=1)
    return float(np.sqrt(np.mean(np.mean(diff**2, axis=1))))


def _by_dev(diag, f, sigma2):
    c = np.asarray(diag, dtype=float)[::-1]  # entry i now sits at development period i
    f = np.asarray(f, dtype=float)
    s2 = np.asarray(sigma2, dtype=float)
    if f.shape != s2.shape or f.ndim != 1 or f.size < c.size - 1:
        raise ShapeMismatch("f and sigma2 must be equal-length vectors covering the triangle columns")
    return c, f, s2


def process_variance_limit(diag, f, sigma2) -> float:
    """Conditional variance of the process part given the diagonal.

    ``diag`` is in accident-year order (entry ``a`` is the latest claim of row
    ``a``), so its last entry is at development period 0. With ``C_i`` the
    diagonal claim at development period ``i`` and ``J = len(f) - 1``::

        sum_i C_i sum_{j=i}^{J} prod_{k=i}^{j-1} f_k * sigma2_j * prod_{l=j+1}^{J} f_l^2
    """
    c, f, s2 = _by_dev(diag, f, sigma2)
    J = f.size
    # tail_sq[j] = prod_{l >= j} f_l^2, with tail_sq[J] = 1
    tail_sq = np.append(np.cumprod((f**2)[::-1])[::-1], 1.0)
    total = 0.0
    for i, ci in enumerate(c):
        head = 1.0
        acc = 0.0
        for j in range(i, J):
            acc += head * s2[j] * tail_sq[j + 1]
            head *= f[j]
        total += ci * acc
    return float(total)


def estimation_variance_limit_tilde(diag, f, sigma2, mu0) -> float:
    """Limiting variance of the scaled estimation part mimicked by the original bootstrap.

    Same ``diag`` convention as :func:`process_variance_limit`. With
    ``mu_j = mu0 * prod_{k<j} f_k``::

        sum_{i1,i2} C_i1 C_i2 sum_{j >= max} sigma2_j / mu_j
            * prod_{l >= max, l != j} f_l^2 * prod_{m=min}^{max-1} f_m
    """
    c, f, s2 = _by_dev(diag, f, sigma2)
    J = f.size
    mu = float(mu0) * np.concatenate([[1.0], np.cumprod(f)[:-1]]) if J else np.empty(0)
    tail_sq = np.append(np.cumprod((f**2)[::-1])[::-1], 1.0)
    # inner[k] = sum_{j >= k} sigma2_j / mu_j * prod_{l >= k, l != j} f_l^2
    inner = np.zeros(c.size)
    for k in range(min(c.size, J)):
        j = np.arange(k, J)
        inner[k] = np.sum(s2[j] / mu[j] * tail_sq[k] / f[j] ** 2)
    # head[k] = prod_{m < k} f_m, so prod_{m=lo}^{hi-1} f_m = head[hi] / head[lo]
    head = np.concatenate([[1.0], np.cumprod(f)])
    total = 0.0
    for i1 in range(c.size):
        for i2 in range(c.size):
            lo, hi = min(i1, i2), max(i1, i2)
            if hi >= J:
                continue
            total += c[i1] * c[i2] * inner[hi] * (head[hi] / head[lo])
    return float(total)


def empirical_moments(sample) -> dict:
    """Mean, population variance, skewness and excess kurtosis.

    Kurtosis needs at least 4 observations and is NaN below that; skewness
    and kurtosis are NaN for a constant sample.
    """
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 2:
        raise SampleTooSmall(f"need at least 2 observations, got {x.size}")
    mean = float(x.mean())
    dev = x - mean
    var = float(np.mean(dev**2))
    out = {"mean": mean, "variance": var, "skewness": float("nan"), "excess_kurtosis": float("nan")}
    if var > 0:
        out["skewness"] = float(np.mean(dev**3) / var**1.5)
    if x.size >= 4 and var > 0:
        out["excess_kurtosis"] = float(np.mean(dev**4) / var**2 - 3.0)
    return out


@dataclass(frozen=True)
class CellSummary:
    """Aggregated metrics of one (setup, true family, chosen family, n, method) cell."""

    setup: str
    true_family: str
    chosen_family: str
    n: int
    method: str
    M: int
    ks_fail_rate: float
    rmmse: float
    var_mean: float
    part2_var_mean: float
    part1_var_mean: float
    ks_part1_fail_rate: float
    oracle_var_mean: float
    skewness_mean: float
    kurtosis_mean: float
    coverage: float

    FIELDS = (
        "setup", "true_family", "chosen_family", "n", "method", "ks_fail_rate", "rmmse",
        "var_mean", "part2_var_mean", "part1_var_mean", "ks_part1_fail_rate",
        "oracle_var_mean", "skewness_mean", "kurtosis_mean", "coverage", "M",
    )

    def row(self) -> list[str]:
        d = asdict(self)
        return [repr(d[k]) if isinstance(d[k], float) else str(d[k]) for k in self.FIELDS]
