"""Mack-type bootstraps for the predictive distribution of the claims reserve.

Three schemes share one output type, :class:`BootstrapRun`:

``original``
    Fixed-design residual resampling of the upper triangle gives bootstrap
    factors ``f*``; the lower triangle is simulated forward from the observed
    diagonal with conditional means ``f*``. Roots are centered at the
    best estimate ``R_hat``.
``alternative``
    The upper triangle is regenerated *backwards* from the observed diagonal
    with backward factors of mean ``1/f_hat``; its chain-ladder factors ``f+``
    give a per-replication center ``R_hat+``. The lower triangle uses
    ``f_hat``.
``intermediate``
    As ``alternative`` but ``f+`` is replaced by ``f*`` from a fixed-design
    *parametric* forward draw of the upper triangle.

Every scheme splits each root into a process part (lower-triangle noise
around ``prod(f_hat)``, or ``prod(f*)`` for ``original``) and an estimation
part (the remainder).

Replications are processed in fixed chunks of :data:`~mack_reserve.rng.CHUNK_SIZE`;
chunk ``c`` draws its upper-triangle randomness from substream ``(seed, c, 0)``
and its lower-triangle randomness from ``(seed, c, 1)``. Output therefore does
not depend on ``n_jobs``, and the alternative and intermediate schemes
produce identical lower triangles under the same seed.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import EmptyPool, InsufficientReplications, InvalidLevel, InvalidMoments
from .families import CondFamily, sample_array
from .mack import MackFit, fit_mack, row_products
from .rng import chunks, derive, generator, normalize_seed
from .triangle import DevTriangle, check_triangle, diagonal

__all__ = [
    "BootstrapRun",
    "MackBootstrap",
    "Method",
    "QUANTILE_LEVELS",
    "ResidualPool",
    "alternative_mack_bootstrap",
    "backward_variance_scale",
    "build_residual_pool",
    "empirical_quantile",
    "grow_lower",
    "intermediate_mack_bootstrap",
    "original_mack_bootstrap",
    "prediction_interval",
    "run_bootstrap",
]

QUANTILE_LEVELS = (0.005, 0.01, 0.025, 0.05, 0.25, 0.5, 0.75, 0.95, 0.975, 0.99, 0.995)

UPPER_STREAM = 0
LOWER_STREAM = 1


class Method(str, Enum):
    ORIGINAL = "original"
    ALTERNATIVE = "alternative"
    INTERMEDIATE = "intermediate"


@dataclass(frozen=True)
class ResidualPool:
    raw: np.ndarray
    standardized: np.ndarray
    excluded_columns: frozenset


def build_residual_pool(tri, fit: Optional[MackFit] = None) -> ResidualPool:
    """Pearson-type residuals of the upper triangle, re-centered and re-scaled.

    Columns with zero variance estimate are left out; mean and scale are taken
    over the remaining pool with divisor equal to the pool size.
    """
    tri = check_triangle(tri)
    fit = fit if fit is not None else fit_mack(tri)
    v = tri.values
    n = tri.n_periods
    raw, excluded = [], set()
    for d in range(n - 1):
        if fit.sigma2_hat[d] <= 0:
            excluded.add(d)
            continue
        c = v[: n - 1 - d, d]
        F = v[: n - 1 - d, d + 1] / c
        raw.append(np.sqrt(c) * (F - fit.f_hat[d]) / np.sqrt(fit.sigma2_hat[d]))
    raw = np.concatenate(raw) if raw else np.empty(0)
    if raw.size < 2:
        raise EmptyPool(f"need at least 2 residuals, got {raw.size}")
    centered = raw - raw.mean()
    s = np.sqrt(np.mean(centered**2))
    if not s > 0:
        raise EmptyPool("residuals have no spread")
    return ResidualPool(raw=raw, standardized=centered / s, excluded_columns=frozenset(excluded))


def grow_lower(latest, means, sigma2, family: CondFamily, rng, size: int) -> np.ndarray:
    """Simulate ultimates forward from the diagonal.

    ``means`` has shape ``(A-1,)`` (shared) or ``(size, A-1)`` (one row of
    conditional means per replication). Returns the ``(size, A)`` ultimates.
    """
    latest = np.asarray(latest, dtype=float)
    n = latest.size
    means = np.asarray(means, dtype=float)
    per_rep = means.ndim == 2
    cur = np.tile(latest, (size, 1))
    for d in range(n - 1):
        lo = n - 1 - d
        c = cur[:, lo:]
        m = means[:, d, None] if per_rep else means[d]
        cur[:, lo:] = c * sample_array(family, m, sigma2[d] / c, rng)
    return cur


def _upper_cells(tri: DevTriangle, columns):
    """Observed ``C[a, d]`` (with ``a + d + 1 <= A - 1``) for the given columns, column-major."""
    n = tri.n_periods
    cols, vals = [], []
    for d in columns:
        c = tri.values[: n - 1 - d, d]
        cols.append(np.full(c.size, d))
        vals.append(c)
    if not vals:
        return np.empty(0, int), np.empty(0)
    return np.concatenate(cols), np.concatenate(vals)


def _column_sums(x, col_ids, n_cols):
    """Sum ``x[:, k]`` over cells sharing a column id; ids must be sorted."""
    out = np.zeros((x.shape[0], n_cols))
    if col_ids.size:
        starts = np.flatnonzero(np.r_[True, col_ids[1:] != col_ids[:-1]])
        out[:, col_ids[starts]] = np.add.reduceat(x, starts, axis=1)
    return out


@dataclass
class BootstrapRun:
    """``B`` bootstrap predictive roots with their process/estimation split.

    ``center_total`` is the best estimate ``R_hat`` of the data. For the
    alternative and intermediate schemes the roots are centered at
    per-replication bootstrap best estimates, which are already folded into
    ``roots``.
    """

    method: Method
    roots: np.ndarray
    part1: np.ndarray
    part2: np.ndarray
    center_total: float
    seed: tuple
    family_lower: CondFamily
    family_upper: object
    factors: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def B(self) -> int:
        return self.roots.size

    def quantile(self, p) -> float:
        return empirical_quantile(self.roots, p)

    def quantiles(self, levels=QUANTILE_LEVELS) -> dict:
        return {p: self.quantile(p) for p in levels}

    def interval(self, alpha: float) -> tuple[float, float]:
        return prediction_interval(self, self.center_total, alpha)

    def summary(self, alpha: float) -> dict:
        lo, hi = self.interval(alpha)
        return {
            "method": self.method.value,
            "B": self.B,
            "seed": list(self.seed) if len(self.seed) > 1 else self.seed[0],
            "family": self.family_lower.name,
            "family_upper": str(self.family_upper),
            "point_estimate": self.center_total,
            "alpha": alpha,
            "quantiles": {_pct(p): q for p, q in self.quantiles().items()},
            "interval": [lo, hi],
            "variance": float(np.var(self.roots)),
            "part1_variance": float(np.var(self.part1)),
            "part2_variance": float(np.var(self.part2)),
        }


def _pct(p: float) -> str:
    return f"{p * 100:g}%"


def _check_level(alpha):
    if not 0 < alpha < 1:
        raise InvalidLevel(f"alpha must lie in (0, 1), got {alpha}")


def empirical_quantile(roots, p: float) -> float:
    """Order statistic ``ceil(p * B)`` (1-based) of ``roots``.

    ``p * B`` is rounded to 9 decimals first so that products such as
    ``(1 - 1/3) * 300`` count as the integer they stand for.
    """
    x = np.sort(np.asarray(roots, dtype=float))
    if x.size == 0:
        raise InsufficientReplications("no replications")
    if not 0 < p <= 1:
        raise InvalidLevel(f"quantile level must lie in (0, 1], got {p}")
    k = min(max(math.ceil(round(p * x.size, 9)), 1), x.size)
    return float(x[k - 1])


def prediction_interval(run, point_estimate: float, alpha: float) -> tuple[float, float]:
    """Equal-tailed ``1 - alpha`` prediction interval ``R_hat + q(alpha/2), R_hat + q(1 - alpha/2)``."""
    _check_level(alpha)
    roots = run.roots if isinstance(run, BootstrapRun) else np.asarray(run, dtype=float)
    if roots.size == 0 or roots.size < 2 / alpha:
        raise InsufficientReplications(f"need B >= 2/alpha = {2 / alpha:g}, got {roots.size}")
    return (
        point_estimate + empirical_quantile(roots, alpha / 2),
        point_estimate + empirical_quantile(roots, 1 - alpha / 2),
    )


def _run_chunks(work, B, seed, n_jobs):
    if B < 1:
        raise InsufficientReplications(f"B must be >= 1, got {B}")
    seed = normalize_seed(seed)
    tasks = [
        (stop - start, generator(derive(seed, c, UPPER_STREAM)), generator(derive(seed, c, LOWER_STREAM)))
        for c, start, stop in chunks(B)
    ]
    if n_jobs is None or n_jobs == 1 or len(tasks) == 1:
        parts = [work(*t) for t in tasks]
    else:
        workers = None if n_jobs in (-1, 0) else n_jobs
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda t: work(*t), tasks))
    return [np.concatenate(x) for x in zip(*parts)]


def original_mack_bootstrap(
    tri,
    fit: Optional[MackFit] = None,
    family_lower="gamma",
    B: int = 1000,
    alpha: float = 0.05,
    seed=0,
    *,
    n_jobs: int = 1,
    keep_factors: bool = False,
) -> BootstrapRun:
    _check_level(alpha)
    tri = check_triangle(tri)
    fit = fit if fit is not None else fit_mack(tri)
    family_lower = CondFamily.parse(family_lower)
    pool = build_residual_pool(tri, fit)
    n = tri.n_periods
    latest = diagonal(tri)
    sigma = np.sqrt(fit.sigma2_hat)
    live = [d for d in range(n - 1) if d not in pool.excluded_columns]
    col_ids, c = _upper_cells(tri, live)
    col_totals = np.array([tri.values[: n - 1 - d, d].sum() for d in range(n - 1)])
    weight = sigma[col_ids] * np.sqrt(c) / col_totals[col_ids]
    r_pool = pool.standardized
    base = latest @ row_products(fit.f_hat)

    def work(size, up, low):
        r = r_pool[up.integers(0, r_pool.size, size=(size, col_ids.size))]
        f_star = fit.f_hat + _column_sums(r * weight, col_ids, n - 1)
        ult = grow_lower(latest, f_star, fit.sigma2_hat, family_lower, low, size)
        total = ult.sum(axis=1) - fit.ultimates.sum()
        part2 = row_products(f_star) @ latest - base
        return total, total - part2, part2, f_star

    roots, part1, part2, factors = _run_chunks(work, B, seed, n_jobs)
    return BootstrapRun(
        Method.ORIGINAL, roots, part1, part2, fit.total_reserve, normalize_seed(seed),
        family_lower, "residual", factors if keep_factors else None,
    )


BACKWARD_VARIANCES = ("delta", "literal")


def backward_variance_scale(f_hat, rule: str = "delta") -> np.ndarray:
    """Per-column factor ``k_j`` in ``Var(G | C[., j+1]) = k_j * sigma2_j / C[., j+1]``.

    ``"delta"`` uses ``k_j = f_j^-3``, the first-order variance of ``1/F`` given
    ``C[., j+1]`` when ``F | C[., j] ~ (f_j, sigma2_j / C[., j])``, so the
    backward triangle reproduces the forward estimation variance of the
    development factors. ``"literal"`` uses ``k_j = 1``.
    """
    f_hat = np.asarray(f_hat, dtype=float)
    if rule == "delta":
        return f_hat**-3.0
    if rule == "literal":
        return np.ones_like(f_hat)
    raise InvalidMoments(f"backward_variance must be one of {BACKWARD_VARIANCES}, got {rule!r}")


def _backward_factors(latest, fit: MackFit, family: CondFamily, rng, size, rule="delta"):
    """Chain-ladder factors of an upper triangle regenerated backwards from the diagonal."""
    n = latest.size
    f_plus = np.empty((size, n - 1))
    cur = np.empty((size, n))
    cur[:, 0] = latest[0]
    inv_f = 1.0 / fit.f_hat
    var_num = fit.sigma2_hat * backward_variance_scale(fit.f_hat, rule)
    for d in range(n - 2, -1, -1):
        k = n - 1 - d  # rows 0..k-1 are observed at column d + 1
        nxt = cur[:, :k]
        prev = nxt * sample_array(family, inv_f[d], var_num[d] / nxt, rng)
        f_plus[:, d] = nxt.sum(axis=1) / prev.sum(axis=1)
        cur[:, :k] = prev
        cur[:, k] = latest[k]
    return f_plus


def _forward_factors(tri: DevTriangle, fit: MackFit, family: CondFamily, rng, size):
    """Fixed-design parametric bootstrap factors from the observed upper triangle."""
    n = tri.n_periods
    col_ids, c = _upper_cells(tri, range(n - 1))
    draws = sample_array(
        family,
        np.broadcast_to(fit.f_hat[col_ids], (size, col_ids.size)),
        np.broadcast_to(fit.sigma2_hat[col_ids] / c, (size, col_ids.size)),
        rng,
    )
    col_totals = _column_sums(c[None, :], col_ids, n - 1)
    return _column_sums(draws * c, col_ids, n - 1) / col_totals


def _centered_forward(tri, fit, family_lower, upper_factors, B, seed, n_jobs, method, family_upper, keep_factors):
    n = tri.n_periods
    latest = diagonal(tri)
    base = latest @ row_products(fit.f_hat)

    def work(size, up, low):
        f_boot = upper_factors(size, up)
        ult = grow_lower(latest, fit.f_hat, fit.sigma2_hat, family_lower, low, size)
        r_sum = ult.sum(axis=1)
        total = r_sum - row_products(f_boot) @ latest
        part1 = r_sum - base
        return total, part1, total - part1, f_boot

    roots, part1, part2, factors = _run_chunks(work, B, seed, n_jobs)
    return BootstrapRun(
        method, roots, part1, part2, fit.total_reserve, normalize_seed(seed),
        family_lower, family_upper, factors if keep_factors else None,
    )


def alternative_mack_bootstrap(
    tri,
    fit: Optional[MackFit] = None,
    family_backward=None,
    family_lower="gamma",
    B: int = 1000,
    alpha: float = 0.05,
    seed=0,
    *,
    backward_variance: str = "delta",
    n_jobs: int = 1,
    keep_factors: bool = False,
) -> BootstrapRun:
    """Backward-resampling Mack-type bootstrap.

    ``family_backward`` defaults to ``family_lower``. Backward factors have
    mean ``1/f_hat_j`` and variance ``k_j * sigma2_hat_j / C+[., j+1]`` with
    ``k_j`` from :func:`backward_variance_scale`.
    """
    _check_level(alpha)
    tri = check_triangle(tri)
    fit = fit if fit is not None else fit_mack(tri)
    family_lower = CondFamily.parse(family_lower)
    family_backward = CondFamily.parse(family_backward) if family_backward is not None else family_lower
    latest = diagonal(tri)
    backward_variance_scale(fit.f_hat, backward_variance)
    return _centered_forward(
        tri, fit, family_lower,
        lambda size, rng: _backward_factors(latest, fit, family_backward, rng, size, backward_variance),
        B, seed, n_jobs, Method.ALTERNATIVE, family_backward, keep_factors,
    )


def intermediate_mack_bootstrap(
    tri,
    fit: Optional[MackFit] = None,
    family_upper=None,
    family_lower="gamma",
    B: int = 1000,
    alpha: float = 0.05,
    seed=0,
    *,
    n_jobs: int = 1,
    keep_factors: bool = False,
) -> BootstrapRun:
    """Alternative scheme with a forward fixed-design parametric upper triangle.

    ``family_upper`` defaults to ``family_lower``.
    """
    _check_level(alpha)
    tri = check_triangle(tri)
    fit = fit if fit is not None else fit_mack(tri)
    family_lower = CondFamily.parse(family_lower)
    family_upper = CondFamily.parse(family_upper) if family_upper is not None else family_lower
    return _centered_forward(
        tri, fit, family_lower,
        lambda size, rng: _forward_factors(tri, fit, family_upper, rng, size),
        B, seed, n_jobs, Method.INTERMEDIATE, family_upper, keep_factors,
    )


def run_bootstrap(method, tri, fit=None, family="gamma", family_upper=None, B=1000, alpha=0.05, seed=0,
                  backward_variance="delta", **kwargs):
    """Dispatch to one of the three schemes by name."""
    method = Method(method)
    if method is Method.ORIGINAL:
        return original_mack_bootstrap(tri, fit, family, B, alpha, seed, **kwargs)
    if method is Method.ALTERNATIVE:
        return alternative_mack_bootstrap(
            tri, fit, family_upper, family, B, alpha, seed, backward_variance=backward_variance, **kwargs
        )
    return intermediate_mack_bootstrap(tri, fit, family_upper, family, B, alpha, seed, **kwargs)


class MackBootstrap(BaseEstimator):
    """Estimator interface to the three bootstrap schemes.

    Parameters
    ----------
    method : {"original", "alternative", "intermediate"}
    family : {"gamma", "lognormal", "truncnormal"}
        Conditional family of the simulated lower-triangle factors.
    family_upper : str, optional
        Family of parametric upper-triangle draws (backward factors for
        ``alternative``, forward factors for ``intermediate``). Defaults to
        ``family``; ignored by ``original``.
    B : int
        Number of bootstrap replications.
    alpha : float
        Level of the equal-tailed prediction interval.
    random_state : int or tuple of int
        Master seed. Required.
    backward_variance : {"delta", "literal"}
        Variance rule for backward factors of ``alternative``; see
        :func:`backward_variance_scale`.
    n_jobs : int
        Threads used across replication chunks; results do not depend on it.
    """

    def __init__(self, method="original", family="gamma", family_upper=None, B=1000,
                 alpha=0.05, random_state=None, backward_variance="delta", n_jobs=1):
        self.method = method
        self.family = family
        self.family_upper = family_upper
        self.B = B
        self.alpha = alpha
        self.random_state = random_state
        self.backward_variance = backward_variance
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        tri = check_triangle(X)
        self.mack_ = fit_mack(tri)
        self.run_ = run_bootstrap(
            self.method, tri, self.mack_, self.family, self.family_upper,
            self.B, self.alpha, normalize_seed(self.random_state),
            backward_variance=self.backward_variance, n_jobs=self.n_jobs,
        )
        self.roots_ = self.run_.roots
        self.part1_ = self.run_.part1
        self.part2_ = self.run_.part2
        self.total_reserve_ = self.mack_.total_reserve
        self.interval_ = self.run_.interval(self.alpha)
        return self

    def predict_interval(self, alpha=None):
        check_is_fitted(self, "run_")
        return self.run_.interval(self.alpha if alpha is None else alpha)

    def predict_quantiles(self, levels=QUANTILE_LEVELS):
        """Quantiles of the predictive distribution of the total reserve."""
        check_is_fitted(self, "run_")
        return {p: self.total_reserve_ + self.run_.quantile(p) for p in levels}
