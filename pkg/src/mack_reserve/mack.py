"""Mack's distribution-free chain ladder: point estimates and predictive roots."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import DiagonalMismatch, ShapeMismatch, TriangleTooSmall
from .triangle import DevTriangle, check_triangle, diagonal, factor_grid

__all__ = [
    "MackChainLadder",
    "MackFit",
    "PredictiveRoot",
    "fit_mack",
    "predictive_root",
    "row_products",
]

# relative agreement below which a column's individual factors count as identical
_DEGENERATE_RTOL = 1e-12


def row_products(factors) -> np.ndarray:
    """Per-row products of the remaining development factors.

    For factors of length ``A-1`` returns an array of length ``A`` whose entry
    ``a`` is ``prod(factors[A-1-a:])``; row 0 gets the empty product 1. A 2-D
    ``(B, A-1)`` input is handled row-wise and gives ``(B, A)``.
    """
    f = np.asarray(factors, dtype=float)
    ones = np.ones(f.shape[:-1] + (1,))
    # tail[..., k] = prod(f[..., k:]) for k = 0..A-1
    tail = np.concatenate([np.cumprod(f[..., ::-1], axis=-1)[..., ::-1], ones], axis=-1)
    return tail[..., ::-1]


@dataclass(frozen=True)
class MackFit:
    f_hat: np.ndarray
    sigma2_hat: np.ndarray
    ultimates: np.ndarray
    reserves: np.ndarray
    total_reserve: float

    @property
    def n_periods(self) -> int:
        return len(self.ultimates)

    @property
    def cdf(self) -> np.ndarray:
        """Per-row cumulative development factor to ultimate."""
        return row_products(self.f_hat)

    def to_dict(self) -> dict:
        return {
            "f_hat": [float(x) for x in self.f_hat],
            "sigma2_hat": [float(x) for x in self.sigma2_hat],
            "ultimates": [float(x) for x in self.ultimates],
            "reserves": [float(x) for x in self.reserves],
            "total_reserve": float(self.total_reserve),
        }


def fit_mack(tri) -> MackFit:
    """Chain-ladder factors, variance parameters, ultimates and reserves.

    The variance parameter of the last column, which rests on a single
    observation, is set to 0 instead of being extrapolated.
    """
    tri = check_triangle(tri)
    n = tri.n_periods
    if n < 2:
        raise TriangleTooSmall(f"need at least 2 accident years, got {n}")
    v = tri.values
    F = factor_grid(tri)
    f_hat = np.empty(n - 1)
    sigma2 = np.zeros(n - 1)
    for d in range(n - 1):
        c = v[: n - 1 - d, d]
        f_hat[d] = v[: n - 1 - d, d + 1].sum() / c.sum()
        if d <= n - 3 and not np.all(np.abs(F[d] - f_hat[d]) <= _DEGENERATE_RTOL * f_hat[d]):
            sigma2[d] = np.sum(c * (F[d] - f_hat[d]) ** 2) / (n - 2 - d)
    latest = diagonal(tri)
    ultimates = latest * row_products(f_hat)
    reserves = ultimates - latest
    reserves[0] = 0.0
    return MackFit(
        f_hat=f_hat,
        sigma2_hat=sigma2,
        ultimates=ultimates,
        reserves=reserves,
        total_reserve=float(reserves.sum()),
    )


@dataclass(frozen=True)
class PredictiveRoot:
    """Reserve minus its best estimate, split into process and estimation parts."""

    total: float
    part1: float
    part2: float


def predictive_root(tri, fit: MackFit, realized_lower, center_products) -> PredictiveRoot:
    """Predictive root of a realized completion of ``tri``.

    ``realized_lower`` is the full ``(A, A)`` claims rectangle; its upper part
    must agree with the triangle on the diagonal. ``center_products[a]`` is the
    product of development factors the process part is centered at for row
    ``a`` (true factors give the usual process/estimation split).
    """
    tri = check_triangle(tri)
    n = tri.n_periods
    full = np.asarray(realized_lower, dtype=float)
    center = np.asarray(center_products, dtype=float)
    if full.shape != (n, n):
        raise ShapeMismatch(f"realized rectangle must be {n}x{n}, got {full.shape}")
    if center.shape != (n,):
        raise ShapeMismatch(f"center_products must have length {n}")
    latest = diagonal(tri)
    idx = np.arange(n)
    if not np.allclose(full[idx, n - 1 - idx], latest, rtol=1e-12, atol=0):
        raise DiagonalMismatch("realized claims disagree with the observed diagonal")
    ultimate = full[:, n - 1]
    total = float(np.sum(ultimate - fit.ultimates))
    part1 = float(np.sum(ultimate - latest * center))
    return PredictiveRoot(total=total, part1=part1, part2=total - part1)


class MackChainLadder(BaseEstimator):
    """Estimator wrapper around :func:`fit_mack`.

    ``fit`` takes a triangle (or anything :func:`check_triangle` accepts);
    ``predict`` returns best-estimate ultimates per accident year.
    """

    def fit(self, X, y=None):
        tri = check_triangle(X)
        res = fit_mack(tri)
        self.triangle_ = tri
        self.fit_ = res
        self.f_hat_ = res.f_hat
        self.sigma2_hat_ = res.sigma2_hat
        self.ultimates_ = res.ultimates
        self.reserves_ = res.reserves
        self.total_reserve_ = res.total_reserve
        self.n_periods_ = tri.n_periods
        return self

    def predict(self, X=None):
        check_is_fitted(self, "fit_")
        if X is None:
            return self.ultimates_.copy()
        latest = diagonal(check_triangle(X))
        if len(latest) != self.n_periods_:
            raise ShapeMismatch("triangle size differs from the fitted one")
        return latest * row_products(self.f_hat_)

    def full_triangle(self) -> np.ndarray:
        """Observed cells completed with chain-ladder expectations."""
        check_is_fitted(self, "fit_")
        full = np.array(self.triangle_.values)
        n = self.n_periods_
        for d in range(n - 1):
            rows = slice(n - 1 - d, n)
            full[rows, d + 1] = full[rows, d] * self.f_hat_[d]
        return full
