"""Two-moment conditional distribution families for individual development factors.

Each family is pinned down by a target mean ``m`` and variance ``v``.
Gamma and log-normal match both moments exactly. The truncated normal by
default truncates an untruncated ``N(m, v)`` at ``trunc_point`` without
correcting the moments (``moment_match=True`` solves for the parent normal
whose truncated moments hit the target instead).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special

from .exceptions import InvalidMoments, RejectionBudgetExceeded

__all__ = [
    "CondFamily",
    "FamilyKind",
    "MomentSpec",
    "params_from_moments",
    "sample",
    "sample_array",
    "truncnorm_moments",
]

log = logging.getLogger(__name__)

MAX_REJECTIONS = 1_000_000


class FamilyKind(str, Enum):
    GAMMA = "gamma"
    LOGNORMAL = "lognormal"
    TRUNCNORMAL = "truncnormal"


@dataclass(frozen=True)
class CondFamily:
    kind: FamilyKind
    trunc_point: float = 0.1
    moment_match: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", FamilyKind(self.kind))
        if not self.trunc_point >= 0:
            raise ValueError("trunc_point must be >= 0")

    @classmethod
    def parse(cls, name, **kwargs) -> "CondFamily":
        if isinstance(name, CondFamily):
            return name
        try:
            return cls(FamilyKind(str(name).lower()), **kwargs)
        except ValueError:
            choices = ", ".join(k.value for k in FamilyKind)
            raise InvalidMoments(f"unknown family {name!r}; expected one of {choices}") from None

    @property
    def name(self) -> str:
        return self.kind.value

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class MomentSpec:
    mean: float
    variance: float


def _log_mills(alpha):
    # phi(alpha) / (1 - Phi(alpha)), stable far into both tails
    return np.exp(-0.5 * alpha**2 - 0.5 * np.log(2 * np.pi) - special.log_ndtr(-alpha))


def truncnorm_moments(mu, var, a):
    """Mean and variance of ``N(mu, var)`` conditioned on ``X > a``."""
    mu = np.asarray(mu, dtype=float)
    s = np.sqrt(np.asarray(var, dtype=float))
    alpha = (a - mu) / s
    lam = _log_mills(alpha)
    mean = mu + s * lam
    variance = var * (1 + alpha * lam - lam**2)
    return mean, variance


def _match_truncnorm(m, v, a):
    """Parent normal ``(mu, var)`` whose left truncation at ``a`` has moments ``(m, v)``."""
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    k = (m - a) / np.sqrt(v)
    # h(alpha) = (lam - alpha) / sqrt(1 + alpha*lam - lam^2) decreases from +inf to 1
    if np.any(k <= 1):
        raise InvalidMoments("truncated normal cannot reach this mean/variance pair")
    lo = np.full(k.shape, -60.0)
    hi = np.full(k.shape, 60.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lam = _log_mills(mid)
        h = (lam - mid) / np.sqrt(np.maximum(1 + mid * lam - lam**2, 1e-300))
        above = h > k
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    alpha = 0.5 * (lo + hi)
    lam = _log_mills(alpha)
    s = np.sqrt(v / (1 + alpha * lam - lam**2))
    return a - alpha * s, s**2


def params_from_moments(family: CondFamily, spec: MomentSpec):
    """Family parameters reproducing ``spec``.

    gamma -> ``(shape, rate)``; lognormal -> ``(mu, sigma2)`` of the log;
    truncnormal -> ``(mu, sigma2)`` of the parent normal.
    """
    family = CondFamily.parse(family)
    m, v = float(spec.mean), float(spec.variance)
    if not m > 0 or not v >= 0 or not np.isfinite(v):
        raise InvalidMoments(f"need mean > 0 and finite variance >= 0, got ({m}, {v})")
    if v == 0:
        raise InvalidMoments("zero variance is a point mass and has no family parameters")
    if family.kind is FamilyKind.GAMMA:
        return m * m / v, m / v
    if family.kind is FamilyKind.LOGNORMAL:
        s2 = float(np.log1p(v / (m * m)))
        return float(np.log(m) - s2 / 2), s2
    if not m > family.trunc_point:
        raise InvalidMoments(f"mean {m} must exceed the truncation point {family.trunc_point}")
    if family.moment_match:
        mu, s2 = _match_truncnorm(m, v, family.trunc_point)
        return float(mu), float(s2)
    return m, v


def _truncnormal(mu, s, a, rng):
    out = mu + s * rng.standard_normal(mu.shape)
    bad = np.flatnonzero(out <= a)
    rounds = 0
    while bad.size:
        rounds += 1
        if rounds > MAX_REJECTIONS:
            raise RejectionBudgetExceeded(
                f"{bad.size} draws still below {a} after {MAX_REJECTIONS} attempts"
            )
        redraw = mu[bad] + s[bad] * rng.standard_normal(bad.size)
        out[bad] = redraw
        bad = bad[redraw <= a]
    return out


def sample_array(family: CondFamily, mean, variance, rng: np.random.Generator) -> np.ndarray:
    """Vectorised draws with elementwise target moments.

    ``mean`` and ``variance`` broadcast against each other. Entries with zero
    variance are returned as the mean exactly.
    """
    family = CondFamily.parse(family)
    m, v = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(variance, dtype=float))
    if np.any(~(m > 0)) or np.any(~(v >= 0)) or not np.all(np.isfinite(v)):
        raise InvalidMoments("need mean > 0 and finite variance >= 0")
    out = m.astype(float, copy=True)
    live = v > 0
    if not np.any(live):
        return out
    mm, vv = m[live], v[live]
    kind = family.kind
    if kind is FamilyKind.GAMMA:
        out[live] = rng.gamma(mm * mm / vv, vv / mm)
    elif kind is FamilyKind.LOGNORMAL:
        s2 = np.log1p(vv / (mm * mm))
        out[live] = np.exp(np.log(mm) - s2 / 2 + np.sqrt(s2) * rng.standard_normal(mm.shape))
    else:
        a = family.trunc_point
        if np.any(mm <= a):
            raise InvalidMoments(f"means must exceed the truncation point {a}")
        if family.moment_match:
            mu, s2 = _match_truncnorm(mm, vv, a)
        else:
            mu, s2 = mm, vv
            if log.isEnabledFor(logging.DEBUG):
                tmean, _ = truncnorm_moments(mu, s2, a)
                log.debug("truncnormal mean distortion: max %.3e", float(np.max(tmean - mm)))
        out[live] = _truncnormal(mu, np.sqrt(s2), a, rng)
    return out


def sample(family: CondFamily, spec: MomentSpec, rng: np.random.Generator) -> float:
    return float(sample_array(family, spec.mean, spec.variance, rng))
