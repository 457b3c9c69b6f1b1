"""Mahalanobis-distance screening of multivariate rows."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.special import gammainc

from .errors import ConfigError, RankError, ShapeError
from .linalg import weighted_least_squares

SINGULAR_COND = 1e12
RIDGE = 1e-8


@dataclass(frozen=True, eq=False)
class OutlierScreen:
    center: np.ndarray
    covariance: np.ndarray
    distances: np.ndarray
    cutoff: float = math.nan
    flags: np.ndarray | None = None
    regularized: bool = False

    @property
    def n_flagged(self) -> int:
        return 0 if self.flags is None else int(self.flags.sum())


def chi2_quantile(prob: float, df: int) -> float:
    """Inverse of the chi-square CDF by bisection on the regularized lower incomplete gamma."""
    if not 0.0 <= prob < 1.0:
        raise ConfigError(f"probability must lie in [0, 1), got {prob}")
    if df < 1:
        raise ConfigError(f"degrees of freedom must be >= 1, got {df}")
    if prob == 0.0:
        return 0.0
    cdf = lambda x: gammainc(df / 2.0, x / 2.0)  # noqa: E731
    lo, hi = 0.0, max(1.0, float(df))
    while cdf(hi) < prob:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < prob:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def _dependent_columns(centered: np.ndarray, labels: Sequence[str] | None) -> list[str]:
    sol = weighted_least_squares(centered, np.zeros(centered.shape[0]))
    names = labels or [f"column {j}" for j in range(centered.shape[1])]
    return [names[j] for j in sol.dropped_columns]


def mahalanobis(data: np.ndarray, labels: Sequence[str] | None = None) -> OutlierScreen:
    """Distances of each row from the column means under the sample covariance.

    The covariance uses the ``n - 1`` denominator.  When it is numerically
    singular a ridge of ``1e-8 * trace(S) / p`` is added to the diagonal and
    the screen is marked ``regularized``.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    n, p = x.shape
    if n <= p:
        raise ShapeError(f"need more rows than columns, got {n} x {p}")
    center = x.mean(axis=0)
    c = x - center
    S = (c.T @ c) / (n - 1)
    regularized = False
    if not np.isfinite(S).all() or np.linalg.cond(S) > SINGULAR_COND:
        trace = float(np.trace(S))
        if not trace > 0:
            raise RankError("covariance is zero; every column is constant", _dependent_columns(c, labels))
        S = S + RIDGE * trace / p * np.eye(p)
        regularized = True
    try:
        L = scipy.linalg.cholesky(S, lower=True)
    except np.linalg.LinAlgError:
        raise RankError(
            "covariance is singular after regularization", _dependent_columns(c, labels)
        ) from None
    u = scipy.linalg.solve_triangular(L, c.T, lower=True)
    dist = np.sqrt(np.sum(u * u, axis=0))
    return OutlierScreen(center=center, covariance=S, distances=dist, regularized=regularized)


def flag_outliers(screen: OutlierScreen, alpha: float = 0.001) -> OutlierScreen:
    """Flag rows whose distance exceeds ``sqrt(chi2_p(1 - alpha))``."""
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    p = screen.center.shape[0]
    cutoff = math.sqrt(chi2_quantile(1.0 - alpha, p))
    return replace(screen, cutoff=cutoff, flags=screen.distances > cutoff)
