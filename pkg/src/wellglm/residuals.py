"""Residual diagnostics and plot-data tables.

The fitted Normal uses maximum-likelihood estimates (divide by n), with
standard errors ``sigma/sqrt(n)`` for the location and ``sigma/sqrt(2n)``
for the dispersion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateDistributionError, ShapeError


@dataclass(frozen=True)
class HistogramBin:
    left: float
    right: float
    count: int
    density: float  # fitted Normal density at the bin midpoint


@dataclass(frozen=True, eq=False)
class ResidualReport:
    residuals: np.ndarray
    location_mu: float
    dispersion_sigma: float
    se_mu: float
    se_sigma: float
    histogram: tuple[HistogramBin, ...] = ()

    @property
    def n(self) -> int:
        return int(self.residuals.shape[0])


@dataclass(frozen=True, eq=False)
class ScatterData:
    pairs: np.ndarray  # columns: predicted, actual
    identity_line: tuple[float, float]


def residuals(y, yhat) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    yhat = np.asarray(yhat, dtype=float).reshape(-1)
    if y.shape != yhat.shape:
        raise ShapeError(f"length mismatch: {y.shape[0]} vs {yhat.shape[0]}")
    return y - yhat


def normal_density(x, mu: float, sigma: float):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))


def fit_normal(eps) -> ResidualReport:
    """Maximum-likelihood Normal fit to a residual vector (no histogram)."""
    eps = np.asarray(eps, dtype=float).reshape(-1)
    n = eps.shape[0]
    if n < 2:
        raise DegenerateDistributionError("need at least 2 residuals to fit a Normal")
    mu = float(np.mean(eps))
    sigma = math.sqrt(float(np.sum((eps - mu) ** 2)) / n)
    if sigma == 0.0:
        raise DegenerateDistributionError("all residuals are equal")
    return ResidualReport(
        residuals=eps,
        location_mu=mu,
        dispersion_sigma=sigma,
        se_mu=sigma / math.sqrt(n),
        se_sigma=sigma / math.sqrt(2 * n),
    )


def histogram(eps, bin_count: int = 20, mu: float | None = None, sigma: float | None = None) -> tuple[HistogramBin, ...]:
    """Equal-width bins over ``[min(eps), max(eps)]`` with a Normal overlay.

    A zero-width range collapses to a single bin.  When ``mu``/``sigma``
    are omitted the maximum-likelihood fit is used; a degenerate fit gives
    NaN densities.
    """
    if bin_count < 1:
        raise ValueError("bin_count must be >= 1")
    eps = np.asarray(eps, dtype=float).reshape(-1)
    if eps.shape[0] == 0:
        raise ShapeError("no residuals")
    lo, hi = float(eps.min()), float(eps.max())
    if mu is None or sigma is None:
        try:
            fitted = fit_normal(eps)
            mu, sigma = fitted.location_mu, fitted.dispersion_sigma
        except DegenerateDistributionError:
            mu, sigma = float(eps.mean()), math.nan
    if hi == lo:
        mid = lo
        dens = float(normal_density(mid, mu, sigma)) if sigma and sigma > 0 else math.nan
        return (HistogramBin(lo, hi, int(eps.shape[0]), dens),)
    counts, edges = np.histogram(eps, bins=bin_count, range=(lo, hi))
    mids = 0.5 * (edges[:-1] + edges[1:])
    dens = normal_density(mids, mu, sigma) if sigma and sigma > 0 else np.full(bin_count, math.nan)
    return tuple(
        HistogramBin(float(edges[i]), float(edges[i + 1]), int(counts[i]), float(dens[i])) for i in range(bin_count)
    )


def residual_report(y, yhat, bin_count: int = 20) -> ResidualReport:
    eps = residuals(y, yhat)
    rep = fit_normal(eps)
    bins = histogram(eps, bin_count, rep.location_mu, rep.dispersion_sigma)
    return ResidualReport(eps, rep.location_mu, rep.dispersion_sigma, rep.se_mu, rep.se_sigma, bins)


def scatter_data(y, yhat) -> ScatterData:
    y = np.asarray(y, dtype=float).reshape(-1)
    yhat = np.asarray(yhat, dtype=float).reshape(-1)
    if y.shape != yhat.shape:
        raise ShapeError(f"length mismatch: {y.shape[0]} vs {yhat.shape[0]}")
    pairs = np.column_stack([yhat, y])
    if pairs.size:
        line = (float(pairs.min()), float(pairs.max()))
    else:
        line = (math.nan, math.nan)
    return ScatterData(pairs, line)


def series_data(
    day,
    y,
    yhat_per_model: Mapping[str, Sequence[float]],
    window: tuple[int, int] | None = None,
) -> tuple[list[str], np.ndarray]:
    """Production-vs-day table: ``day``, ``actual``, then one column per model.

    ``window`` keeps only rows with ``window[0] <= day <= window[1]``.
    """
    day = np.asarray(day).reshape(-1)
    cols = [day.astype(float), np.asarray(y, dtype=float).reshape(-1)]
    names = ["day", "actual"]
    for name, yhat in yhat_per_model.items():
        names.append(name)
        cols.append(np.asarray(yhat, dtype=float).reshape(-1))
    for c in cols:
        if c.shape[0] != day.shape[0]:
            raise ShapeError("series columns must share the day axis length")
    table = np.column_stack(cols) if cols else np.empty((0, 0))
    if window is not None:
        keep = (day >= window[0]) & (day <= window[1])
        table = table[keep]
    return names, table
