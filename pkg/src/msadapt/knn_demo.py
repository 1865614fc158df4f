"""Adaptive k-nearest-neighbor regression on a fixed 1-D design.

The number of neighbors is chosen by the same ball-intersection rule the
multi-source estimators use: each prefix of neighbors (sorted by distance to
the query) gets a confidence interval around its running mean, and k is the
deepest prefix whose intervals still share a point.  Every neighbor counts as
one observation of unit noise scale, so the interval for the r nearest
responses has half-width ``2 * rho_r`` with
``rho_r = tau / sqrt(r) * (1 + sqrt(log((m + 1) / delta)))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import KNN_STREAM, substream

__all__ = [
    "RegressionSample",
    "fixed_design_sample",
    "holder_function",
    "adaptive_knn",
    "rate_sweep",
]


@dataclass(frozen=True, eq=False)
class RegressionSample:
    """Fixed-design responses plus the query point.

    ``f_true`` is an optional callback used only for evaluation (never by the
    estimator itself).
    """

    x: np.ndarray
    y: np.ndarray
    x0: float
    f_true: object = None

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.size == 0:
            raise ValueError("empty sample")
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be 1-D of equal length")
        if x.size > 1 and not np.all(np.diff(x) > 0):
            raise ValueError("design points must be strictly increasing")
        if not 0.0 <= self.x0 <= 1.0:
            raise ValueError("query point must lie in [0, 1]")
        for name, arr in (("x", x), ("y", y)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "x0", float(self.x0))

    @property
    def m(self):
        return self.x.size


def fixed_design_sample(f, m, x0=0.5, seed=0, replicate=0, noise=1.0):
    """Draw responses ``y_k = f(k/m) + noise * z_k`` on the grid k/m, k=1..m."""
    if m < 1:
        raise ValueError("need at least one design point")
    x = np.arange(1, m + 1) / m
    rng = substream(seed, KNN_STREAM, replicate)
    y = f(x) + noise * rng.standard_normal(m)
    return RegressionSample(x, y, x0, f_true=f)


def holder_function(alpha, scale=32.0, center=0.5):
    """``f(x) = scale * |x - center|^alpha`` — a kink of smoothness alpha."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")

    def f(x):
        return scale * np.abs(np.asarray(x, dtype=float) - center) ** alpha

    return f


def _neighbor_order(x, x0):
    """Indices by distance to the query, ties to the smaller index."""
    return np.argsort(np.abs(x - x0), kind="stable")


def _interval_half_widths(m, delta, tau):
    r = np.arange(1, m + 1, dtype=float)
    return tau / np.sqrt(r) * (1.0 + math.sqrt(math.log((m + 1) / delta)))


def _deepest_feasible(mu, rho):
    """Largest t such that intervals ``mu_r +- 2 rho_r``, r <= t, intersect.

    In one dimension the running intersection is an interval, so feasibility
    is monotone: track the running max of lower ends and min of upper ends.
    """
    lo = np.maximum.accumulate(mu - 2.0 * rho, axis=-1)
    hi = np.minimum.accumulate(mu + 2.0 * rho, axis=-1)
    return (lo <= hi).sum(axis=-1)


def adaptive_knn(sample, delta=None, tau=1.0):
    """Estimate ``f(x0)`` by the mean of a data-chosen number of neighbors.

    Returns ``(estimate, k_hat)`` where the estimate is exactly the mean of
    the ``k_hat`` responses nearest to ``x0``.  Default ``delta``: ``1/m``.
    """
    m = sample.m
    if delta is None:
        delta = 1.0 / m
    if not 0 < delta <= 1:
        raise ValueError("delta must be in (0, 1]")
    if not tau > 0:
        raise ValueError("tau must be positive")
    order = _neighbor_order(sample.x, sample.x0)
    mu = np.cumsum(sample.y[order]) / np.arange(1, m + 1)
    rho = _interval_half_widths(m, delta, tau)
    k_hat = int(_deepest_feasible(mu, rho))
    return float(mu[k_hat - 1]), k_hat


def rate_sweep(f, alpha_label, m_grid, reps, seed, x0=0.5, noise=1.0,
               delta=None, tau=1.0):
    """Monte Carlo MSE of the adaptive estimator over a grid of sample sizes.

    Returns one row per m: ``{"m", "alpha", "mse_mean", "mse_stderr",
    "mean_k_hat"}``.  Replicate r of size m uses the same noise draw as
    ``fixed_design_sample(f, m, x0, seed, r, noise)``, so single replicates
    are reproducible through either path.
    """
    m_grid = [int(m) for m in m_grid]
    if any(b <= a for a, b in zip(m_grid, m_grid[1:])):
        raise ValueError("m_grid must be strictly increasing")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    rows = []
    for m in m_grid:
        x = np.arange(1, m + 1) / m
        fx = f(x)
        order = _neighbor_order(x, x0)
        rho = _interval_half_widths(m, 1.0 / m if delta is None else delta, tau)
        draws = np.empty((reps, m))
        for rep in range(reps):
            draws[rep] = substream(seed, KNN_STREAM, rep).standard_normal(m)
        y_sorted = (fx + noise * draws)[:, order]
        mu = np.cumsum(y_sorted, axis=1) / np.arange(1, m + 1)
        k_hat = _deepest_feasible(mu, rho)
        estimates = mu[np.arange(reps), k_hat - 1]
        errs = (estimates - f(np.array([x0]))[0]) ** 2
        stderr = errs.std(ddof=1) / math.sqrt(reps) if reps > 1 else 0.0
        rows.append({
            "m": m,
            "alpha": float(alpha_label),
            "mse_mean": float(errs.mean()),
            "mse_stderr": float(stderr),
            "mean_k_hat": float(k_hat.mean()),
        })
    return rows