"""Statistics for the verification runs and the closed-form complexity exponents."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

MIN_KS_SAMPLES = 50


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    residual_rms: float
    n_points: int


def fit_rate(points) -> RateFit:
    """Least-squares line through ``(log x, log y)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be a sequence of (x, y) pairs")
    if pts.shape[0] < 3:
        raise ValueError("need at least 3 points")
    if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
        raise ValueError("points must be finite and positive")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    design = np.column_stack([lx, np.ones_like(lx)])
    (slope, icept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - (slope * lx + icept)
    return RateFit(float(slope), float(icept), float(np.sqrt(np.mean(resid ** 2))), len(pts))


def _kolmogorov_p(d, n_eff):
    return float(stats.kstwobign.sf(math.sqrt(n_eff) * d))


def ks_two_sample(a, b):
    """Two-sample KS statistic and its asymptotic Kolmogorov p-value."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size < MIN_KS_SAMPLES or b.size < MIN_KS_SAMPLES:
        raise ValueError(f"need at least {MIN_KS_SAMPLES} samples on each side")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    return d, _kolmogorov_p(d, a.size * b.size / (a.size + b.size))


def ks_one_sample(samples, cdf):
    """One-sample KS statistic against a vectorized ``cdf``; asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < MIN_KS_SAMPLES:
        raise ValueError(f"need at least {MIN_KS_SAMPLES} samples")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    return d, _kolmogorov_p(d, n)


def empirical_cf(samples, u):
    """``(1/M) sum exp(i u X_j)`` and its standard error for each ``u``.

    The standard error is ``sqrt((var cos + var sin) / M)``. Sums use
    ``math.fsum`` so that a sign-symmetric sample gives an imaginary part of
    exactly zero.
    """
    x = np.asarray(samples, dtype=float).ravel()
    us = np.atleast_1d(np.asarray(u, dtype=float))
    m = x.size
    vals = np.empty(us.shape, dtype=complex)
    se = np.empty(us.shape)
    for k, uk in enumerate(us):
        if uk == 0:
            vals[k], se[k] = 1.0, 0.0
            continue
        ux = uk * x
        c, s = np.cos(ux), np.sin(ux)
        mc, ms = math.fsum(c) / m, math.fsum(s) / m
        vals[k] = complex(mc, ms)
        var = (math.fsum((c - mc) ** 2) + math.fsum((s - ms) ** 2)) / max(m - 1, 1)
        se[k] = math.sqrt(var / m)
    return vals, se


def median_of_means(x, groups: int = 32) -> float:
    """Median of the means of ``groups`` contiguous, equal-size blocks (tail remainder dropped)."""
    x = np.asarray(x, dtype=float).ravel()
    if groups < 1 or x.size < groups:
        raise ValueError("need at least one sample per group")
    k = x.size // groups
    return float(np.median(x[: k * groups].reshape(groups, k).mean(axis=1)))


# ---------------------------------------------------------------------------
# complexity exponents
# ---------------------------------------------------------------------------

def complexity_E(p, rho, r):
    """Sample-complexity exponent ``p (r + 1) / ((p - 1)(rho + r))``."""
    if p <= 1:
        raise ValueError("p must be > 1")
    if rho + r <= 0:
        raise ValueError("rho + r must be > 0")
    return p * (r + 1) / ((p - 1) * (rho + r))


def complexity_iterations(eps, p, rho, r):
    """``(N_eps, n_eps)``: iterations and samples needed for ``E|theta_N - theta*|**p <= eps``,
    from ``N ~ eps ** (-p / ((p-1)(rho+r)))`` and ``n ~ N ** (r+1)``."""
    if not eps > 0:
        raise ValueError("eps must be > 0")
    if p <= 1:
        raise ValueError("p must be > 1")
    if rho + r <= 0:
        raise ValueError("rho + r must be > 0")
    n_iter = eps ** (-p / ((p - 1) * (rho + r)))
    return n_iter, n_iter ** (r + 1)


def complexity_B(alpha, r):
    """Averaging confidence-width exponent ``(1 - r(alpha-1)) / (alpha (1 + r))``."""
    if not 1 < alpha < 2:
        raise ValueError("alpha must lie in (1, 2)")
    if r < 0:
        raise ValueError("r must be >= 0")
    return (1 - r * (alpha - 1)) / (alpha * (1 + r))
