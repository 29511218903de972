"""Per-curve cubic smoothing spline with GCV penalty selection (the CSS comparator)."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.interpolate import CubicSpline

from .covariance import symmetrize

logger = logging.getLogger(__name__)

LAMBDA_GRID_SIZE = 50
LAMBDA_RANGE = (1e-8, 1e4)
MIN_SPLINE_POINTS = 4


@dataclass(frozen=True)
class SplineFit:
    t: np.ndarray
    fitted: np.ndarray
    lam: float
    edf: float
    gcv: float
    rss: float
    _spline: CubicSpline = field(repr=False, compare=False)

    def evaluate(self, x):
        """Natural spline through the fitted values, extended linearly past the ends."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = self._spline(x)
        lo, hi = self.t[0], self.t[-1]
        below, above = x < lo, x > hi
        if np.any(below):
            out[below] = self.fitted[0] + self._spline(lo, 1) * (x[below] - lo)
        if np.any(above):
            out[above] = self.fitted[-1] + self._spline(hi, 1) * (x[above] - hi)
        return out


@dataclass(frozen=True)
class MeanFallbackFit:
    """Stand-in for a curve too short to smooth on its own: the cross-sectional mean on its grid."""

    t: np.ndarray
    fitted: np.ndarray
    source: SplineFit = field(repr=False, compare=False)
    lam: float = None
    rss: float = 0.0

    @property
    def edf(self):
        return float(self.t.size)

    def evaluate(self, x):
        return self.source.evaluate(x)


@dataclass(frozen=True)
class SmoothedDataset:
    fits: tuple
    smoothed: object
    sigma2: float
    short_curves: tuple = ()


def roughness_matrix(t):
    """Matrix K with g' K g = integral of the natural spline's squared second derivative."""
    h = np.diff(t)
    n = t.size
    Q = np.zeros((n, n - 2))
    R = np.zeros((n - 2, n - 2))
    for j in range(1, n - 1):
        Q[j - 1, j - 1] = 1.0 / h[j - 1]
        Q[j, j - 1] = -1.0 / h[j - 1] - 1.0 / h[j]
        Q[j + 1, j - 1] = 1.0 / h[j]
        R[j - 1, j - 1] = (h[j - 1] + h[j]) / 3.0
        if j < n - 2:
            R[j - 1, j] = R[j, j - 1] = h[j] / 6.0
    return Q @ linalg.solve(R, Q.T, assume_a='pos')


def lambda_grid(K):
    scale = K.shape[0] / np.trace(K)
    return scale * np.logspace(np.log10(LAMBDA_RANGE[0]), np.log10(LAMBDA_RANGE[1]), LAMBDA_GRID_SIZE)


def solve_penalized(y, K, lam):
    """Fitted values g solving (I + lam K) g = y."""
    system = np.eye(K.shape[0]) + lam * K
    return linalg.solve(system, y, assume_a='pos')


def css_fit(t, y, lambda_grid_values=None) -> SplineFit:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size != y.size:
        raise ValueError(f'Grid and values differ in length ({t.size} vs {y.size})')
    if t.size < MIN_SPLINE_POINTS:
        raise ValueError(f'Smoothing spline needs at least {MIN_SPLINE_POINTS} points, got {t.size}')
    diffs = np.diff(t)
    if np.any(diffs == 0):
        raise ValueError('Smoothing spline grid has duplicate points')
    if np.any(diffs < 0):
        raise ValueError('Smoothing spline grid must be sorted')

    n = t.size
    K = symmetrize(roughness_matrix(t))
    # Eigen-decomposition of K gives every smoother S = U diag(1/(1+lam d)) U' at once
    d, U = linalg.eigh(K)
    d = np.clip(d, 0.0, None)
    uy = U.T @ y

    lambdas = lambda_grid(K) if lambda_grid_values is None else np.asarray(lambda_grid_values, dtype=float)
    best = None
    for lam in lambdas:
        shrink = 1.0 / (1.0 + lam * d)
        fitted = U @ (shrink * uy)
        rss = float(np.sum((y - fitted) ** 2))
        edf = float(shrink.sum())
        gcv = n * rss / (n - edf) ** 2 if n - edf > 1e-12 else np.inf
        if best is None or gcv < best[3]:
            best = (lam, fitted, edf, gcv, rss)

    lam, fitted, edf, gcv, rss = best
    return SplineFit(
        t=t,
        fitted=fitted,
        lam=float(lam),
        edf=edf,
        gcv=gcv,
        rss=rss,
        _spline=CubicSpline(t, fitted, bc_type='natural'),
    )


def smoothed_cross_sectional_mean(data):
    """CSS fit of the averaged values at each pooled grid point.

    On a common grid this is the smoothed sample mean; on random grids every
    pooled point carries its own observations, so the pooled scatter is smoothed.
    """
    t_all = np.concatenate([curve.grid for curve in data.curves])
    y_all = np.concatenate([curve.values for curve in data.curves])
    unique_t, inverse = np.unique(t_all, return_inverse=True)
    if unique_t.size < MIN_SPLINE_POINTS:
        raise ValueError(f'Data are degenerate: fewer than {MIN_SPLINE_POINTS} distinct observation points overall')
    means = np.bincount(inverse, weights=y_all) / np.bincount(inverse)
    return css_fit(unique_t, means)


def css_smooth_dataset(data) -> SmoothedDataset:
    """Fit every curve independently and pool the residual variance estimate.

    Curves with fewer than four points take the smoothed cross-sectional mean
    and stay out of the pooled estimate.
    """
    short = tuple(curve.curve_id for curve in data.curves if curve.p < MIN_SPLINE_POINTS)
    mean_fit = smoothed_cross_sectional_mean(data) if short else None

    fits = []
    for curve in data.curves:
        if curve.p < MIN_SPLINE_POINTS:
            fits.append(MeanFallbackFit(t=curve.grid, fitted=mean_fit.evaluate(curve.grid), source=mean_fit))
        else:
            fits.append(css_fit(curve.grid, curve.values))
    fits = tuple(fits)

    rss = sum(fit.rss for fit in fits)
    dof = sum(fit.t.size - fit.edf for fit in fits)
    if len(short) == data.n:
        # No curve can be smoothed alone: residuals about the mean curve
        resid = [curve.values - mean_fit.evaluate(curve.grid) for curve in data.curves]
        rss = float(sum(np.sum(r**2) for r in resid))
        dof = data.total_points - mean_fit.edf
        logger.warning('Every curve has fewer than 4 points; residual variance taken about the mean curve')
    if dof <= 0:
        raise ValueError('No residual degrees of freedom left after smoothing')
    sigma2 = rss / dof
    if short:
        logger.warning(f'{len(short)} curves have fewer than {MIN_SPLINE_POINTS} points; '
                       f'using the cross-sectional mean for them')

    smoothed = data.with_values([fit.fitted for fit in fits])
    logger.info(f'Smoothed {data.n} curves by CSS; residual variance estimate {sigma2:.4g}')
    return SmoothedDataset(fits=fits, smoothed=smoothed, sigma2=sigma2, short_curves=short)


def css_moment_estimates(fits, reference_grid):
    """Sample mean and covariance of the pre-smoothed curves on the reference grid."""
    curves = np.vstack([fit.evaluate(reference_grid) for fit in fits])
    mean = curves.mean(axis=0)
    if curves.shape[0] < 2:
        return mean, np.zeros((mean.size, mean.size))
    return mean, np.cov(curves, rowvar=False)
