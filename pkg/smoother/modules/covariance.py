"""Covariance kernels and positive-definite matrix helpers."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

logger = logging.getLogger(__name__)

PD_CLIP = 1e-8
JITTER_START = 1e-10


class FactorizationError(np.linalg.LinAlgError):
    """Cholesky factorization failed even with the largest allowed jitter."""

    def __init__(self, role, jitter):
        self.role = role
        self.jitter = jitter
        super().__init__(f'Cholesky factorization of {role} failed (jitter reached {jitter:.3g})')


@dataclass(frozen=True)
class MaternParams:
    rho: float
    nu: float
    sigma2: float = 1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f'Matern scale rho must be positive, got {self.rho}')
        if not self.nu > 0:
            raise ValueError(f'Matern smoothness nu must be positive, got {self.nu}')
        if not self.sigma2 >= 0:
            raise ValueError(f'Matern variance sigma2 must be nonnegative, got {self.sigma2}')


@dataclass(frozen=True)
class CovMatrix:
    values: np.ndarray
    grid: np.ndarray

    @property
    def dim(self):
        return self.values.shape[0]


def _half_integer_correlation(x, nu):
    # Closed forms exp(-x) * poly(x) for nu = 1/2, 3/2, 5/2, 7/2
    if nu == 0.5:
        poly = 1.0
    elif nu == 1.5:
        poly = 1.0 + x
    elif nu == 2.5:
        poly = 1.0 + x + x**2 / 3.0
    else:
        poly = 1.0 + x + 2.0 * x**2 / 5.0 + x**3 / 15.0
    return poly * np.exp(-x)


def matern_correlation(d, rho, nu):
    """Matern correlation at distance(s) d; equals 1 at d = 0."""
    if not rho > 0 or not nu > 0:
        raise ValueError(f'Matern parameters must be positive (rho={rho}, nu={nu})')
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError('Matern distances must be nonnegative')

    x = np.sqrt(2.0 * nu) * d / rho
    if nu in (0.5, 1.5, 2.5, 3.5):
        return _half_integer_correlation(x, nu)

    out = np.ones_like(x)
    positive = x > 0
    xp = x[positive]
    with np.errstate(over='ignore', under='ignore', invalid='ignore'):
        log_scale = (1.0 - nu) * np.log(2.0) - special.gammaln(nu)
        values = np.exp(log_scale + nu * np.log(xp)) * special.kv(nu, xp)
    # kv underflows to 0 far out in the tail, which is the right limit
    out[positive] = np.nan_to_num(values, nan=0.0, posinf=1.0)
    return np.clip(out, 0.0, 1.0)


def matern_matrix(grid, params: MaternParams) -> CovMatrix:
    grid = np.asarray(grid, dtype=float)
    distances = np.abs(grid[:, None] - grid[None, :])
    values = params.sigma2 * matern_correlation(distances, params.rho, params.nu)
    return CovMatrix(values=0.5 * (values + values.T), grid=grid)


def symmetrize(matrix):
    matrix = np.asarray(matrix, dtype=float)
    return 0.5 * (matrix + matrix.T)


def repair_pd(matrix, clip=PD_CLIP):
    """Clip eigenvalues below clip * largest eigenvalue."""
    matrix = symmetrize(matrix)
    eigvals, eigvecs = linalg.eigh(matrix)
    lam_max = eigvals[-1]
    floor = clip * lam_max if lam_max > 0 else clip
    if eigvals[0] >= floor:
        return matrix
    eigvals = np.maximum(eigvals, floor)
    return symmetrize((eigvecs * eigvals) @ eigvecs.T)


def safe_cholesky(matrix, role='matrix'):
    """Lower Cholesky factor of matrix + jitter * I.

    Jitter starts at 0, then 1e-10, growing tenfold per retry up to
    1e-6 * trace / dim. Returns (factor, jitter).
    """
    matrix = np.asarray(matrix, dtype=float)
    dim = matrix.shape[0]
    max_jitter = 1e-6 * np.trace(matrix) / dim
    eye = np.eye(dim)

    jitter = 0.0
    while True:
        try:
            factor = linalg.cholesky(matrix + jitter * eye, lower=True, check_finite=False)
            if jitter > 0:
                logger.warning(f'Applied jitter {jitter:.3g} to factorize {role}')
            return factor, jitter
        except linalg.LinAlgError:
            pass
        next_jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
        if next_jitter > max_jitter:
            raise FactorizationError(role, jitter)
        jitter = next_jitter


def empirical_covariance_smoothed(data, grid, bandwidth=None) -> CovMatrix:
    """Binned raw covariance of the curves, smoothed with a 2-D Nadaraya-Watson average."""
    if data.n < 2:
        raise ValueError(f'Empirical covariance needs at least 2 curves, got {data.n}')

    tau = np.asarray(grid.points, dtype=float)
    L = tau.size
    if bandwidth is None:
        lo, hi = grid.domain
        bandwidth = 0.1 * (hi - lo)
    if not bandwidth > 0:
        raise ValueError(f'Smoothing bandwidth must be positive, got {bandwidth}')

    # Nearest working-grid cell for every observation
    cells = [np.abs(curve.grid[:, None] - tau[None, :]).argmin(axis=1) for curve in data.curves]

    cell_sum = np.zeros(L)
    cell_count = np.zeros(L)
    for curve, idx in zip(data.curves, cells):
        np.add.at(cell_sum, idx, curve.values)
        np.add.at(cell_count, idx, 1.0)
    cell_mean = np.divide(cell_sum, cell_count, out=np.zeros(L), where=cell_count > 0)

    cross_sum = np.zeros((L, L))
    cross_count = np.zeros((L, L))
    for curve, idx in zip(data.curves, cells):
        centered = curve.values - cell_mean[idx]
        np.add.at(cross_sum, (idx[:, None], idx[None, :]), np.outer(centered, centered))
        np.add.at(cross_count, (idx[:, None], idx[None, :]), 1.0)

    # Empty cells get filled by the kernel average of their neighbours
    weights = np.exp(-0.5 * ((tau[:, None] - tau[None, :]) / bandwidth) ** 2)
    numerator = weights @ cross_sum @ weights.T
    denominator = weights @ cross_count @ weights.T
    smoothed = np.divide(numerator, denominator, out=np.zeros((L, L)), where=denominator > 0)
    return CovMatrix(values=repair_pd(smoothed), grid=tau)
