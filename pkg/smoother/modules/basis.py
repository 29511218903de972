"""Cubic B-spline basis systems anchored on a working grid."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.interpolate import BSpline

logger = logging.getLogger(__name__)

ORDER = 4
PINV_RTOL = 1e-10
EXACT_SOLVE_MAX_COND = 1e8


@dataclass(frozen=True)
class WorkingGrid:
    points: np.ndarray
    domain: tuple

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        lo, hi = float(self.domain[0]), float(self.domain[1])
        if points.ndim != 1 or points.size == 0:
            raise ValueError('Working grid must be a nonempty 1-D array')
        if np.any(np.diff(points) <= 0):
            raise ValueError('Working grid must be strictly increasing')
        if points[0] < lo or points[-1] > hi:
            raise ValueError(f'Working grid leaves the domain [{lo}, {hi}]')
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'domain', (lo, hi))

    @property
    def L(self):
        return self.points.size


@dataclass(frozen=True)
class BasisSystem:
    order: int
    knots: np.ndarray
    grid: WorkingGrid
    matrix: np.ndarray = field(repr=False)
    pinv: np.ndarray = field(repr=False)

    @property
    def K(self):
        return self.matrix.shape[1]

    @property
    def domain(self):
        return self.grid.domain

    def to_dict(self):
        return {
            'order': self.order,
            'knots': self.knots.tolist(),
            'working_grid': self.grid.points.tolist(),
            'domain': list(self.domain),
        }


def select_working_grid(pooled_grid, L, domain=None) -> WorkingGrid:
    """(1/(L+1), ..., L/(L+1)) percentiles of the pooled observation grid."""
    if L < ORDER:
        raise ValueError(f'Working grid needs L >= {ORDER} points for cubic splines, got {L}')
    pooled = np.sort(np.asarray(pooled_grid, dtype=float))
    if pooled.size == 0:
        raise ValueError('Pooled observation grid is empty')

    levels = np.arange(1, L + 1) / (L + 1)
    points = np.quantile(pooled, levels, method='linear')
    if np.any(np.diff(points) <= 0):
        raise ValueError(f'Pooled grid has too many ties for a working grid of length {L}')
    if domain is None:
        domain = (pooled[0], pooled[-1])
    return WorkingGrid(points=points, domain=tuple(domain))


def averaged_knots(grid: WorkingGrid, K, order=ORDER):
    """Boundary knots of full multiplicity plus knot-averaged interior knots."""
    lo, hi = grid.domain
    tau = grid.points
    window = order - 1
    interior = np.array([tau[j + 1:j + 1 + window].mean() for j in range(K - order)])
    return np.concatenate([np.full(order, lo), interior, np.full(order, hi)])


def _design(knots, order, t):
    return BSpline.design_matrix(t, knots, order - 1).toarray()


def _generalized_inverse(matrix):
    K, L = matrix.shape[1], matrix.shape[0]
    u, s, vt = linalg.svd(matrix, full_matrices=False)
    cond = s[0] / s[-1] if s[-1] > 0 else np.inf

    if K == L and cond < EXACT_SOLVE_MAX_COND:
        lu = linalg.lu_factor(matrix)
        return linalg.lu_solve(lu, np.eye(L))

    logger.warning(f'Basis matrix is ill-conditioned (cond={cond:.3g}); using truncated SVD inverse')
    keep = s > PINV_RTOL * s[0]
    return (vt[keep].T / s[keep]) @ u[:, keep].T


def build_basis(grid: WorkingGrid, K=None) -> BasisSystem:
    if K is None:
        K = grid.L
    if K != grid.L:
        raise ValueError(f'Only K = L is supported (K={K}, L={grid.L})')
    if K < ORDER:
        raise ValueError(f'Cubic B-splines need K >= {ORDER}, got {K}')

    knots = averaged_knots(grid, K)
    matrix = _design(knots, ORDER, grid.points)
    return BasisSystem(
        order=ORDER,
        knots=knots,
        grid=grid,
        matrix=matrix,
        pinv=_generalized_inverse(matrix),
    )


def evaluate_basis(system: BasisSystem, t):
    """Rows hold (b_1(t_j), ..., b_K(t_j))."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    lo, hi = system.domain
    if np.any(t < lo) or np.any(t > hi):
        raise ValueError(f'Evaluation points fall outside the basis domain [{lo}, {hi}]')
    return _design(system.knots, system.order, t)


def coefficients_from_values(system: BasisSystem, z_on_tau):
    z = np.asarray(z_on_tau, dtype=float)
    if z.shape[0] != system.grid.L:
        raise ValueError(f'Expected {system.grid.L} values on the working grid, got {z.shape[0]}')
    return system.pinv @ z
