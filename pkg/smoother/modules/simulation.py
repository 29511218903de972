"""Synthetic functional data: Matern GP curves, optional transforms, noisy observations."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .covariance import MaternParams, matern_matrix, safe_cholesky
from .model import Curve, FunctionalDataset

logger = logging.getLogger(__name__)

GRID_MODES = ('common', 'random')
TRANSFORMS = ('none', 'nonstationary', 'hermite')
HERMITE_WEIGHT = 0.2


@dataclass(frozen=True)
class MeanSpec:
    """mu(t) = amplitude * sin(frequency * t)."""

    amplitude: float = 3.0
    frequency: float = 4.0

    def __call__(self, t):
        return self.amplitude * np.sin(self.frequency * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class SimDesign:
    n: int = 30
    grid_mode: str = 'common'
    p: int = 40
    domain: tuple = (0.0, np.pi / 2)
    mean: MeanSpec = field(default_factory=MeanSpec)
    covariance: MaternParams = field(default_factory=lambda: MaternParams(rho=0.5, nu=3.5, sigma2=5.0))
    transform: str = 'none'
    noise_sd: float = np.sqrt(5.0) / 2.0
    seed: int = 0
    reference_size: int = 40

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f'n must be at least 1, got {self.n}')
        if self.p < 2:
            raise ValueError(f'p must be at least 2, got {self.p}')
        if self.grid_mode not in GRID_MODES:
            raise ValueError(f'grid_mode must be one of {GRID_MODES}, got {self.grid_mode!r}')
        if self.transform not in TRANSFORMS:
            raise ValueError(f'transform must be one of {TRANSFORMS}, got {self.transform!r}')
        if not self.noise_sd >= 0:
            raise ValueError(f'noise_sd must be nonnegative, got {self.noise_sd}')
        lo, hi = float(self.domain[0]), float(self.domain[1])
        if not hi > lo:
            raise ValueError(f'Domain must have positive length, got ({lo}, {hi})')
        if self.transform == 'nonstationary' and lo < 0:
            raise ValueError('The nonstationary warp t**(2/3) needs a nonnegative domain')
        object.__setattr__(self, 'domain', (lo, hi))

    @property
    def snr(self):
        return np.sqrt(self.covariance.sigma2) / self.noise_sd if self.noise_sd > 0 else np.inf

    def to_dict(self):
        return {
            'n': self.n,
            'grid_mode': self.grid_mode,
            'p': self.p,
            'domain': list(self.domain),
            'mean': {'amplitude': self.mean.amplitude, 'frequency': self.mean.frequency},
            'covariance': {
                'rho': self.covariance.rho,
                'nu': self.covariance.nu,
                'sigma2': self.covariance.sigma2,
            },
            'transform': self.transform,
            'noise_sd': self.noise_sd,
            'seed': self.seed,
            'reference_size': self.reference_size,
        }


@dataclass(frozen=True)
class SimulationResult:
    design: SimDesign
    truth: FunctionalDataset
    observed: FunctionalDataset
    reference_grid: np.ndarray
    true_mean: np.ndarray
    true_cov: np.ndarray

    @property
    def noise_variance(self):
        return self.design.noise_sd**2


def warp(t):
    return np.power(np.asarray(t, dtype=float), 2.0 / 3.0)


def amplitude(t):
    return np.asarray(t, dtype=float) + 0.5


def nonstationary_transform(x_warped, t):
    """h(t) * X(s(t)); x_warped must already be the GP drawn at s(t)."""
    return amplitude(t) * np.asarray(x_warped, dtype=float)


def hermite_transform(x):
    x = np.asarray(x, dtype=float)
    return HERMITE_WEIGHT * (x**2 - 1.0) + x


def make_grids(mode, n, p, domain, rng):
    if p < 2:
        raise ValueError(f'Grids need at least 2 points, got {p}')
    lo, hi = domain
    if mode == 'common':
        grid = np.linspace(lo, hi, p)
        return [grid.copy() for _ in range(n)]
    if mode == 'random':
        return [np.sort(rng.uniform(lo, hi, size=p)) for _ in range(n)]
    raise ValueError(f'Unknown grid mode {mode!r}')


def true_moments(design: SimDesign, grid):
    """Mean and covariance of the (possibly transformed) signal process on grid."""
    grid = np.asarray(grid, dtype=float)
    if design.transform == 'nonstationary':
        s = warp(grid)
        h = amplitude(grid)
        return h * design.mean(s), np.outer(h, h) * matern_matrix(s, design.covariance).values

    mu = design.mean(grid)
    cov = matern_matrix(grid, design.covariance).values
    if design.transform == 'hermite':
        variance = np.diag(cov)
        mean = HERMITE_WEIGHT * (mu**2 + variance - 1.0) + mu
        slope = 1.0 + 2.0 * HERMITE_WEIGHT * mu
        return mean, cov * np.outer(slope, slope) + 2.0 * HERMITE_WEIGHT**2 * cov**2
    return mu, cov


def _draw_signal(design: SimDesign, grid, rng, factor_cache):
    sim_grid = warp(grid) if design.transform == 'nonstationary' else grid
    x = design.mean(sim_grid)

    if design.covariance.sigma2 > 0:
        key = sim_grid.tobytes()
        if key not in factor_cache:
            cov = matern_matrix(sim_grid, design.covariance).values
            factor_cache[key], _ = safe_cholesky(cov, role='simulation covariance')
        x = x + factor_cache[key] @ rng.standard_normal(grid.size)

    if design.transform == 'nonstationary':
        return nonstationary_transform(x, grid)
    if design.transform == 'hermite':
        return hermite_transform(x)
    return x


def simulate_dataset(design: SimDesign) -> SimulationResult:
    """Draw truth and noisy observations; one RNG substream for the grids and one per curve."""
    children = np.random.SeedSequence(design.seed).spawn(design.n + 1)
    grids = make_grids(design.grid_mode, design.n, design.p, design.domain, np.random.default_rng(children[0]))

    factor_cache = {}
    truth_curves, observed_curves = [], []
    width = len(str(design.n))
    for i, (grid, child) in enumerate(zip(grids, children[1:])):
        rng = np.random.default_rng(child)
        z = _draw_signal(design, grid, rng, factor_cache)
        noise = design.noise_sd * rng.standard_normal(grid.size) if design.noise_sd > 0 else 0.0
        curve_id = f'curve_{i + 1:0{width}d}'
        truth_curves.append(Curve(curve_id=curve_id, grid=grid, values=z))
        observed_curves.append(Curve(curve_id=curve_id, grid=grid, values=z + noise))

    if design.grid_mode == 'common':
        reference = grids[0].copy()
    else:
        reference = np.linspace(design.domain[0], design.domain[1], design.reference_size)
    true_mean, true_cov = true_moments(design, reference)

    logger.info(
        f'Simulated {design.n} {design.grid_mode}-grid curves (p={design.p}, transform={design.transform}, '
        f'seed={design.seed})'
    )
    return SimulationResult(
        design=design,
        truth=FunctionalDataset(curves=tuple(truth_curves), domain=design.domain),
        observed=FunctionalDataset(curves=tuple(observed_curves), domain=design.domain),
        reference_grid=reference,
        true_mean=true_mean,
        true_cov=true_cov,
    )
