"""Hierarchical model types, induced coefficient priors and hyper-prior elicitation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .baseline import css_smooth_dataset, smoothed_cross_sectional_mean
from .basis import BasisSystem, coefficients_from_values
from .covariance import MaternParams, empirical_covariance_smoothed, matern_matrix, repair_pd, symmetrize

logger = logging.getLogger(__name__)

DEFAULT_C = 1.0
DEFAULT_DELTA = 5.0
DEFAULT_A_EPS = 3.0
DEFAULT_A_S = 2.0
DEFAULT_MATERN_NU = 2.5
DEFAULT_MATERN_RHO_FRACTION = 0.2
INIT_JITTER = 1e-6
VARIANCE_FLOOR = 1e-8

OVERRIDE_KEYS = {'c', 'delta', 'a_eps', 'b_eps', 'a_s', 'b_s', 'matern_rho', 'matern_nu', 'bandwidth'}


@dataclass(frozen=True)
class Curve:
    curve_id: str
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.size < 1:
            raise ValueError(f'Curve {self.curve_id!r} has an empty grid')
        if grid.shape != values.shape:
            raise ValueError(f'Curve {self.curve_id!r}: grid and values differ in length')
        if np.any(np.diff(grid) <= 0):
            raise ValueError(f'Curve {self.curve_id!r}: grid must be strictly increasing')
        if not np.all(np.isfinite(values)):
            raise ValueError(f'Curve {self.curve_id!r} has non-finite values')
        object.__setattr__(self, 'curve_id', str(self.curve_id))
        object.__setattr__(self, 'grid', grid)
        object.__setattr__(self, 'values', values)

    @property
    def p(self):
        return self.grid.size


@dataclass(frozen=True)
class FunctionalDataset:
    curves: tuple
    domain: tuple = None

    def __post_init__(self):
        curves = tuple(self.curves)
        if not curves:
            raise ValueError('Functional dataset needs at least one curve')
        ids = [curve.curve_id for curve in curves]
        if len(set(ids)) != len(ids):
            raise ValueError('Curve ids must be unique')
        object.__setattr__(self, 'curves', curves)

        lo = min(curve.grid[0] for curve in curves)
        hi = max(curve.grid[-1] for curve in curves)
        if self.domain is None:
            object.__setattr__(self, 'domain', (float(lo), float(hi)))
        else:
            d_lo, d_hi = float(self.domain[0]), float(self.domain[1])
            if lo < d_lo or hi > d_hi:
                raise ValueError(f'Observations fall outside the declared domain [{d_lo}, {d_hi}]')
            object.__setattr__(self, 'domain', (d_lo, d_hi))

    @property
    def n(self):
        return len(self.curves)

    @property
    def sizes(self):
        return np.array([curve.p for curve in self.curves])

    @property
    def total_points(self):
        return int(self.sizes.sum())

    @cached_property
    def pooled_grid(self):
        return np.unique(np.concatenate([curve.grid for curve in self.curves]))

    @cached_property
    def is_common_grid(self):
        first = self.curves[0].grid
        return all(curve.grid.shape == first.shape and np.array_equal(curve.grid, first) for curve in self.curves)

    def with_values(self, values):
        curves = tuple(replace(curve, values=v) for curve, v in zip(self.curves, values))
        return FunctionalDataset(curves=curves, domain=self.domain)


@dataclass(frozen=True)
class HyperParams:
    mu0: np.ndarray
    c: float
    delta: float
    A: np.ndarray
    a_eps: float
    b_eps: float
    a_s: float
    b_s: float

    def __post_init__(self):
        mu0 = np.asarray(self.mu0, dtype=float)
        A = np.asarray(self.A, dtype=float)
        if A.shape != (mu0.size, mu0.size):
            raise ValueError(f'A must be {mu0.size}x{mu0.size}, got {A.shape}')
        if not np.allclose(A, A.T, atol=1e-10):
            raise ValueError('A must be symmetric')
        if np.linalg.eigvalsh(A)[0] <= 0:
            raise ValueError('A must be positive definite')
        if not self.c > 0:
            raise ValueError(f'c must be positive, got {self.c}')
        if not self.delta > 2:
            raise ValueError(f'delta must exceed 2 for a finite prior mean, got {self.delta}')
        for name in ('a_eps', 'b_eps', 'a_s', 'b_s'):
            if not getattr(self, name) > 0:
                raise ValueError(f'{name} must be positive, got {getattr(self, name)}')
        object.__setattr__(self, 'mu0', mu0)
        object.__setattr__(self, 'A', symmetrize(A))

    @property
    def sigma_s2_prior_mean(self):
        # Gamma(a_s, rate b_s)
        return self.a_s / self.b_s

    @property
    def sigma_eps2_prior_mean(self):
        return self.b_eps / (self.a_eps - 1.0) if self.a_eps > 1 else np.inf

    def to_dict(self):
        return {
            'mu0': self.mu0.tolist(),
            'c': self.c,
            'delta': self.delta,
            'A': self.A.tolist(),
            'a_eps': self.a_eps,
            'b_eps': self.b_eps,
            'a_s': self.a_s,
            'b_s': self.b_s,
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(**{key: payload[key] for key in ('mu0', 'c', 'delta', 'A', 'a_eps', 'b_eps', 'a_s', 'b_s')})


@dataclass(frozen=True)
class InducedPrior:
    m0: np.ndarray
    psi: np.ndarray
    c: float
    delta: float

    @property
    def K(self):
        return self.m0.size


@dataclass
class McmcState:
    zeta: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    sigma_eps2: float
    sigma_s2: float

    def check(self):
        n, K = self.zeta.shape
        if self.mu.shape != (K,) or self.sigma.shape != (K, K):
            raise ValueError('State dimensions are inconsistent')
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-10):
            raise ValueError('Sigma_zeta is not symmetric')
        if np.linalg.eigvalsh(self.sigma)[0] <= 0:
            raise ValueError('Sigma_zeta is not positive definite')
        if not (self.sigma_eps2 > 0 and self.sigma_s2 > 0):
            raise ValueError('Variance parameters must be positive')
        return self

    def copy(self):
        return McmcState(
            zeta=self.zeta.copy(),
            mu=self.mu.copy(),
            sigma=self.sigma.copy(),
            sigma_eps2=self.sigma_eps2,
            sigma_s2=self.sigma_s2,
        )

    def to_dict(self):
        return {
            'zeta': self.zeta.tolist(),
            'mu': self.mu.tolist(),
            'sigma': self.sigma.tolist(),
            'sigma_eps2': self.sigma_eps2,
            'sigma_s2': self.sigma_s2,
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(
            zeta=np.atleast_2d(np.asarray(payload['zeta'], dtype=float)),
            mu=np.asarray(payload['mu'], dtype=float),
            sigma=np.atleast_2d(np.asarray(payload['sigma'], dtype=float)),
            sigma_eps2=float(payload['sigma_eps2']),
            sigma_s2=float(payload['sigma_s2']),
        )


def moment_matched_sigma_eps(sigma2_hat, shape=DEFAULT_A_EPS):
    """IG(a, b) with prior mean b / (a - 1) equal to the residual variance estimate."""
    return shape, (shape - 1.0) * max(sigma2_hat, VARIANCE_FLOOR)


def moment_matched_sigma_s(delta, empirical_trace, prior_trace, shape=DEFAULT_A_S):
    """Gamma(a, rate b) with mean a / b equal to (delta - 2) * tr(Sigma_emp) / tr(A)."""
    target = max((delta - 2.0) * empirical_trace / prior_trace, VARIANCE_FLOOR)
    return shape, shape / target


def _check_overrides(overrides):
    overrides = dict(overrides or {})
    unknown = set(overrides) - OVERRIDE_KEYS
    if unknown:
        raise ValueError(f'Unknown hyper-parameter overrides: {sorted(unknown)}')
    for key, value in overrides.items():
        if value is None:
            continue
        if key == 'delta' and not value > 2:
            raise ValueError(f'delta override must exceed 2, got {value}')
        if not value > 0:
            raise ValueError(f'{key} override must be positive, got {value}')
    return {key: value for key, value in overrides.items() if value is not None}


def elicit_hyperparams(data: FunctionalDataset, basis: BasisSystem, stationary=True, overrides=None,
                       smoothed=None) -> HyperParams:
    """Data-driven hyper-priors matched to empirical moments of the CSS-smoothed data."""
    overrides = _check_overrides(overrides)
    if smoothed is None:
        smoothed = css_smooth_dataset(data)
    tau = basis.grid.points
    lo, hi = basis.domain

    mu0 = smoothed_cross_sectional_mean(data).evaluate(tau)
    c = overrides.get('c', DEFAULT_C)
    delta = overrides.get('delta', DEFAULT_DELTA)

    if stationary:
        params = MaternParams(
            rho=overrides.get('matern_rho', DEFAULT_MATERN_RHO_FRACTION * (hi - lo)),
            nu=overrides.get('matern_nu', DEFAULT_MATERN_NU),
            sigma2=1.0,
        )
        A = matern_matrix(tau, params).values
    else:
        surface = empirical_covariance_smoothed(data, basis.grid, overrides.get('bandwidth')).values
        A = repair_pd(surface / np.mean(np.diag(surface)))

    a_eps, b_eps = moment_matched_sigma_eps(smoothed.sigma2)
    a_eps = overrides.get('a_eps', a_eps)
    b_eps = overrides.get('b_eps', b_eps)

    curves_on_tau = np.vstack([fit.evaluate(tau) for fit in smoothed.fits])
    if data.n >= 2:
        empirical_trace = float(np.trace(np.cov(curves_on_tau, rowvar=False)))
    else:
        empirical_trace = float(np.var(np.concatenate([curve.values for curve in data.curves])) * tau.size)
    a_s, b_s = moment_matched_sigma_s(delta, empirical_trace, float(np.trace(A)),
                                      shape=overrides.get('a_s', DEFAULT_A_S))
    b_s = overrides.get('b_s', b_s)

    hp = HyperParams(mu0=mu0, c=c, delta=delta, A=A, a_eps=a_eps, b_eps=b_eps, a_s=a_s, b_s=b_s)
    logger.info(
        f'Elicited hyper-priors: c={c}, delta={delta}, a_eps={a_eps:.3g}, b_eps={b_eps:.3g}, '
        f"a_s={a_s:.3g}, b_s={b_s:.3g} ({'Matern' if stationary else 'empirical'} A)"
    )
    return hp


def induce_prior(hp: HyperParams, basis: BasisSystem) -> InducedPrior:
    L = basis.grid.L
    if hp.mu0.size != L or hp.A.shape != (L, L):
        raise ValueError(f'Hyper-parameters live on a grid of {hp.mu0.size} points, basis expects {L}')
    m0 = basis.pinv @ hp.mu0
    psi = repair_pd(basis.pinv @ hp.A @ basis.pinv.T)
    return InducedPrior(m0=m0, psi=psi, c=hp.c, delta=hp.delta)


def initialize_state(data: FunctionalDataset, basis: BasisSystem, hp: HyperParams, prior=None,
                     smoothed=None) -> McmcState:
    """Empirical starting values: CSS-smoothed curves mapped to coefficients."""
    if prior is None:
        prior = induce_prior(hp, basis)
    if smoothed is None:
        smoothed = css_smooth_dataset(data)

    tau = basis.grid.points
    z_tau = np.vstack([fit.evaluate(tau) for fit in smoothed.fits])
    zeta = coefficients_from_values(basis, z_tau.T).T
    mu = zeta.mean(axis=0)
    sigma_s2 = hp.sigma_s2_prior_mean

    if data.n >= 2:
        sample_cov = np.atleast_2d(np.cov(zeta, rowvar=False))
        jitter = INIT_JITTER * max(np.trace(sample_cov) / basis.K, 1.0)
        sigma = repair_pd(sample_cov + jitter * np.eye(basis.K))
    else:
        logger.warning('Only one curve: initializing Sigma_zeta at its prior mean')
        sigma = repair_pd(sigma_s2 * prior.psi / (prior.delta - 2.0))

    state = McmcState(
        zeta=zeta,
        mu=mu,
        sigma=sigma,
        sigma_eps2=max(smoothed.sigma2, VARIANCE_FLOOR),
        sigma_s2=sigma_s2,
    )
    return state.check()
