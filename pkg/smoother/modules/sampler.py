"""Gibbs sampler in basis-coefficient space.

One sweep runs the steps in order: curve coefficients, mean and covariance
coefficients, reconstruction on the requested grids, residual variance and
finally the prior scale of the covariance.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .basis import BasisSystem, evaluate_basis
from .covariance import FactorizationError, repair_pd, safe_cholesky, symmetrize
from .model import FunctionalDataset, HyperParams, InducedPrior, McmcState, induce_prior, initialize_state

logger = logging.getLogger(__name__)

REFERENCE_GRID_SIZE = 40
CI_LEVEL = 0.95
SCALAR_TRACES = ('sigma_eps2', 'sigma_s2', 'trace_sigma_zeta', 'zeta_first', 'zeta_middle')


class SamplerError(RuntimeError):
    """A sweep could not be completed; carries the sweep index and the last good state."""

    def __init__(self, sweep, role, state=None, chain=0):
        self.sweep = sweep
        self.role = role
        self.state = state
        self.chain = chain
        super().__init__(f'Chain {chain} failed at sweep {sweep} while updating {role}')


@dataclass(frozen=True)
class McmcConfig:
    burn_in: int = 2000
    posterior_samples: int = 10000
    thinning: int = 1
    seed: int = 0
    chains: int = 2
    reservoir_size: int = 2000
    fixed_sigma_eps2: float = None

    def __post_init__(self):
        for name in ('posterior_samples', 'thinning', 'chains', 'reservoir_size'):
            if getattr(self, name) < 1:
                raise ValueError(f'{name} must be at least 1, got {getattr(self, name)}')
        if self.burn_in < 0:
            raise ValueError(f'burn_in must be nonnegative, got {self.burn_in}')
        if self.fixed_sigma_eps2 is not None and not self.fixed_sigma_eps2 > 0:
            raise ValueError(f'fixed_sigma_eps2 must be positive, got {self.fixed_sigma_eps2}')

    @property
    def sweeps(self):
        return self.burn_in + self.posterior_samples

    @property
    def retained(self):
        return self.posterior_samples // self.thinning

    def to_dict(self):
        return {
            'burn_in': self.burn_in,
            'posterior_samples': self.posterior_samples,
            'thinning': self.thinning,
            'seed': self.seed,
            'chains': self.chains,
            'reservoir_size': self.reservoir_size,
            'fixed_sigma_eps2': self.fixed_sigma_eps2,
        }


class RunningSummary:
    """Running mean plus an evenly subsampled, fixed-size store of draws for quantiles."""

    def __init__(self, shape, expected, reservoir_size, keep_draws=True):
        self.shape = tuple(shape)
        self.count = 0
        self.total = np.zeros(self.shape)
        self.stride = max(1, math.ceil(expected / reservoir_size))
        capacity = math.ceil(expected / self.stride) if keep_draws else 0
        self.draws = np.empty((capacity,) + self.shape)
        self.filled = 0

    def update(self, value):
        self.total += value
        if self.count % self.stride == 0 and self.filled < self.draws.shape[0]:
            self.draws[self.filled] = value
            self.filled += 1
        self.count += 1

    @property
    def mean(self):
        return self.total / max(self.count, 1)

    @property
    def nbytes(self):
        return self.total.nbytes + self.draws.nbytes

    def interval(self, level=CI_LEVEL):
        if self.filled == 0:
            raise ValueError('No stored draws to form an interval')
        alpha = 1.0 - level
        lower, upper = np.quantile(self.draws[:self.filled], [alpha / 2.0, 1.0 - alpha / 2.0], axis=0)
        return lower, upper

    @classmethod
    def merge(cls, summaries):
        merged = cls.__new__(cls)
        merged.shape = summaries[0].shape
        merged.count = sum(s.count for s in summaries)
        merged.total = sum(s.total for s in summaries)
        merged.stride = summaries[0].stride
        merged.draws = np.concatenate([s.draws[:s.filled] for s in summaries], axis=0)
        merged.filled = merged.draws.shape[0]
        return merged

    def to_payload(self):
        return {
            'shape': list(self.shape),
            'count': self.count,
            'total': self.total.tolist(),
            'stride': self.stride,
            'draws': self.draws[:self.filled].tolist(),
        }

    @classmethod
    def from_payload(cls, payload):
        summary = cls.__new__(cls)
        summary.shape = tuple(payload['shape'])
        summary.count = payload['count']
        summary.total = np.asarray(payload['total'], dtype=float).reshape(summary.shape)
        summary.stride = payload['stride']
        summary.draws = np.asarray(payload['draws'], dtype=float).reshape((-1,) + summary.shape)
        summary.filled = summary.draws.shape[0]
        return summary


@dataclass
class Reconstruction:
    signals: list
    mean: np.ndarray
    covariance: np.ndarray
    covariance_tau: np.ndarray
    cross_covariance: list = field(default_factory=list)


@dataclass
class PosteriorDraws:
    curve_ids: list
    sizes: np.ndarray
    output_grid: np.ndarray
    working_grid: np.ndarray
    signals: RunningSummary
    mean: RunningSummary
    covariance: RunningSummary
    covariance_tau: RunningSummary
    traces: dict
    discrepancies: np.ndarray
    elapsed: float = 0.0
    final_states: list = field(default_factory=list, repr=False)

    @property
    def chains(self):
        return next(iter(self.traces.values())).shape[0]

    @property
    def draws(self):
        return self.signals.count

    @property
    def nbytes(self):
        summaries = (self.signals, self.mean, self.covariance, self.covariance_tau)
        traces = sum(trace.nbytes for trace in self.traces.values())
        return sum(s.nbytes for s in summaries) + traces + self.discrepancies.nbytes

    @classmethod
    def merge(cls, parts):
        """Pool chains in the order given."""
        first = parts[0]
        return cls(
            curve_ids=first.curve_ids,
            sizes=first.sizes,
            output_grid=first.output_grid,
            working_grid=first.working_grid,
            signals=RunningSummary.merge([p.signals for p in parts]),
            mean=RunningSummary.merge([p.mean for p in parts]),
            covariance=RunningSummary.merge([p.covariance for p in parts]),
            covariance_tau=RunningSummary.merge([p.covariance_tau for p in parts]),
            traces={name: np.vstack([p.traces[name] for p in parts]) for name in first.traces},
            discrepancies=np.vstack([p.discrepancies for p in parts]),
            elapsed=max(p.elapsed for p in parts),
            final_states=[s for p in parts for s in p.final_states],
        )

    def to_payload(self):
        return {
            'curve_ids': list(self.curve_ids),
            'sizes': self.sizes.tolist(),
            'output_grid': self.output_grid.tolist(),
            'working_grid': self.working_grid.tolist(),
            'signals': self.signals.to_payload(),
            'mean': self.mean.to_payload(),
            'covariance': self.covariance.to_payload(),
            'covariance_tau': self.covariance_tau.to_payload(),
            'traces': {name: trace.tolist() for name, trace in self.traces.items()},
            'discrepancies': self.discrepancies.tolist(),
            'elapsed': self.elapsed,
            'final_states': [state.to_dict() for state in self.final_states],
        }

    @classmethod
    def from_payload(cls, payload):
        return cls(
            curve_ids=list(payload['curve_ids']),
            sizes=np.asarray(payload['sizes'], dtype=int),
            output_grid=np.asarray(payload['output_grid'], dtype=float),
            working_grid=np.asarray(payload['working_grid'], dtype=float),
            signals=RunningSummary.from_payload(payload['signals']),
            mean=RunningSummary.from_payload(payload['mean']),
            covariance=RunningSummary.from_payload(payload['covariance']),
            covariance_tau=RunningSummary.from_payload(payload['covariance_tau']),
            traces={name: np.asarray(trace, dtype=float) for name, trace in payload['traces'].items()},
            discrepancies=np.asarray(payload['discrepancies'], dtype=float),
            elapsed=payload['elapsed'],
            final_states=[McmcState.from_dict(s) for s in payload['final_states']],
        )


@dataclass
class PosteriorSummary:
    curve_ids: list
    curve_grids: list
    output_grid: np.ndarray
    working_grid: np.ndarray
    signals: list
    mean: dict
    covariance: dict
    covariance_tau: np.ndarray
    scalars: dict
    level: float = CI_LEVEL


def summarize(draws: PosteriorDraws, curve_grids, level=CI_LEVEL) -> PosteriorSummary:
    """Posterior means and pointwise credible intervals."""
    offsets = np.concatenate([[0], np.cumsum(draws.sizes)])
    sig_lo, sig_hi = draws.signals.interval(level)
    sig_mean = draws.signals.mean
    signals = [
        {
            'mean': sig_mean[a:b],
            'lower': sig_lo[a:b],
            'upper': sig_hi[a:b],
        }
        for a, b in zip(offsets[:-1], offsets[1:])
    ]
    mean_lo, mean_hi = draws.mean.interval(level)
    cov_lo, cov_hi = draws.covariance.interval(level)

    alpha = 1.0 - level
    scalars = {}
    for name in ('sigma_eps2', 'sigma_s2'):
        values = draws.traces[name].ravel()
        lo, hi = np.quantile(values, [alpha / 2.0, 1.0 - alpha / 2.0])
        scalars[name] = {'mean': float(values.mean()), 'lower': float(lo), 'upper': float(hi)}

    return PosteriorSummary(
        curve_ids=list(draws.curve_ids),
        curve_grids=[np.asarray(g) for g in curve_grids],
        output_grid=draws.output_grid,
        working_grid=draws.working_grid,
        signals=signals,
        mean={'mean': draws.mean.mean, 'lower': mean_lo, 'upper': mean_hi},
        covariance={'mean': draws.covariance.mean, 'lower': cov_lo, 'upper': cov_hi},
        covariance_tau=draws.covariance_tau.mean,
        scalars=scalars,
        level=level,
    )


def reference_grid(data: FunctionalDataset, size=REFERENCE_GRID_SIZE):
    """Scoring grid: the common grid when there is one, otherwise equally spaced over the domain."""
    if data.is_common_grid:
        return data.curves[0].grid.copy()
    lo, hi = data.domain
    return np.linspace(lo, hi, size)


def curve_ranks(curve_ids):
    """Position of each curve in sorted id order."""
    order = sorted(range(len(curve_ids)), key=lambda i: str(curve_ids[i]))
    ranks = np.empty(len(order), dtype=int)
    ranks[order] = np.arange(len(order))
    return ranks


def _draw_zeta(btb, bty, sigma_inv, sigma_inv_mu, sigma_eps2, noise):
    """Gaussian conditional draw; bty and noise may hold one column per curve sharing btb."""
    precision = btb / sigma_eps2 + sigma_inv
    factor, _ = safe_cholesky(precision, role='zeta precision')
    prior_term = sigma_inv_mu if bty.ndim == 1 else sigma_inv_mu[:, None]
    mean = linalg.cho_solve((factor, True), bty / sigma_eps2 + prior_term, check_finite=False)
    return mean + linalg.solve_triangular(factor, noise, lower=True, trans='T', check_finite=False)


def sample_zeta_i(y, design, mu, sigma, sigma_eps2, rng):
    """Draw one curve's coefficients from their Gaussian full conditional."""
    if not sigma_eps2 > 0:
        raise ValueError(f'sigma_eps2 must be positive, got {sigma_eps2}')
    y = np.asarray(y, dtype=float)
    design = np.atleast_2d(np.asarray(design, dtype=float))
    factor, _ = safe_cholesky(sigma, role='Sigma_zeta')
    K = factor.shape[0]
    sigma_inv = linalg.cho_solve((factor, True), np.eye(K))
    sigma_inv_mu = linalg.cho_solve((factor, True), np.asarray(mu, dtype=float))
    return _draw_zeta(design.T @ design, design.T @ y, sigma_inv, sigma_inv_mu, sigma_eps2,
                      rng.standard_normal(K))


def sample_mu_zeta(zeta, m0, c, sigma, rng, sigma_factor=None):
    zeta = np.atleast_2d(zeta)
    n = zeta.shape[0]
    if n < 1:
        raise ValueError('Need at least one curve to update the mean coefficients')
    if sigma_factor is None:
        sigma_factor, _ = safe_cholesky(sigma, role='Sigma_zeta')
    center = (zeta.sum(axis=0) + c * np.asarray(m0)) / (n + c)
    return center + sigma_factor @ rng.standard_normal(center.size) / np.sqrt(n + c)


def draw_inverse_wishart(delta, psi, rng, role='Psi_tilde'):
    """IW(delta, psi) in Dawid's convention, via Bartlett's decomposition.

    Equivalent to the inverse of a Wishart(delta + K - 1, psi^-1) draw;
    the mean is psi / (delta - 2).
    """
    K = psi.shape[0]
    df = delta + K - 1
    factor, _ = safe_cholesky(psi, role=role)
    bartlett = np.tril(rng.standard_normal((K, K)), k=-1)
    bartlett[np.diag_indices(K)] = np.sqrt(rng.chisquare(df - np.arange(K)))
    # Sigma = L A^-T A^-1 L^T with psi = L L^T
    root = linalg.solve_triangular(bartlett, factor.T, lower=True, check_finite=False)
    return symmetrize(root.T @ root)


def sample_sigma_zeta(zeta, mu, m0, c, delta, psi_scaled, rng):
    zeta = np.atleast_2d(zeta)
    n = zeta.shape[0]
    resid = zeta - mu
    offset = np.asarray(mu) - np.asarray(m0)
    scatter = resid.T @ resid + c * np.outer(offset, offset) + psi_scaled
    return draw_inverse_wishart(n + 1 + delta, repair_pd(scatter), rng)


def sigma_eps_conditional(residual_sum_squares, total_points, a_eps, b_eps):
    """(shape, rate) of the inverse-gamma full conditional of sigma_eps^2."""
    return a_eps + total_points / 2.0, b_eps + residual_sum_squares / 2.0


def sample_sigma_eps(residual_sum_squares, total_points, a_eps, b_eps, rng):
    if residual_sum_squares < 0:
        raise ValueError('Residual sum of squares must be nonnegative')
    shape, rate = sigma_eps_conditional(residual_sum_squares, total_points, a_eps, b_eps)
    return rate / rng.gamma(shape)


def sigma_s_conditional(sigma, a_zeta, delta, K, a_s, b_s, sigma_factor=None):
    """(shape, rate) of the gamma full conditional of sigma_s^2."""
    if sigma_factor is None:
        sigma_factor, _ = safe_cholesky(sigma, role='Sigma_zeta')
    trace = np.trace(linalg.cho_solve((sigma_factor, True), a_zeta, check_finite=False))
    return a_s + (delta + K - 1.0) * K / 2.0, b_s + trace / 2.0


def sample_sigma_s(sigma, a_zeta, delta, K, a_s, b_s, rng, sigma_factor=None):
    shape, rate = sigma_s_conditional(sigma, a_zeta, delta, K, a_s, b_s, sigma_factor)
    return rng.gamma(shape, 1.0 / rate)


def reconstruct(state: McmcState, basis: BasisSystem, curve_grids, output_grid) -> Reconstruction:
    """Function-space views of a coefficient-space state."""
    designs = [evaluate_basis(basis, grid) for grid in curve_grids]
    b_out = evaluate_basis(basis, output_grid)
    b_tau = basis.matrix
    return Reconstruction(
        signals=[design @ zeta for design, zeta in zip(designs, state.zeta)],
        mean=b_out @ state.mu,
        covariance=symmetrize(b_out @ state.sigma @ b_out.T),
        covariance_tau=symmetrize(b_tau @ state.sigma @ b_tau.T),
        cross_covariance=[design @ state.sigma @ b_tau.T for design in designs],
    )


def prior_draw(prior: InducedPrior, hp: HyperParams, n, rng):
    """A state drawn from the joint prior."""
    K = prior.K
    sigma_s2 = rng.gamma(hp.a_s, 1.0 / hp.b_s)
    sigma = draw_inverse_wishart(prior.delta, sigma_s2 * prior.psi, rng, role='prior scale')
    factor, _ = safe_cholesky(sigma, role='Sigma_zeta')
    mu = prior.m0 + factor @ rng.standard_normal(K) / np.sqrt(prior.c)
    zeta = mu + rng.standard_normal((n, K)) @ factor.T
    sigma_eps2 = hp.b_eps / rng.gamma(hp.a_eps)
    return McmcState(zeta=zeta, mu=mu, sigma=sigma, sigma_eps2=sigma_eps2, sigma_s2=sigma_s2)


class GibbsSampler:
    """Precomputed per-curve quantities plus one-sweep updates.

    Curve noise for a sweep comes from one stream keyed by (seed, chain, sweep);
    curve i takes the row at its rank in sorted id order, so the chain does not
    depend on the order the curves are listed in. When every curve shares one
    design matrix the coefficient updates are solved as one batch.
    """

    def __init__(self, designs, observations, prior: InducedPrior, hp: HyperParams, curve_ids=None,
                 seed=0, chain_index=0, fixed_sigma_eps2=None):
        self.designs = [np.asarray(design, dtype=float) for design in designs]
        self.prior = prior
        self.hp = hp
        self.curve_ids = list(curve_ids) if curve_ids is not None else [f'{i:09d}' for i in range(len(designs))]
        self.ranks = curve_ranks(self.curve_ids)
        self.seed = seed
        self.chain_index = chain_index
        self.fixed_sigma_eps2 = fixed_sigma_eps2
        first = self.designs[0]
        self.shared_design = all(d.shape == first.shape and np.array_equal(d, first) for d in self.designs)
        self.btb = [design.T @ design for design in self.designs]
        self.total_points = sum(design.shape[0] for design in self.designs)
        self.set_observations(observations)
        self._sigma_factor = None

    @classmethod
    def from_dataset(cls, data: FunctionalDataset, basis: BasisSystem, hp: HyperParams, prior=None,
                     seed=0, chain_index=0, fixed_sigma_eps2=None):
        prior = prior if prior is not None else induce_prior(hp, basis)
        designs = [evaluate_basis(basis, curve.grid) for curve in data.curves]
        return cls(
            designs,
            [curve.values for curve in data.curves],
            prior,
            hp,
            curve_ids=[curve.curve_id for curve in data.curves],
            seed=seed,
            chain_index=chain_index,
            fixed_sigma_eps2=fixed_sigma_eps2,
        )

    @property
    def n(self):
        return len(self.designs)

    def set_observations(self, observations):
        self.observations = [np.asarray(y, dtype=float) for y in observations]
        self.bty = [design.T @ y for design, y in zip(self.designs, self.observations)]
        self.stacked = np.vstack(self.observations) if self.shared_design else None
        self.bty_block = np.column_stack(self.bty) if self.shared_design else None

    def curve_noise(self, sweep, K):
        """Standard normal rows for every curve, ordered like the curves."""
        block = np.random.default_rng([self.seed, self.chain_index, sweep]).standard_normal((self.n, K))
        return block[self.ranks]

    def _update_zeta(self, state, sigma_inv, sigma_inv_mu, noise):
        if self.shared_design:
            state.zeta = _draw_zeta(self.btb[0], self.bty_block, sigma_inv, sigma_inv_mu, state.sigma_eps2,
                                    noise.T).T
            return
        for i in range(self.n):
            state.zeta[i] = _draw_zeta(self.btb[i], self.bty[i], sigma_inv, sigma_inv_mu, state.sigma_eps2,
                                       noise[i])

    def sweep(self, state: McmcState, sweep_index, rng):
        """One Gibbs sweep; updates state in place and returns (signals, per-curve RSS)."""
        prior, hp = self.prior, self.hp
        K = prior.K
        if self.fixed_sigma_eps2 is not None:
            state.sigma_eps2 = self.fixed_sigma_eps2

        role = 'Sigma_zeta'
        try:
            if self._sigma_factor is None:
                self._sigma_factor, _ = safe_cholesky(state.sigma, role=role)
            factor = self._sigma_factor
            sigma_inv = linalg.cho_solve((factor, True), np.eye(K), check_finite=False)
            sigma_inv_mu = linalg.cho_solve((factor, True), state.mu, check_finite=False)

            role = 'zeta'
            self._update_zeta(state, sigma_inv, sigma_inv_mu, self.curve_noise(sweep_index, K))

            role = 'mu_zeta'
            state.mu = sample_mu_zeta(state.zeta, prior.m0, prior.c, state.sigma, rng, sigma_factor=factor)
            role = 'Sigma_zeta'
            state.sigma = sample_sigma_zeta(state.zeta, state.mu, prior.m0, prior.c, prior.delta,
                                            state.sigma_s2 * prior.psi, rng)
            self._sigma_factor, _ = safe_cholesky(state.sigma, role=role)

            if self.shared_design:
                fitted = state.zeta @ self.designs[0].T
                signals = list(fitted)
                rss = np.sum((self.stacked - fitted) ** 2, axis=1)
            else:
                signals = [design @ zeta for design, zeta in zip(self.designs, state.zeta)]
                rss = np.array([np.sum((y - z) ** 2) for y, z in zip(self.observations, signals)])

            role = 'sigma_eps2'
            if self.fixed_sigma_eps2 is None:
                state.sigma_eps2 = sample_sigma_eps(rss.sum(), self.total_points, hp.a_eps, hp.b_eps, rng)
            role = 'sigma_s2'
            state.sigma_s2 = sample_sigma_s(state.sigma, prior.psi, prior.delta, K, hp.a_s, hp.b_s, rng,
                                            sigma_factor=self._sigma_factor)
        except FactorizationError as exc:
            self._sigma_factor = None
            raise SamplerError(sweep_index, f'{role} ({exc.role})', state=state.copy(),
                               chain=self.chain_index) from exc
        return signals, rss


def run_chain(data: FunctionalDataset, basis: BasisSystem, hp: HyperParams, cfg: McmcConfig, chain_index=0,
              output_grid=None, prior=None, smoothed=None) -> PosteriorDraws:
    """Run one chain: initialization, burn-in, then retained sweeps at the thinning interval."""
    started = time.perf_counter()
    prior = prior if prior is not None else induce_prior(hp, basis)
    output_grid = reference_grid(data) if output_grid is None else np.asarray(output_grid, dtype=float)

    sampler = GibbsSampler.from_dataset(data, basis, hp, prior, seed=cfg.seed, chain_index=chain_index,
                                        fixed_sigma_eps2=cfg.fixed_sigma_eps2)
    state = initialize_state(data, basis, hp, prior=prior, smoothed=smoothed)
    if cfg.fixed_sigma_eps2 is not None:
        state.sigma_eps2 = cfg.fixed_sigma_eps2
    rng = np.random.default_rng([cfg.seed, chain_index])

    b_out = evaluate_basis(basis, output_grid)
    b_tau = basis.matrix
    retained = cfg.retained
    G, L = output_grid.size, basis.grid.L

    signals = RunningSummary((data.total_points,), retained, cfg.reservoir_size)
    mean = RunningSummary((G,), retained, cfg.reservoir_size)
    covariance = RunningSummary((G, G), retained, cfg.reservoir_size)
    covariance_tau = RunningSummary((L, L), retained, cfg.reservoir_size, keep_draws=False)
    traces = {name: np.empty(retained) for name in SCALAR_TRACES}
    discrepancies = np.empty((retained, data.n))
    mid_curve, mid_coef = math.ceil(data.n / 2) - 1, math.ceil(basis.K / 2) - 1

    logger.info(f'Chain {chain_index}: {cfg.burn_in} burn-in + {cfg.posterior_samples} sweeps, '
                f'n={data.n}, K={basis.K}')
    kept = 0
    for sweep in range(cfg.sweeps):
        curve_signals, rss = sampler.sweep(state, sweep, rng)
        if sweep < cfg.burn_in or (sweep - cfg.burn_in) % cfg.thinning != 0 or kept >= retained:
            continue

        signals.update(np.concatenate(curve_signals))
        mean.update(b_out @ state.mu)
        covariance.update(symmetrize(b_out @ state.sigma @ b_out.T))
        covariance_tau.update(symmetrize(b_tau @ state.sigma @ b_tau.T))
        traces['sigma_eps2'][kept] = state.sigma_eps2
        traces['sigma_s2'][kept] = state.sigma_s2
        traces['trace_sigma_zeta'][kept] = np.trace(state.sigma)
        traces['zeta_first'][kept] = state.zeta[0, 0]
        traces['zeta_middle'][kept] = state.zeta[mid_curve, mid_coef]
        discrepancies[kept] = rss / state.sigma_eps2
        kept += 1

    elapsed = time.perf_counter() - started
    logger.info(f'Chain {chain_index} finished in {elapsed:.1f}s')
    return PosteriorDraws(
        curve_ids=[curve.curve_id for curve in data.curves],
        sizes=data.sizes,
        output_grid=output_grid,
        working_grid=basis.grid.points,
        signals=signals,
        mean=mean,
        covariance=covariance,
        covariance_tau=covariance_tau,
        traces={name: trace[None, :kept] for name, trace in traces.items()},
        discrepancies=discrepancies[:kept],
        elapsed=elapsed,
        final_states=[state],
    )
