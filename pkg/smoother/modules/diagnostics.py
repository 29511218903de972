"""Convergence, goodness-of-fit and scoring."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import special

logger = logging.getLogger(__name__)

PSRF_THRESHOLD = 1.1
PSRF_MIN_LENGTH = 10
GOF_LEVEL = 0.05
P_QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)


@dataclass(frozen=True)
class PsrfValue:
    value: float
    degenerate: bool = False

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class PsrfReport:
    values: dict
    degenerate: tuple
    threshold: float = PSRF_THRESHOLD

    @property
    def failing(self):
        return sorted(name for name, value in self.values.items() if not value < self.threshold)

    @property
    def passed(self):
        return not self.failing

    def to_dict(self):
        return {
            'values': {name: _finite_or_none(value) for name, value in sorted(self.values.items())},
            'degenerate': list(self.degenerate),
            'threshold': self.threshold,
            'failing': self.failing,
            'passed': self.passed,
        }


@dataclass(frozen=True)
class GofReport:
    draw_p_values: np.ndarray = field(repr=False)
    per_curve: dict
    level: float = GOF_LEVEL

    @property
    def median_p(self):
        return float(np.median(self.draw_p_values))

    @property
    def lack_of_fit(self):
        return self.median_p < self.level

    @property
    def curves_below_level(self):
        return sum(1 for p in self.per_curve.values() if p < self.level)

    def to_dict(self):
        quantiles = np.quantile(self.draw_p_values, P_QUANTILES)
        return {
            'median_p': self.median_p,
            'mean_p': float(np.mean(self.draw_p_values)),
            'p_quantiles': {str(q): float(v) for q, v in zip(P_QUANTILES, quantiles)},
            'draws': int(self.draw_p_values.size),
            'per_curve_median_p': {curve_id: float(p) for curve_id, p in self.per_curve.items()},
            'curves_below_level': self.curves_below_level,
            'level': self.level,
            'lack_of_fit': self.lack_of_fit,
        }


@dataclass(frozen=True)
class FunctionalEstimate:
    """Signals on each curve's grid plus mean and covariance on a reference grid."""

    signals: list
    grid: np.ndarray
    mean: np.ndarray
    covariance: np.ndarray
    sigma_eps2: float = None


def _finite_or_none(value):
    value = float(value)
    return value if np.isfinite(value) else None


def psrf(chains) -> PsrfValue:
    """Split-half Gelman-Rubin potential scale reduction factor."""
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2 or chains.shape[0] < 2:
        raise ValueError('PSRF needs at least 2 chains given as a (chains, draws) array')
    if chains.shape[1] < PSRF_MIN_LENGTH:
        raise ValueError(f'PSRF needs chains of length >= {PSRF_MIN_LENGTH}, got {chains.shape[1]}')

    half = chains.shape[1] // 2
    split = np.vstack([chains[:, :half], chains[:, -half:]])
    m = split.shape[1]

    within = np.mean(np.var(split, axis=1, ddof=1))
    between = m * np.var(np.mean(split, axis=1), ddof=1)
    if within <= 0:
        return PsrfValue(1.0 if between <= 0 else np.inf, degenerate=True)

    pooled = (m - 1) / m * within + between / m
    return PsrfValue(float(np.sqrt(pooled / within)))


def psrf_report(traces, threshold=PSRF_THRESHOLD) -> PsrfReport:
    """PSRF for every monitored scalar; traces maps name -> (chains, draws)."""
    values, degenerate = {}, []
    for name, chains in traces.items():
        result = psrf(chains)
        values[name] = result.value
        if result.degenerate:
            degenerate.append(name)
    report = PsrfReport(values=values, degenerate=tuple(sorted(degenerate)), threshold=threshold)
    if report.passed:
        logger.info(f'PSRF below {threshold} for all {len(values)} monitored scalars')
    else:
        logger.warning(f"PSRF at or above {threshold} for: {', '.join(report.failing)}")
    return report


def chi2_survival(statistic, dof):
    """P(chi2_dof > statistic) via the regularized upper incomplete gamma."""
    return special.gammaincc(np.asarray(dof, dtype=float) / 2.0, np.asarray(statistic, dtype=float) / 2.0)


def gof_from_discrepancies(discrepancies, sizes, curve_ids, level=GOF_LEVEL) -> GofReport:
    """discrepancies[g, i] = sum_j ((Y_ij - Z_ij) / sigma_eps)^2 for draw g and curve i."""
    discrepancies = np.atleast_2d(np.asarray(discrepancies, dtype=float))
    sizes = np.asarray(sizes, dtype=float)
    if discrepancies.shape[0] == 0:
        raise ValueError('Goodness-of-fit needs at least one posterior draw')
    if discrepancies.shape[1] != sizes.size:
        raise ValueError(f'Expected {sizes.size} curves, got {discrepancies.shape[1]}')

    draw_p = chi2_survival(discrepancies.sum(axis=1), sizes.sum())
    curve_p = chi2_survival(discrepancies, sizes[None, :])
    per_curve = {str(cid): float(p) for cid, p in zip(curve_ids, np.median(curve_p, axis=0))}
    return GofReport(draw_p_values=draw_p, per_curve=per_curve, level=level)


def gof_pdm(observed, signal_draws, sigma_eps2_draws, level=GOF_LEVEL) -> GofReport:
    """Pivotal discrepancy check of posterior draws against the observations.

    signal_draws[g] holds draw g of every curve's signal, concatenated in curve order.
    """
    y = np.concatenate([curve.values for curve in observed.curves])
    signal_draws = np.atleast_2d(np.asarray(signal_draws, dtype=float))
    sigma_eps2_draws = np.atleast_1d(np.asarray(sigma_eps2_draws, dtype=float))
    if signal_draws.shape[1] != y.size:
        raise ValueError(f'Signal draws cover {signal_draws.shape[1]} points, data have {y.size}')
    if signal_draws.shape[0] != sigma_eps2_draws.size:
        raise ValueError('Need one sigma_eps2 draw per signal draw')

    offsets = np.concatenate([[0], np.cumsum(observed.sizes)])
    squared = (y[None, :] - signal_draws) ** 2 / sigma_eps2_draws[:, None]
    per_curve = np.add.reduceat(squared, offsets[:-1], axis=1)
    return gof_from_discrepancies(per_curve, observed.sizes, [c.curve_id for c in observed.curves], level)


def _rmse(a, b):
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


def rmse_suite(estimate: FunctionalEstimate, truth: FunctionalEstimate) -> dict:
    if not np.array_equal(np.shape(estimate.grid), np.shape(truth.grid)) or not np.allclose(estimate.grid, truth.grid):
        raise ValueError('Estimate and truth live on different reference grids')
    if len(estimate.signals) != len(truth.signals):
        raise ValueError(f'Estimate has {len(estimate.signals)} curves, truth has {len(truth.signals)}')
    for est, tru in zip(estimate.signals, truth.signals):
        if np.shape(est) != np.shape(tru):
            raise ValueError('Signal estimate and truth differ in grid length')

    scores = {
        'signal': _rmse(np.concatenate(estimate.signals), np.concatenate(truth.signals)),
        'mean': _rmse(estimate.mean, truth.mean),
        'covariance': _rmse(estimate.covariance, truth.covariance),
        'sigma_eps2': None,
    }
    if estimate.sigma_eps2 is not None and truth.sigma_eps2 is not None:
        scores['sigma_eps2'] = abs(float(estimate.sigma_eps2) - float(truth.sigma_eps2))
    return scores


def coverage(lower, upper, truth):
    """Fraction of points where truth lies inside [lower, upper]."""
    lower, upper, truth = (np.asarray(x, dtype=float) for x in (lower, upper, truth))
    if not lower.shape == upper.shape == truth.shape:
        raise ValueError(f'Interval and truth shapes differ: {lower.shape}, {upper.shape}, {truth.shape}')
    if truth.size == 0:
        raise ValueError('Coverage needs at least one point')
    return float(np.mean((truth >= lower) & (truth <= upper)))
