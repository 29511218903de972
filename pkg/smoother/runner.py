import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path

import celery
import django
import numpy as np
import pandas as pd
import scipy
from django.utils import timezone

from . import __version__
from .models import Run
from .modules.base_config import ConfigError, FitConfig
from .modules.baseline import css_moment_estimates, css_smooth_dataset
from .modules.basis import WorkingGrid, build_basis, select_working_grid
from .modules.diagnostics import (GOF_LEVEL, FunctionalEstimate, coverage, gof_from_discrepancies, psrf_report,
                                  rmse_suite)
from .modules.model import Curve, FunctionalDataset, HyperParams, McmcState, elicit_hyperparams, induce_prior
from .modules.sampler import McmcConfig, PosteriorDraws, SamplerError, reference_grid, run_chain, summarize
from .modules.shared_utils import default_threads, dispatch, host_info
from .modules.simulation import SimulationResult, simulate_dataset
from .serializers import RunSerializer, build_design, build_fit_config
from .utils import (DataError, TruthBundle, atomic_write, read_json, sha256_file, write_frame, write_json,
                    write_long_csv, write_truth)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID_INPUT = 1
EXIT_UNCONVERGED = 2
EXIT_SAMPLER_FAILURE = 3
EXIT_EMPTY_CELL = 4

METRICS = ['signal', 'mean', 'covariance', 'sigma_eps2', 'coverage_signal', 'coverage_mean',
           'coverage_covariance', 'gof_median_p']


@dataclass
class FitResult:
    data: FunctionalDataset
    basis: object
    hp: HyperParams
    smoothed: object
    draws: PosteriorDraws
    summary: object
    psrf: object
    gof: object
    elapsed: float

    @property
    def converged(self):
        return self.psrf is None or self.psrf.passed


@dataclass
class Outcome:
    exit_code: int
    run: Run
    payload: object = None


def exit_code_for(exc):
    if isinstance(exc, SamplerError):
        return EXIT_SAMPLER_FAILURE
    if isinstance(exc, (ConfigError, DataError, ValueError, FileNotFoundError)):
        return EXIT_INVALID_INPUT
    return None


def software_versions():
    return {
        'babfsmooth': __version__,
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
        'django': django.get_version(),
        'celery': celery.__version__,
    }


def dataset_payload(data: FunctionalDataset):
    return {
        'domain': list(data.domain),
        'curves': [
            {'curve_id': c.curve_id, 't': c.grid.tolist(), 'y': c.values.tolist()} for c in data.curves
        ],
    }


def dataset_from_payload(payload) -> FunctionalDataset:
    curves = tuple(Curve(curve_id=c['curve_id'], grid=c['t'], values=c['y']) for c in payload['curves'])
    return FunctionalDataset(curves=curves, domain=tuple(payload['domain']))


def execute_chain(payload) -> PosteriorDraws:
    """Run one chain described by a JSON payload."""
    data = dataset_from_payload(payload['data'])
    grid = WorkingGrid(points=np.asarray(payload['working_grid']), domain=tuple(payload['data']['domain']))
    basis = build_basis(grid)
    hp = HyperParams.from_dict(payload['hyperparameters'])
    return run_chain(
        data,
        basis,
        hp,
        McmcConfig(**payload['mcmc']),
        chain_index=payload['chain'],
        output_grid=np.asarray(payload['output_grid']),
    )


def decode_chain(result) -> PosteriorDraws:
    if result.get('failed'):
        state = McmcState.from_dict(result['state']) if result.get('state') is not None else None
        raise SamplerError(result['sweep'], result['role'], state=state, chain=result['chain'])
    return PosteriorDraws.from_payload(result)


def fit_dataset(data: FunctionalDataset, cfg: FitConfig, output_grid=None, threads=1, distributed=True) -> FitResult:
    """Pre-smooth, build the basis, elicit priors, run the chains and summarize."""
    from .tasks import run_chain_task

    started = time.perf_counter()
    smoothed = css_smooth_dataset(data)
    grid = select_working_grid(data.pooled_grid, cfg.working_grid_size, domain=data.domain)
    basis = build_basis(grid)
    hp = elicit_hyperparams(data, basis, stationary=cfg.stationary, overrides=cfg.hyperparameters,
                            smoothed=smoothed)
    prior = induce_prior(hp, basis)
    output_grid = reference_grid(data, cfg.reference_size) if output_grid is None else np.asarray(output_grid)

    def local_chain(payload):
        return run_chain(data, basis, hp, cfg.mcmc, chain_index=payload['chain'], output_grid=output_grid,
                         prior=prior, smoothed=smoothed)

    chains = range(cfg.mcmc.chains)
    if distributed:
        shared = {
            'data': dataset_payload(data),
            'working_grid': grid.points.tolist(),
            'hyperparameters': hp.to_dict(),
            'mcmc': cfg.mcmc.to_dict(),
            'output_grid': output_grid.tolist(),
        }
        parts = dispatch(local_chain, run_chain_task, [dict(shared, chain=k) for k in chains], threads,
                         decode=decode_chain)
    else:
        parts = [local_chain({'chain': k}) for k in chains]

    draws = PosteriorDraws.merge(parts)
    summary = summarize(draws, [curve.grid for curve in data.curves], cfg.level)

    psrf = None
    if draws.chains >= 2 and draws.traces['sigma_eps2'].shape[1] >= 10:
        psrf = psrf_report(draws.traces, cfg.psrf_threshold)
    else:
        logger.warning("PSRF skipped: it needs at least 2 chains of 10 retained draws")

    gof = gof_from_discrepancies(draws.discrepancies, data.sizes, [c.curve_id for c in data.curves],
                                 cfg.gof_level)
    return FitResult(
        data=data,
        basis=basis,
        hp=hp,
        smoothed=smoothed,
        draws=draws,
        summary=summary,
        psrf=psrf,
        gof=gof,
        elapsed=time.perf_counter() - started,
    )


def truth_estimate(truth: TruthBundle, data: FunctionalDataset) -> FunctionalEstimate:
    ids = [c.curve_id for c in truth.truth.curves]
    if ids != [c.curve_id for c in data.curves]:
        raise DataError("Truth curves do not match the observed curves")
    return FunctionalEstimate(
        signals=[c.values for c in truth.truth.curves],
        grid=truth.grid,
        mean=truth.mean,
        covariance=truth.covariance,
        sigma_eps2=truth.noise_variance,
    )


def babf_estimate(result: FitResult) -> FunctionalEstimate:
    summary = result.summary
    return FunctionalEstimate(
        signals=[s['mean'] for s in summary.signals],
        grid=summary.output_grid,
        mean=summary.mean['mean'],
        covariance=summary.covariance['mean'],
        sigma_eps2=summary.scalars['sigma_eps2']['mean'],
    )


def css_estimate(smoothed, grid) -> FunctionalEstimate:
    mean, cov = css_moment_estimates(smoothed.fits, grid)
    return FunctionalEstimate(
        signals=[fit.fitted for fit in smoothed.fits],
        grid=np.asarray(grid),
        mean=mean,
        covariance=cov,
    )


def coverage_suite(result: FitResult, truth: FunctionalEstimate):
    summary = result.summary
    return {
        'signal': coverage(
            np.concatenate([s['lower'] for s in summary.signals]),
            np.concatenate([s['upper'] for s in summary.signals]),
            np.concatenate(truth.signals),
        ),
        'mean': coverage(summary.mean['lower'], summary.mean['upper'], truth.mean),
        'covariance': coverage(summary.covariance['lower'], summary.covariance['upper'], truth.covariance),
    }


def simulation_truth(sim: SimulationResult) -> TruthBundle:
    return TruthBundle(
        truth=sim.truth,
        grid=sim.reference_grid,
        mean=sim.true_mean,
        covariance=sim.true_cov,
        noise_variance=sim.noise_variance,
    )


def execute_replication(payload):
    """Simulate one replication of a design and score each requested method; returns table rows."""
    base = {'design': payload['design_name'], 'replication': payload['replication']}
    try:
        design = replace(build_design(payload['design']), seed=payload['design_seed'])
        cfg = build_fit_config(payload['fit'])
        cfg = replace(cfg, mcmc=replace(cfg.mcmc, seed=payload['mcmc_seed']))

        sim = simulate_dataset(design)
        truth = truth_estimate(simulation_truth(sim), sim.observed)
        rows = []
        smoothed = None
        if 'babf' in payload['methods']:
            result = fit_dataset(sim.observed, cfg, output_grid=sim.reference_grid, distributed=False)
            smoothed = result.smoothed
            covered = coverage_suite(result, truth)
            rows.append(dict(
                base,
                method='babf',
                **rmse_suite(babf_estimate(result), truth),
                coverage_signal=covered['signal'],
                coverage_mean=covered['mean'],
                coverage_covariance=covered['covariance'],
                gof_median_p=result.gof.median_p,
                psrf_passed=result.converged,
                elapsed=result.elapsed,
            ))
        if 'css' in payload['methods']:
            if smoothed is None:
                smoothed = css_smooth_dataset(sim.observed)
            rows.append(dict(base, method='css', **rmse_suite(css_estimate(smoothed, sim.reference_grid), truth)))
        return {'rows': rows}
    except Exception as exc:
        logger.warning(f"Replication {payload['replication']} of {payload['design_name']} failed: {exc}")
        return {'rows': [], 'error': dict(base, message=str(exc))}


def aggregate_table(rows, suite):
    """Mean and standard deviation per (design, method) cell, in suite order."""
    frame = pd.DataFrame(rows, columns=['design', 'method', 'replication'] + METRICS)
    frame = frame.sort_values(['design', 'method', 'replication'], kind='stable')

    records = []
    for entry in suite.designs:
        for method in suite.methods:
            cell = frame[(frame['design'] == entry.name) & (frame['method'] == method)]
            record = {'design': entry.name, 'method': method, 'replications': len(cell),
                      'failed': suite.replications - len(cell)}
            for metric in METRICS:
                values = pd.to_numeric(cell[metric], errors='coerce').dropna()
                record[f'{metric}_mean'] = values.mean() if len(values) else np.nan
                record[f'{metric}_sd'] = values.std(ddof=1) if len(values) > 1 else np.nan
            if method == 'babf':
                p_values = pd.to_numeric(cell['gof_median_p'], errors='coerce')
                record['gof_rejections'] = int((p_values < GOF_LEVEL).sum())
            records.append(record)

        if {'babf', 'css'} <= set(suite.methods):
            rows_here = frame[frame['design'] == entry.name].set_index('replication')
            babf = rows_here[rows_here['method'] == 'babf']
            css = rows_here[rows_here['method'] == 'css']
            both = babf.index.intersection(css.index)
            wins = {
                f'wins_{metric}_vs_css': int((babf.loc[both, metric] < css.loc[both, metric]).sum())
                for metric in ('signal', 'mean')
            }
            for record in records:
                if record['design'] == entry.name and record['method'] == 'babf':
                    record.update(wins)
    return pd.DataFrame(records)


class Runner:
    """Runs one CLI command against an output directory and records it in the run registry."""

    def __init__(self, out_dir, threads=None):
        self.out_dir = Path(out_dir)
        self.threads = threads or default_threads()
        self.logger = logging.getLogger(__name__)
        self.run = None

    def _start(self, kind, config):
        self.run = Run.objects.create(kind=kind, output_dir=str(self.out_dir), config=config)
        self.run.start()
        if kind != 'diagnose':
            self.out_dir.mkdir(parents=True, exist_ok=True)
        self.logger.info(f"Run {self.run.pk}: {kind} -> {self.out_dir}")

    def _fail(self, exc):
        code = exit_code_for(exc)
        self.logger.error(f"Run {self.run.pk} failed: {exc}")
        self.run.finish('failed', exit_code=code if code is not None else EXIT_INVALID_INPUT, message=str(exc))

    def _manifest(self, command, config, inputs=None, **extra):
        manifest = {
            'command': command,
            'run_id': self.run.pk,
            'run': RunSerializer(self.run).data,
            'config': config,
            'inputs': inputs or {},
            'software': software_versions(),
            'host': host_info(),
            'started_at': self.run.started_at.isoformat(),
            'completed_at': timezone.now().isoformat(),
        }
        manifest.update(extra)
        write_json(self.out_dir / 'manifest.json', manifest)
        return manifest

    def simulate(self, design):
        self._start('simulate', design.to_dict())
        try:
            sim = simulate_dataset(design)
            write_long_csv(self.out_dir / 'observed.csv', sim.observed)
            write_truth(self.out_dir, sim.truth, sim.reference_grid, sim.true_mean, sim.true_cov)
            self._manifest('simulate', design.to_dict(), design=design.to_dict(),
                           outputs={name: sha256_file(self.out_dir / name)
                                    for name in ('observed.csv', 'truth.csv', 'truth_mean.csv', 'truth_cov.csv')})
        except Exception as exc:
            self._fail(exc)
            raise
        self.run.finish('completed', exit_code=EXIT_OK)
        return Outcome(EXIT_OK, self.run, sim)

    def fit(self, data, cfg: FitConfig, data_path=None, truth: TruthBundle = None):
        self._start('fit', cfg.to_dict())
        try:
            data, output_grid = self._prepare_fit_data(data, cfg, truth)
            result = fit_dataset(data, cfg, output_grid=output_grid, threads=self.threads)
            self._finish_fit(result, data, cfg, data_path, truth)
        except SamplerError as exc:
            if exc.state is not None:
                write_json(self.out_dir / 'failed_state.json', {'chain': exc.chain, 'sweep': exc.sweep,
                                                                 'role': exc.role, 'state': exc.state.to_dict()})
            self._fail(exc)
            raise
        except Exception as exc:
            self._fail(exc)
            raise

        if result.converged:
            self.run.finish('completed', exit_code=EXIT_OK)
            return Outcome(EXIT_OK, self.run, result)
        message = f"PSRF above {cfg.psrf_threshold} for {', '.join(result.psrf.failing)}"
        self.run.finish('unconverged', exit_code=EXIT_UNCONVERGED, message=message)
        return Outcome(EXIT_UNCONVERGED, self.run, result)

    def _finish_fit(self, result: FitResult, data, cfg, data_path, truth):
        scores = coverages = None
        truth_block = None
        if truth is not None:
            truth_est = truth_estimate(truth, data)
            scores = {
                'babf': rmse_suite(babf_estimate(result), truth_est),
                'css': rmse_suite(css_estimate(result.smoothed, result.summary.output_grid), truth_est),
            }
            coverages = coverage_suite(result, truth_est)
            truth_block = {
                'signals': [{'curve_id': c.curve_id, 'values': c.values} for c in truth.truth.curves],
                'mean': truth.mean,
                'covariance': truth.covariance,
                'sigma_eps2': truth.noise_variance,
            }

        self._write_fit_outputs(result, cfg, scores, coverages, truth_block)
        inputs = {}
        if data_path is not None:
            inputs['data'] = {'path': str(data_path), 'sha256': sha256_file(data_path)}
        self._manifest(
            'fit',
            cfg.to_dict(),
            inputs=inputs,
            hyperparameters=result.hp.to_dict(),
            basis=result.basis.to_dict(),
            seeds={'mcmc': cfg.mcmc.seed, 'chains': [[cfg.mcmc.seed, k] for k in range(cfg.mcmc.chains)]},
        )

    def _prepare_fit_data(self, data, cfg, truth):
        lo, hi = data.domain
        if cfg.domain is not None:
            lo, hi = min(lo, cfg.domain[0]), max(hi, cfg.domain[1])
        output_grid = None
        if truth is not None:
            output_grid = truth.grid
            lo, hi = min(lo, output_grid[0]), max(hi, output_grid[-1])
            if truth.truth.domain is not None:
                lo, hi = min(lo, truth.truth.domain[0]), max(hi, truth.truth.domain[1])
        if (lo, hi) != data.domain:
            data = FunctionalDataset(curves=data.curves, domain=(lo, hi))
        return data, output_grid

    def _write_fit_outputs(self, result: FitResult, cfg, scores, coverages, truth_block):
        summary = result.summary
        results = {
            'version': 1,
            'signals': [
                {'curve_id': cid, 't': grid, **sig}
                for cid, grid, sig in zip(summary.curve_ids, summary.curve_grids, summary.signals)
            ],
            'mean_function': {'t': summary.output_grid, **summary.mean},
            'covariance': {'t': summary.output_grid, **summary.covariance},
            'covariance_working_grid': {'t': summary.working_grid, 'mean': summary.covariance_tau},
            'scalars': summary.scalars,
            'level': summary.level,
            'hyperparameters': result.hp.to_dict(),
            'basis': result.basis.to_dict(),
            'mcmc': cfg.mcmc.to_dict(),
            'chains': result.draws.chains,
            'draws': result.draws.draws,
            'elapsed_seconds': result.elapsed,
            'psrf': result.psrf.to_dict() if result.psrf is not None else None,
            'gof': result.gof.to_dict(),
            'scores': scores,
            'coverage': coverages,
            'truth': truth_block,
        }
        write_json(self.out_dir / 'results.json', results)
        write_long_csv(self.out_dir / 'smoothed.csv', result.data, values=[s['mean'] for s in summary.signals])

        if cfg.write_traces:
            traces = result.draws.traces
            chains, draws = traces['sigma_eps2'].shape
            frame = pd.DataFrame({
                'chain': np.repeat(np.arange(chains), draws),
                'draw': np.tile(np.arange(draws), chains),
                **{name: trace.ravel() for name, trace in traces.items()},
            })
            write_frame(self.out_dir / 'traces.csv', frame)

    def benchmark(self, suite):
        from .tasks import run_replication_task

        self._start('benchmark', suite.to_dict())
        try:
            payloads = [
                {
                    'design_name': entry.name,
                    'design': entry.design.to_dict(),
                    'fit': entry.fit.to_dict(),
                    'methods': list(suite.methods),
                    'replication': r,
                    'design_seed': suite.seed + r,
                    'mcmc_seed': entry.fit.mcmc.seed + r,
                }
                for entry in suite.designs
                for r in range(suite.replications)
            ]
            self.logger.info(f"Benchmark {suite.name}: {len(payloads)} replications on {self.threads} workers")
            results = dispatch(execute_replication, run_replication_task, payloads, self.threads)

            rows = [row for result in results for row in result['rows']]
            failures = [result['error'] for result in results if 'error' in result]
            table = aggregate_table(rows, suite)
            write_frame(self.out_dir / 'table.csv', table)
            write_frame(self.out_dir / 'replications.csv', pd.DataFrame(rows))
            if failures:
                write_frame(self.out_dir / 'failures.csv', pd.DataFrame(failures))
            self._manifest('benchmark', suite.to_dict(), failures=len(failures))
        except Exception as exc:
            self._fail(exc)
            raise

        empty = table[table['replications'] == 0]
        if len(empty):
            cells = ', '.join(f"{d}/{m}" for d, m in zip(empty['design'], empty['method']))
            self.run.finish('failed', exit_code=EXIT_EMPTY_CELL, message=f"Empty cells: {cells}")
            return Outcome(EXIT_EMPTY_CELL, self.run, table)
        self.run.finish('completed', exit_code=EXIT_OK)
        return Outcome(EXIT_OK, self.run, table)

    def diagnose(self):
        self._start('diagnose', {'results_dir': str(self.out_dir)})
        try:
            report = self._diagnose()
        except Exception as exc:
            self._fail(exc)
            raise
        self.run.finish('completed', exit_code=EXIT_OK)
        return Outcome(EXIT_OK, self.run, report)

    def _diagnose(self):
        results_path = self.out_dir / 'results.json'
        if not results_path.is_file():
            raise DataError(f"No results.json in {self.out_dir}")
        results = read_json(results_path)
        truth = results.get('truth')
        lines = [f"Diagnostics for {self.out_dir}", ""]

        psrf = results.get('psrf')
        if psrf is None:
            lines.append("PSRF: not available (fewer than 2 chains)")
        else:
            lines.append(f"PSRF (threshold {psrf['threshold']}):")
            for name, value in psrf['values'].items():
                flag = '' if value is not None and value < psrf['threshold'] else '  <-- not converged'
                shown = 'inf' if value is None else f"{value:.4f}"
                lines.append(f"  {name:<18} {shown}{flag}")
            lines.append("  converged" if psrf['passed'] else "  NOT CONVERGED: " + ', '.join(psrf['failing']))

        gof = results['gof']
        lines += [
            "",
            f"Goodness of fit: median p = {gof['median_p']:.4f} over {gof['draws']} draws "
            f"({gof['curves_below_level']} curves below {gof['level']})",
            "  lack of fit" if gof['lack_of_fit'] else "  no evidence of lack of fit",
            "",
        ]
        for name, stats in results['scalars'].items():
            lines.append(f"{name}: mean {stats['mean']:.4g}, interval [{stats['lower']:.4g}, {stats['upper']:.4g}]")

        traces_path = self.out_dir / 'traces.csv'
        if traces_path.is_file():
            traces = pd.read_csv(traces_path)
            summary = traces.drop(columns='draw').groupby('chain').agg(['mean', 'std'])
            summary.columns = [f"{name}_{stat}" for name, stat in summary.columns]
            write_frame(self.out_dir / 'trace_summary.csv', summary.reset_index())
            lines += ["", "Trace summary by chain:", summary.to_string(float_format=lambda v: f"{v:.4g}")]

        self._write_plot_data(results, truth)
        if results.get('scores'):
            lines += ["", "Scores:"]
            for method, scores in results['scores'].items():
                shown = ', '.join(f"{k}={v:.4f}" for k, v in scores.items() if v is not None)
                lines.append(f"  {method}: {shown}")

        report = '\n'.join(lines) + '\n'
        atomic_write(self.out_dir / 'report.txt', report)
        return report

    def _write_plot_data(self, results, truth):
        signal_rows = []
        truth_signals = {s['curve_id']: s['values'] for s in truth['signals']} if truth else {}
        for sig in results['signals']:
            part = pd.DataFrame({
                'curve_id': sig['curve_id'],
                't': sig['t'],
                'estimate': sig['mean'],
                'lower': sig['lower'],
                'upper': sig['upper'],
            })
            if truth:
                part['truth'] = truth_signals[sig['curve_id']]
            signal_rows.append(part)
        write_frame(self.out_dir / 'plot_signals.csv', pd.concat(signal_rows, ignore_index=True))

        mean = results['mean_function']
        frame = pd.DataFrame({'t': mean['t'], 'estimate': mean['mean'], 'lower': mean['lower'],
                              'upper': mean['upper']})
        if truth:
            frame['truth'] = truth['mean']
        write_frame(self.out_dir / 'plot_mean.csv', frame)

        cov = results['covariance']
        s, t = np.meshgrid(cov['t'], cov['t'], indexing='ij')
        frame = pd.DataFrame({
            's': s.ravel(),
            't': t.ravel(),
            'estimate': np.asarray(cov['mean']).ravel(),
            'lower': np.asarray(cov['lower']).ravel(),
            'upper': np.asarray(cov['upper']).ravel(),
        })
        if truth:
            frame['truth'] = np.asarray(truth['covariance']).ravel()
        write_frame(self.out_dir / 'plot_covariance.csv', frame)
