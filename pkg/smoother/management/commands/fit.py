from django.core.management.base import CommandError

from ...modules.base_config import ConfigError
from ...modules.sampler import SamplerError
from ...runner import EXIT_UNCONVERGED, Runner
from ...serializers import FitConfigSerializer, validate_config
from ...utils import read_long_csv, read_truth
from ._common import RunCommand


class Command(RunCommand):
    help = "Fit the Bayesian smoother to long-format curve data and write results, traces and a manifest"

    default_config = 'fit'

    def add_arguments(self, parser):
        parser.add_argument('--data', required=True, help="CSV with columns curve_id,t,y")
        self.add_run_arguments(parser)
        self.add_mcmc_arguments(parser)
        parser.add_argument('--truth', help="Directory written by `simulate`; enables scores and coverage")

    def handle(self, *args, **options):
        try:
            config = self.override_mcmc(self.resolve_config(options['config']), options)
            cfg = validate_config(FitConfigSerializer, config)
            data = read_long_csv(options['data'], domain=cfg.domain)
            truth = read_truth(options['truth']) if options['truth'] else None
            outcome = Runner(options['out'], threads=options['threads']).fit(
                data, cfg, data_path=options['data'], truth=truth
            )
        except (ConfigError, ValueError, FileNotFoundError, SamplerError) as exc:
            raise self.command_error(exc)

        result = outcome.payload
        sigma = result.summary.scalars['sigma_eps2']
        self.stdout.write(
            f"{result.draws.chains} chain(s), {result.draws.draws} retained draws in {result.elapsed:.1f}s; "
            f"sigma_eps2 = {sigma['mean']:.4g} [{sigma['lower']:.4g}, {sigma['upper']:.4g}]; "
            f"GoF median p = {result.gof.median_p:.3f}"
        )
        if outcome.exit_code == EXIT_UNCONVERGED:
            raise CommandError(
                f"Chains did not converge (PSRF >= {result.psrf.threshold} for {', '.join(result.psrf.failing)}); "
                f"results written to {options['out']}",
                returncode=EXIT_UNCONVERGED,
            )
        self.stdout.write(self.style.SUCCESS(f"Results written to {options['out']}"))
