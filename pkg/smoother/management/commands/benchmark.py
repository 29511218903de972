from django.core.management.base import CommandError

from ...modules.base_config import ConfigError
from ...runner import EXIT_OK, Runner
from ...serializers import BenchmarkSuiteSerializer, validate_config
from ._common import RunCommand


class Command(RunCommand):
    help = "Run a benchmark suite (designs x methods x replications) and write table.csv"

    def add_arguments(self, parser):
        self.add_run_arguments(parser, config_required=True)
        self.add_mcmc_arguments(parser)
        parser.add_argument('--replications', type=int, help="Override the suite replication count")

    def handle(self, *args, **options):
        try:
            config = self.resolve_config(options['config'])
            if options['seed'] is not None:
                config['seed'] = options['seed']
            if options['replications'] is not None:
                config['replications'] = options['replications']
            config['designs'] = [
                dict(entry, fit=self.override_mcmc(entry.get('fit'), options, apply_seed=False))
                if isinstance(entry, dict) else entry
                for entry in config.get('designs') or []
            ]
            suite = validate_config(BenchmarkSuiteSerializer, config)
            outcome = Runner(options['out'], threads=options['threads']).benchmark(suite)
        except (ConfigError, ValueError) as exc:
            raise self.command_error(exc)

        table = outcome.payload
        shown = [c for c in ('design', 'method', 'replications', 'signal_mean', 'signal_sd', 'mean_mean',
                             'covariance_mean', 'sigma_eps2_mean') if c in table.columns]
        self.stdout.write(table[shown].to_string(index=False, float_format=lambda v: f"{v:.4f}"))
        if outcome.exit_code != EXIT_OK:
            raise CommandError(f"Benchmark {suite.name} left empty cells; see {options['out']}/failures.csv",
                               returncode=outcome.exit_code)
        self.stdout.write(self.style.SUCCESS(f"Table written to {options['out']}/table.csv"))
