from ...modules.base_config import ConfigError
from ...runner import Runner
from ...serializers import SimDesignSerializer, validate_config
from ._common import RunCommand


class Command(RunCommand):
    help = "Simulate a functional dataset (observed.csv plus truth files) from a design config"

    default_config = 'stationary_common'

    def add_arguments(self, parser):
        self.add_run_arguments(parser)

    def handle(self, *args, **options):
        try:
            config = self.resolve_config(options['config'])
            if options['seed'] is not None:
                config['seed'] = options['seed']
            design = validate_config(SimDesignSerializer, config)
            outcome = Runner(options['out'], threads=options['threads']).simulate(design)
        except (ConfigError, ValueError) as exc:
            raise self.command_error(exc)

        sim = outcome.payload
        self.stdout.write(self.style.SUCCESS(
            f"Simulated {sim.observed.n} curves ({sim.observed.total_points} observations) into {options['out']}"
        ))
