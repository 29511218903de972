from django.core.management.base import BaseCommand, CommandError

from ...runner import Runner, exit_code_for
from ...utils import DataError


class Command(BaseCommand):
    help = "Summarize a fit's convergence and goodness of fit and write plot-data CSVs next to its results"

    def add_arguments(self, parser):
        parser.add_argument('results_dir', help="Directory holding results.json from `fit`")

    def handle(self, *args, **options):
        try:
            outcome = Runner(options['results_dir']).diagnose()
        except (DataError, ValueError, KeyError) as exc:
            raise CommandError(f"Cannot diagnose {options['results_dir']}: {exc}",
                               returncode=exit_code_for(exc) or 1)
        self.stdout.write(outcome.payload)
