from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from ...modules.base_config import CONFIG_DIR, ConfigError, ModuleConfig, load_config
from ...runner import exit_code_for


class RunCommand(BaseCommand):
    """Shared flags, config resolution and exit-code translation for the smoother commands."""

    default_config = None

    def add_run_arguments(self, parser, config_required=False):
        parser.add_argument('--config', required=config_required,
                            help=f"Config path, or the name of a shipped config in {CONFIG_DIR}")
        parser.add_argument('--out', required=True, help="Output directory")
        parser.add_argument('--seed', type=int, help="Override the config seed")
        parser.add_argument('--threads', type=int, help="Worker threads (default: BABF_THREADS or core count)")

    def add_mcmc_arguments(self, parser):
        parser.add_argument('--chains', type=int, help="Number of chains")
        parser.add_argument('--sweeps', type=int, help="Total sweeps per chain, burn-in included")
        parser.add_argument('--burnin', type=int, help="Burn-in sweeps per chain")

    def resolve_config(self, value):
        value = value or self.default_config
        if value is None:
            return {}
        path = Path(value)
        if path.is_file():
            return load_config(path)
        if value in ModuleConfig.available():
            return ModuleConfig(value).config
        raise ConfigError(f"Config not found: {value} (shipped configs: {', '.join(ModuleConfig.available())})")

    def override_mcmc(self, fit_config, options, apply_seed=True):
        """Apply --seed/--chains/--sweeps/--burnin to a raw fit config dict."""
        fit_config = dict(fit_config or {})
        mcmc = dict(fit_config.get('mcmc') or {})
        if apply_seed and options.get('seed') is not None:
            mcmc['seed'] = options['seed']
        if options.get('chains') is not None:
            mcmc['chains'] = options['chains']
        if options.get('burnin') is not None:
            mcmc['burn_in'] = options['burnin']
        if options.get('sweeps') is not None:
            burn_in = mcmc.get('burn_in', 2000)
            if options['sweeps'] <= burn_in:
                raise ConfigError(f"--sweeps ({options['sweeps']}) must exceed the burn-in ({burn_in})")
            mcmc['posterior_samples'] = options['sweeps'] - burn_in
        if mcmc:
            fit_config['mcmc'] = mcmc
        return fit_config

    def command_error(self, exc):
        code = exit_code_for(exc)
        message = '; '.join(exc.messages) if isinstance(exc, ConfigError) else str(exc)
        return CommandError(message, returncode=code if code is not None else 1)
