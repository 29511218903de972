from dataclasses import dataclass, field
from pathlib import Path

import yaml
from django.core.exceptions import ValidationError

from .sampler import McmcConfig
from .simulation import SimDesign

CONFIG_DIR = Path(__file__).parent / 'config'
CONFIG_VERSION = 1


class ConfigError(ValidationError):
    """A run config could not be read or failed schema validation."""


@dataclass(frozen=True)
class FitConfig:
    working_grid_size: int = 20
    stationary: bool = True
    hyperparameters: dict = field(default_factory=dict)
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    reference_size: int = 40
    level: float = 0.95
    gof_level: float = 0.05
    psrf_threshold: float = 1.1
    write_traces: bool = True
    domain: tuple = None

    def to_dict(self):
        return {
            'version': CONFIG_VERSION,
            'working_grid_size': self.working_grid_size,
            'stationary': self.stationary,
            'hyperparameters': dict(sorted(self.hyperparameters.items())),
            'mcmc': self.mcmc.to_dict(),
            'reference_size': self.reference_size,
            'level': self.level,
            'gof_level': self.gof_level,
            'psrf_threshold': self.psrf_threshold,
            'write_traces': self.write_traces,
            'domain': list(self.domain) if self.domain is not None else None,
        }


@dataclass(frozen=True)
class SuiteDesign:
    name: str
    design: SimDesign
    fit: FitConfig


@dataclass(frozen=True)
class BenchmarkSuite:
    name: str
    designs: tuple
    methods: tuple = ('babf', 'css')
    replications: int = 30
    seed: int = 0

    def to_dict(self):
        return {
            'version': CONFIG_VERSION,
            'name': self.name,
            'methods': list(self.methods),
            'replications': self.replications,
            'seed': self.seed,
            'designs': [
                {'name': d.name, 'design': d.design.to_dict(), 'fit': d.fit.to_dict()}
                for d in self.designs
            ],
        }


def load_config(path):
    """Read a YAML (or JSON) config document into a dict."""
    path = Path(path)
    try:
        with open(path) as f:
            config = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f'Config file not found: {path}')
    except yaml.YAMLError as exc:
        raise ConfigError(f'Config file {path} is not valid YAML/JSON: {exc}')

    if config is None:
        config = {}
    if not isinstance(config, dict):
        raise ConfigError(f'Config file {path} must hold a mapping at the top level')
    return config


class ModuleConfig:
    """A config shipped with the app under modules/config/."""

    def __init__(self, module_name):
        self.module_name = module_name
        self.path = CONFIG_DIR / f'{module_name}.yaml'
        self.config = load_config(self.path)

    @classmethod
    def available(cls):
        return sorted(p.stem for p in CONFIG_DIR.glob('*.yaml'))
