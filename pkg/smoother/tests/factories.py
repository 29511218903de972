"""Small designs and configs that keep the test suite fast."""
import math

from ..modules.base_config import FitConfig
from ..modules.covariance import MaternParams
from ..modules.sampler import McmcConfig
from ..modules.simulation import SimDesign, simulate_dataset


def small_design(n=8, p=15, grid_mode='common', transform='none', seed=7, **kwargs):
    kwargs.setdefault('domain', (0.0, math.pi / 2))
    kwargs.setdefault('covariance', MaternParams(rho=0.5, nu=3.5, sigma2=5.0))
    kwargs.setdefault('noise_sd', math.sqrt(5.0) / 2.0)
    return SimDesign(n=n, grid_mode=grid_mode, p=p, transform=transform, seed=seed, **kwargs)


def small_simulation(**kwargs):
    return simulate_dataset(small_design(**kwargs))


def small_mcmc(burn_in=20, posterior_samples=40, chains=2, seed=3, **kwargs):
    return McmcConfig(burn_in=burn_in, posterior_samples=posterior_samples, chains=chains, seed=seed,
                      reservoir_size=kwargs.pop('reservoir_size', 100), **kwargs)


def small_fit_config(working_grid_size=8, **mcmc_kwargs):
    return FitConfig(working_grid_size=working_grid_size, mcmc=small_mcmc(**mcmc_kwargs))


def small_design_config(n=8, p=15, grid_mode='common', seed=7):
    return {
        'version': 1,
        'n': n,
        'grid_mode': grid_mode,
        'p': p,
        'seed': seed,
    }


def small_fit_document(chains=2, burn_in=30, posterior_samples=60, seed=3):
    return {
        'version': 1,
        'working_grid_size': 8,
        'mcmc': {
            'burn_in': burn_in,
            'posterior_samples': posterior_samples,
            'chains': chains,
            'seed': seed,
            'reservoir_size': 100,
        },
    }
