import functools

import numpy as np
import pytest

from kinkchain.dynamics import QuenchProtocol, run_quench
from kinkchain.ensemble import EnsemblePlan, run_ensemble
from kinkchain.lattice import ChainSpec, sample_disorder

# Disorder ensemble shared by the slow-scaling checks: sigma=0.8, N=256, 8 realizations.
SLOW_SIGMA = 0.8
SLOW_N = 256
SLOW_TAUS = (16.0, 64.0, 256.0, 1024.0)
SLOW_REALIZATIONS = 8
SLOW_SEED = 2024


class _Const:
    def __init__(self, k):
        self.k = k

    def __call__(self, n):
        return self.k


@functools.lru_cache(maxsize=None)
def pure_quench(n_sites: int, tau_q: float, dt: float | None = None):
    r = sample_disorder(ChainSpec(n_sites, 0.0, 0))
    final, _ = run_quench(r, QuenchProtocol(tau_q, dt=dt), observers={})
    return final


@pytest.fixture(scope="session")
def pure_final():
    return pure_quench


@pytest.fixture(scope="session")
def slow_ensemble():
    plan = EnsemblePlan(
        (SLOW_SIGMA,),
        SLOW_TAUS,
        (SLOW_N,),
        base_seed=SLOW_SEED,
        realizations_rule=_Const(SLOW_REALIZATIONS),
        bundles=True,
    )
    return run_ensemble(plan)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
