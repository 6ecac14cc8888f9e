"""Chain definition, static-environment disorder and the disordered critical point.

The environment is static, so tracing it out turns every quench into a
quench of an isolated Ising chain with quenched random fields ``Gamma_n``.
Each site sees its own local environment, so the fields are independent
Gaussians of width ``sigma`` (in units of the Ising coupling ``J = 1``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "RNG_NAME",
    "ChainSpec",
    "DisorderRealization",
    "FieldProfile",
    "NoCriticalPoint",
    "QuadratureFailure",
    "sample_disorder",
    "effective_fields",
    "realization_seed",
    "mean_log_field",
    "critical_field",
]

# Bit generator used for every disorder draw; recorded in run metadata.
RNG_NAME = f"numpy.PCG64/numpy-{np.__version__}"

_SEED_MASK = (1 << 64) - 1
_GAUSS_CUTOFF = 12.0
_GC_BRACKET = (1e-3, 1e3)


class NoCriticalPoint(ValueError):
    """Raised when the disorder is too strong for the chain to have a critical point."""


class QuadratureFailure(RuntimeError):
    """Raised when the disorder-averaged log-field integral does not converge."""


@dataclass(frozen=True)
class ChainSpec:
    n_sites: int
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.n_sites <= 0 or self.n_sites % 2:
            raise ValueError(f"n_sites must be a positive even integer, got {self.n_sites}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        object.__setattr__(self, "seed", int(self.seed) & _SEED_MASK)


@dataclass(frozen=True)
class DisorderRealization:
    gamma: np.ndarray
    sigma: float
    seed: int

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=float)
        gamma.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)

    @property
    def n_sites(self) -> int:
        return self.gamma.shape[0]


@dataclass(frozen=True)
class FieldProfile:
    """Instantaneous site fields ``g_n = g + Gamma_n``."""

    g_n: np.ndarray
    g: float
    gamma: np.ndarray = field(repr=False)

    @property
    def n_sites(self) -> int:
        return self.g_n.shape[0]

    @classmethod
    def uniform(cls, n_sites: int, g: float) -> "FieldProfile":
        return effective_fields(DisorderRealization(np.zeros(n_sites), 0.0, 0), g)


def realization_seed(base_seed: int, *key: int) -> int:
    """Derive an independent 64-bit seed for the stream labelled by ``key``.

    Streams are split with :class:`numpy.random.SeedSequence` spawn keys, so
    the seed of realization ``k`` depends only on ``(base_seed, key)`` and not
    on the order in which realizations are scheduled.
    """
    ss = np.random.SeedSequence(int(base_seed) & _SEED_MASK, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_disorder(spec: ChainSpec) -> DisorderRealization:
    if spec.sigma == 0:
        gamma = np.zeros(spec.n_sites)
    else:
        rng = np.random.Generator(np.random.PCG64(spec.seed))
        gamma = spec.sigma * rng.standard_normal(spec.n_sites)
    return DisorderRealization(gamma=gamma, sigma=float(spec.sigma), seed=spec.seed)


def effective_fields(r: DisorderRealization, g: float) -> FieldProfile:
    g_n = r.gamma + g
    g_n.setflags(write=False)
    return FieldProfile(g_n=g_n, g=float(g), gamma=r.gamma)


def _gauss(x, sigma):
    return math.exp(-0.5 * (x / sigma) ** 2) / (math.sqrt(2.0 * math.pi) * sigma)


def _quad(*args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, err = integrate.quad(*args, epsabs=1e-13, epsrel=1e-12, limit=200, **kwargs)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(str(exc)) from exc
    if err > 1e-10:
        raise QuadratureFailure(f"quadrature error estimate {err:.3g} above tolerance")
    return value


def mean_log_field(g: float, sigma: float) -> float:
    """Disorder average of ``ln|g + Gamma|`` for Gaussian ``Gamma``.

    The integration window is ``|Gamma| <= 12 sigma``. When the logarithmic
    singularity at ``Gamma = -g`` falls inside it, the window is split there
    and each half is integrated with the matching log-endpoint weight.
    """
    if sigma == 0:
        return math.log(abs(g))
    lo, hi = -_GAUSS_CUTOFF * sigma, _GAUSS_CUTOFF * sigma
    s = -g
    if not lo < s < hi:
        return _quad(lambda x: _gauss(x, sigma) * math.log(abs(g + x)), lo, hi)
    # ln|g+x| = ln(s - x) on the left half, ln(x - s) on the right half
    left = _quad(lambda x: _gauss(x, sigma), lo, s, weight="alg-logb", wvar=(0.0, 0.0))
    right = _quad(lambda x: _gauss(x, sigma), s, hi, weight="alg-loga", wvar=(0.0, 0.0))
    return left + right


def critical_field(sigma: float) -> float:
    """Critical uniform field ``g_c`` where the mean log-field vanishes.

    Raises :class:`NoCriticalPoint` when the mean log-field does not change
    sign on ``g in [1e-3, 1e3]`` (disorder above ``sigma ~ 1.887``).
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return 1.0
    a, b = (math.log(x) for x in _GC_BRACKET)
    fa = mean_log_field(math.exp(a), sigma)
    fb = mean_log_field(math.exp(b), sigma)
    if fa * fb > 0:
        raise NoCriticalPoint(f"no critical point for sigma={sigma}")
    x = optimize.bisect(lambda y: mean_log_field(math.exp(y), sigma), a, b, xtol=1e-12, maxiter=200)
    return math.exp(x)
