"""Comparison of the free-fermion code paths against dense spin-space results."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import ed
from .bdg import bogoliubov_overlap, ground_energy, kink_basis, pair_wavefunction, solve_ground_modes
from .dynamics import QuenchProtocol, run_quench
from .lattice import ChainSpec, DisorderRealization, realization_seed, sample_disorder
from .observables import fidelity_to_kink_vacuum, kink_density, zz_correlator

__all__ = ["Check", "static_draws", "run_checks"]


@dataclass(frozen=True)
class Check:
    name: str
    max_error: float
    tolerance: float
    cases: int

    @property
    def passed(self) -> bool:
        return bool(self.max_error <= self.tolerance)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def static_draws(n_sites: int, draws: int, seed: int, sigmas=(0.0, 0.5), g_max: float = 2.0):
    """``(g, realization)`` pairs with ``g`` uniform on ``[0, g_max]`` and ``sigma`` alternating."""
    rng = np.random.Generator(np.random.PCG64(realization_seed(seed, n_sites)))
    out = []
    for k in range(draws):
        sigma = sigmas[k % len(sigmas)]
        g = float(rng.uniform(0.0, g_max))
        r = sample_disorder(ChainSpec(n_sites, sigma, realization_seed(seed, n_sites, k)))
        out.append((g, r))
    return out


def _static_errors(g: float, r: DisorderRealization):
    g_n = r.gamma + g
    modes = solve_ground_modes(g_n)
    psi = ed.exact_ground_state(g_n)
    ov = bogoliubov_overlap(modes, kink_basis(r.n_sites))
    e = abs(ground_energy(modes) - psi.energy)
    d = abs(kink_density(ov) - ed.exact_kink_density(psi))
    f = abs(fidelity_to_kink_vacuum(pair_wavefunction(ov)) - ed.exact_fidelity(psi))
    return e, d, f, modes, psi, ov


def run_checks(
    sizes=(4, 6, 8),
    draws: int = 20,
    seed: int = 0,
    dynamic_sites: int = 8,
    dynamic_tau_q: float = 4.0,
    dynamic_sigma: float = 0.0,
    ed_dt: float = 0.02,
) -> list[Check]:
    """Run the oracle suite; each returned check carries its worst error and tolerance."""
    for n in tuple(sizes) + (dynamic_sites,):
        if n > ed.MAX_SITES:
            raise ed.SizeExceeded(f"{n} sites exceeds the dense oracle limit of {ed.MAX_SITES}")
    if dynamic_sites > ed.MAX_EVOLVE_SITES:
        raise ed.SizeExceeded(f"{dynamic_sites} sites exceeds the evolution limit of {ed.MAX_EVOLVE_SITES}")
    errs = {"energy": [], "density": [], "fidelity": [], "bcs": [], "series": [], "zz": []}
    for n in sizes:
        for g, r in static_draws(n, draws, seed):
            e, d, f, modes, psi, ov = _static_errors(g, r)
            errs["energy"].append(e)
            errs["density"].append(d)
            errs["fidelity"].append(f)
            R = n // 2
            errs["zz"].append(abs(zz_correlator(modes, 0, R) - ed.exact_zz(psi, 0, R)))
            if n <= 6:
                Z = pair_wavefunction(ov)
                bcs = ed.bcs_state(Z)
                errs["bcs"].append(float(1.0 - abs(np.vdot(bcs.amplitudes, psi.amplitudes)) ** 2))
                errs["series"].append(abs(ed.fidelity_series(Z) - fidelity_to_kink_vacuum(Z)))
    r = sample_disorder(ChainSpec(dynamic_sites, dynamic_sigma, realization_seed(seed, 99)))
    final, _ = run_quench(r, QuenchProtocol(dynamic_tau_q), observers={})
    exact = ed.exact_quench(r, dynamic_tau_q, dt=ed_dt)
    ov = bogoliubov_overlap(final.modes, kink_basis(dynamic_sites))
    dyn_d = abs(kink_density(ov) - ed.exact_kink_density(exact))
    dyn_f = abs(fidelity_to_kink_vacuum(pair_wavefunction(ov)) - ed.exact_fidelity(exact))
    total = len(errs["energy"])
    return [
        Check("ground_energy", max(errs["energy"]), 1e-9, total),
        Check("ground_kink_density", max(errs["density"]), 1e-9, total),
        Check("ground_fidelity", max(errs["fidelity"]), 1e-8, total),
        Check("zz_correlator", max(errs["zz"]), 1e-9, total),
        Check("bcs_reconstruction", max(errs["bcs"], default=0.0), 1e-8, len(errs["bcs"])),
        Check("fidelity_series", max(errs["series"], default=0.0), 1e-10, len(errs["series"])),
        Check("quench_kink_density", dyn_d, 1e-4, 1),
        Check("quench_fidelity", dyn_f, 1e-4, 1),
    ]


def summary(checks: list[Check]) -> dict:
    return {
        "passed": all(c.passed for c in checks),
        "checks": [c.as_dict() for c in checks],
        "n_checks": len(checks),
        "n_failed": sum(not c.passed for c in checks),
        "worst_ratio": max((c.max_error / c.tolerance for c in checks), default=math.nan),
    }
