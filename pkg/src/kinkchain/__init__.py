"""Quench dynamics of a transverse-field Ising chain with static random fields.

The chain is solved as free fermions. Static and quenched states are
Bogoliubov vacua whose observables are measured against the kink basis.
A dense spin-space solver for short chains checks the fermion code.
"""

__version__ = "0.1.0"

from .bdg import (
    BogoliubovModes,
    OverlapPair,
    PairWavefunction,
    SingularOverlap,
    bogoliubov_overlap,
    ground_energy,
    ground_kink_density,
    kink_basis,
    pair_wavefunction,
    solve_ground_modes,
)
from .dynamics import AdiabaticityWarning, EvolvedModes, NormDriftExceeded, QuenchProtocol, init_state, run_quench, step
from .ensemble import (
    EnsemblePlan,
    EnsembleResult,
    InsufficientTail,
    NonPositiveValue,
    StaticPlan,
    average_fidelity,
    fit_correlation_coefficient,
    fit_local_slopes,
    kzm_length_estimate,
    run_ensemble,
    run_static_ensemble,
)
from .lattice import (
    ChainSpec,
    DisorderRealization,
    FieldProfile,
    NoCriticalPoint,
    QuadratureFailure,
    critical_field,
    effective_fields,
    sample_disorder,
)
from .observables import (
    CorrelationBundle,
    IndexOutOfRange,
    cooper_pair_correlator,
    excess_kink_density,
    fidelity_to_kink_vacuum,
    kink_density,
    kink_probability,
    pair_convolution,
    zz_correlator,
)
