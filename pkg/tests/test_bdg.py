import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kinkchain import ed
from kinkchain.bdg import (
    BogoliubovModes,
    SingularOverlap,
    bdg_generator,
    bogoliubov_overlap,
    ground_energy,
    ground_kink_density,
    kink_basis,
    pair_wavefunction,
    solve_ground_modes,
)
from kinkchain.lattice import ChainSpec, realization_seed, sample_disorder
from kinkchain.momentum import antiperiodic_momenta
from kinkchain.observables import cooper_pair_correlator, kink_overlap

fields = st.integers(2, 8).flatmap(lambda h: arrays(np.float64, 2 * h, elements=st.floats(-3, 3)))


def dispersion(n, g):
    k = antiperiodic_momenta(n)
    return np.sort(2 * np.sqrt(1 + g * g - 2 * g * np.cos(k)))


def test_zero_field_spectrum_is_flat():
    for n in (4, 8, 32):
        assert np.array_equal(solve_ground_modes(np.zeros(n)).omega, np.full(n, 2.0))


@pytest.mark.parametrize("n", [8, 16, 32])
@pytest.mark.parametrize("g", [0.5, 1.0, 2.0])
def test_pure_chain_dispersion(n, g):
    assert np.allclose(solve_ground_modes(np.full(n, g)).omega, dispersion(n, g), atol=1e-12)


def test_excitations_match_spin_spectrum():
    # even-parity excitations are pairs of quasiparticles
    n, g = 8, 2.0
    modes = solve_ground_modes(np.full(n, g))
    w = modes.omega
    pairs = np.sort([w[a] + w[b] for a in range(n) for b in range(a + 1, n)])
    P = ed.even_sector_basis(n)
    H = (P.T @ ed.spin_hamiltonian(np.full(n, g)) @ P).toarray()
    levels = np.linalg.eigvalsh(H)
    assert abs(levels[0] - ground_energy(modes)) < 1e-10
    assert np.allclose(levels[1:11] - levels[0], pairs[:10], atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(fields)
def test_modes_are_orthonormal(g_n):
    m = solve_ground_modes(g_n)
    assert m.normalization_error() < 1e-10
    assert m.unitarity_error() < 1e-8
    assert np.all(m.omega > 0)


@settings(max_examples=30, deadline=None)
@given(fields)
def test_generator_symmetry_and_particle_hole_partner(g_n):
    H = bdg_generator(g_n)
    assert np.array_equal(H, H.conj().T)
    w = np.linalg.eigvalsh(H)
    assert np.allclose(np.sort(w), np.sort(-w), atol=1e-10)
    m = solve_ground_modes(g_n)
    if np.any(g_n):
        partner = np.vstack([m.v.conj(), m.u.conj()])
        assert np.allclose(H @ partner, -partner * m.omega, atol=1e-8)


def test_largest_u_plus_entry_is_real_positive():
    m = solve_ground_modes(sample_disorder(ChainSpec(16, 0.5, 3)).gamma + 0.7)
    up = m.u_plus
    piv = up[np.argmax(np.abs(up), axis=0), np.arange(16)]
    assert np.all(piv > 0)


def test_kink_basis_structure():
    k = kink_basis(4)
    for m in range(4):
        for mat in (k.u, k.v):
            nz = np.flatnonzero(mat[:, m])
            assert nz.size == 2
            assert np.allclose(np.abs(mat[nz, m]), 0.5)
    for n in (4, 10, 64):
        assert kink_basis(n).unitarity_error() < 1e-14


def test_kink_basis_rejects_odd_length():
    with pytest.raises(ValueError):
        kink_basis(5)


def test_kink_basis_spans_zero_field_eigenspace():
    n = 10
    w, W = np.linalg.eigh(bdg_generator(np.zeros(n)))
    other = BogoliubovModes(W[:n, n:], W[n:, n:], omega=w[n:])
    ov = bogoliubov_overlap(other, kink_basis(n))
    assert ov.unitarity_error() < 1e-8
    assert np.max(np.abs(ov.V)) < 1e-12
    assert abs(abs(np.linalg.det(ov.U)) - 1) < 1e-10


def test_overlap_with_itself():
    m = solve_ground_modes(np.linspace(0.1, 2, 8))
    ov = bogoliubov_overlap(m, m)
    assert np.allclose(ov.U, np.eye(8), atol=1e-12)
    assert np.allclose(ov.V, 0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(fields, fields)
def test_overlap_of_complete_bases_is_unitary(a, b):
    if a.size != b.size:
        b = np.resize(b, a.size)
    ov = bogoliubov_overlap(solve_ground_modes(a), solve_ground_modes(b))
    assert ov.unitarity_error() < 1e-8


def test_strong_field_half_filling():
    d = ground_kink_density(kink_overlap(solve_ground_modes(np.full(32, 1e4))))
    assert abs(d - 0.5) < 1e-4


def test_zero_field_has_no_kinks():
    assert ground_kink_density(kink_overlap(solve_ground_modes(np.zeros(16)))) == 0.0


def test_strong_disorder_half_filling():
    r = sample_disorder(ChainSpec(64, 200.0, 4))
    assert abs(ground_kink_density(kink_overlap(solve_ground_modes(r.gamma))) - 0.5) < 0.01


def test_perturbative_density_at_zero_field():
    ds = []
    for k in range(8):
        r = sample_disorder(ChainSpec(512, 0.8, realization_seed(5, k)))
        ds.append(ground_kink_density(kink_overlap(solve_ground_modes(r.gamma))))
    assert abs(np.mean(ds) / 0.08 - 1) < 0.15


def test_disordered_density_matches_spin_chain():
    for k in range(4):
        r = sample_disorder(ChainSpec(10, 0.8, realization_seed(5, k)))
        d = ground_kink_density(kink_overlap(solve_ground_modes(r.gamma)))
        assert abs(d - ed.exact_kink_density(ed.exact_ground_state(r.gamma))) < 1e-9


def test_density_monotone_in_field():
    gs = np.linspace(0, 3, 31)
    d = [ground_kink_density(kink_overlap(solve_ground_modes(np.full(64, g)))) for g in gs]
    assert np.all(np.diff(d) > 0)
    assert np.max(np.abs(np.diff(d))) < 0.1


def test_pair_wavefunction_of_kink_vacuum_vanishes():
    assert np.array_equal(pair_wavefunction(kink_overlap(kink_basis(8))).Z, np.zeros((8, 8)))


@settings(max_examples=20, deadline=None)
@given(fields)
def test_pair_wavefunction_is_antisymmetric(g_n):
    z = pair_wavefunction(kink_overlap(solve_ground_modes(g_n)), regularize=True).Z
    assert np.array_equal(z, -z.T)


def test_bcs_state_reproduces_ground_state():
    g_n = np.full(8, 0.5)
    z = pair_wavefunction(kink_overlap(solve_ground_modes(g_n)))
    psi = ed.exact_ground_state(g_n)
    assert abs(np.vdot(ed.bcs_state(z).amplitudes, psi.amplitudes)) ** 2 > 1 - 1e-8


def test_ordered_phase_pairs_are_nearest_neighbours():
    C = cooper_pair_correlator(pair_wavefunction(kink_overlap(solve_ground_modes(np.full(64, 0.5)))))
    assert np.argmax(C) in (1, 63)
    assert C[1] + C[63] > 0.8


def test_singular_overlap_and_regularized_retry():
    k = kink_basis(8)
    u, v = k.u.copy(), k.v.copy()
    # occupy kink mode 0: swap its (u, v) for the particle-hole partner
    u[:, 0], v[:, 0] = k.v[:, 0], k.u[:, 0]
    ov = kink_overlap(BogoliubovModes(u, v))
    with pytest.raises(SingularOverlap):
        pair_wavefunction(ov)
    z = pair_wavefunction(ov, regularize=True)
    assert z.regularized and z.tikhonov > 0
    assert np.all(np.isfinite(z.Z))


def test_ground_energy_needs_frequencies():
    with pytest.raises(ValueError):
        ground_energy(BogoliubovModes(np.eye(2), np.zeros((2, 2))))
