"""Exact spin-space reference for short periodic chains.

Everything here works with the ``2^N`` amplitudes of the spin chain
``H = -sum_n [g_n sx_n + sz_n sz_{n+1}]`` (periodic, ``N <= 12``) in the
``sz`` product basis: bit ``n`` of a basis index is 1 when spin ``n`` points
down. None of it uses the Bogoliubov machinery, so it can check it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse

from .lattice import DisorderRealization, FieldProfile

__all__ = [
    "MAX_SITES",
    "MAX_EVOLVE_SITES",
    "SizeExceeded",
    "SpinState",
    "spin_hamiltonian",
    "even_sector_basis",
    "ghz_even",
    "x_polarized",
    "exact_ground_state",
    "exact_evolve",
    "exact_quench",
    "exact_kink_density",
    "exact_fidelity",
    "exact_zz",
    "fermion_operators",
    "kink_operators",
    "bcs_state",
    "fidelity_series",
]

MAX_SITES = 12
MAX_EVOLVE_SITES = 10


class SizeExceeded(ValueError):
    """The requested chain is too long for dense spin-space methods."""


@dataclass(frozen=True)
class SpinState:
    amplitudes: np.ndarray
    n_sites: int
    energy: float | None = None

    def norm_error(self) -> float:
        return abs(float(np.vdot(self.amplitudes, self.amplitudes).real) - 1.0)


def _check_size(n: int, limit: int = MAX_SITES) -> None:
    if n > limit:
        raise SizeExceeded(f"{n} sites exceeds the dense oracle limit of {limit}")
    if n < 2:
        raise ValueError("need at least two sites")


@lru_cache(maxsize=16)
def _z_signs(n: int) -> np.ndarray:
    s = np.arange(2**n)
    bits = (s[:, None] >> np.arange(n)) & 1
    return 1 - 2 * bits


@lru_cache(maxsize=16)
def _bond_zz(n: int) -> np.ndarray:
    z = _z_signs(n)
    return z * np.roll(z, -1, axis=1)


def _flip(n: int, site: int) -> sparse.csr_matrix:
    dim = 2**n
    rows = np.arange(dim) ^ (1 << site)
    return sparse.csr_matrix((np.ones(dim), (rows, np.arange(dim))), shape=(dim, dim))


def spin_hamiltonian(g_n: np.ndarray) -> sparse.csr_matrix:
    g_n = np.asarray(g_n, dtype=float)
    n = g_n.shape[0]
    _check_size(n)
    H = sparse.diags(-_bond_zz(n).sum(axis=1).astype(float))
    for site in range(n):
        if g_n[site] != 0:
            H = H - g_n[site] * _flip(n, site)
    return H.tocsr()


@lru_cache(maxsize=16)
def even_sector_basis(n: int) -> sparse.csr_matrix:
    """Isometry onto states even under the global flip ``prod_n sx_n``."""
    dim = 2**n
    s = np.arange(dim // 2)
    sbar = (dim - 1) ^ s
    rows = np.concatenate([s, sbar])
    cols = np.concatenate([np.arange(dim // 2)] * 2)
    vals = np.full(dim, 1.0 / math.sqrt(2.0))
    return sparse.csr_matrix((vals, (rows, cols)), shape=(dim, dim // 2))


def ghz_even(n: int) -> SpinState:
    """The kink vacuum: equal-weight sum of the two ``sz`` ferromagnets."""
    _check_size(n)
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = psi[-1] = 1.0 / math.sqrt(2.0)
    return SpinState(psi, n, energy=-float(n))


def x_polarized(n: int) -> SpinState:
    _check_size(n)
    return SpinState(np.full(2**n, 2.0 ** (-n / 2), dtype=complex), n)


def _fields(fields) -> np.ndarray:
    return np.asarray(getattr(fields, "g_n", fields), dtype=float)


def exact_ground_state(fields: FieldProfile | np.ndarray) -> SpinState:
    """Lowest state of the even ``prod sx = +1`` sector."""
    g_n = _fields(fields)
    n = g_n.shape[0]
    _check_size(n)
    P = even_sector_basis(n)
    H = (P.T @ spin_hamiltonian(g_n) @ P).toarray()
    w, W = np.linalg.eigh(H)
    psi = P @ W[:, 0]
    k = np.argmax(np.abs(psi))
    psi = psi * (abs(psi[k]) / psi[k])
    return SpinState(psi.astype(complex), n, energy=float(w[0]))


def _magnus_step(H0, Hx, K, g1, g2, dt):
    # fourth-order Magnus with two Gauss-Legendre nodes; H(t) = H0 + g(t) Hx, K = [Hx, H0]
    H1 = H0 + g1 * Hx
    H2 = H0 + g2 * Hx
    Hm = 0.5 * dt * (H1 + H2) - 1j * (math.sqrt(3.0) / 12.0) * dt**2 * (g2 - g1) * K
    w, W = np.linalg.eigh(Hm)
    return (W * np.exp(-1j * w)) @ W.conj().T


def exact_evolve(
    gamma: np.ndarray | DisorderRealization,
    initial: SpinState,
    t_start: float,
    t_end: float,
    tau_q: float | None = None,
    g: float = 0.0,
    dt: float = 0.005,
) -> SpinState:
    """Schrodinger evolution from ``t_start`` to ``t_end`` inside the even sector.

    With ``tau_q`` set the uniform field is ``g(t) = -t / tau_q``; otherwise it
    is frozen at ``g``. The propagator is a product of fourth-order Magnus
    steps, each an exact unitary, so the norm is preserved to rounding.
    """
    gamma = np.asarray(getattr(gamma, "gamma", gamma), dtype=float)
    n = gamma.shape[0]
    _check_size(n, MAX_EVOLVE_SITES)
    if initial.n_sites != n:
        raise ValueError("state and disorder have different lengths")
    P = even_sector_basis(n)
    psi = P.T @ initial.amplitudes
    if abs(np.vdot(psi, psi).real - 1.0) > 1e-10:
        raise ValueError("initial state is not in the even sector")
    span = t_end - t_start
    if span == 0:
        return SpinState(initial.amplitudes.copy(), n)
    H0 = (P.T @ spin_hamiltonian(gamma) @ P).toarray()
    Hx = -(P.T @ sum(_flip(n, s) for s in range(n)) @ P).toarray()
    K = Hx @ H0 - H0 @ Hx
    steps = max(1, int(math.ceil(abs(span) / dt)))
    h = span / steps
    c = 0.5 / math.sqrt(3.0)
    for k in range(steps):
        t0 = t_start + k * h
        if tau_q is None:
            g1 = g2 = g
        else:
            g1 = -(t0 + (0.5 - c) * h) / tau_q
            g2 = -(t0 + (0.5 + c) * h) / tau_q
        psi = _magnus_step(H0, Hx, K, g1, g2, h) @ psi
    return SpinState(P @ psi, n)


def exact_quench(r: DisorderRealization, tau_q: float, g_init: float = 10.0, g_final: float = 0.0, dt: float = 0.005) -> SpinState:
    """Ground state at ``g_init`` evolved under ``g(t) = -t/tau_q`` down to ``g_final``."""
    psi0 = exact_ground_state(r.gamma + g_init)
    return exact_evolve(r, psi0, -g_init * tau_q, -g_final * tau_q, tau_q=tau_q, dt=dt)


def exact_kink_density(state: SpinState) -> float:
    """Mean of ``(1 - sz_n sz_{n+1}) / 2`` per bond."""
    p = np.abs(state.amplitudes) ** 2
    kinks = (state.n_sites - _bond_zz(state.n_sites).sum(axis=1)) / 2
    return float(p @ kinks) / state.n_sites


def exact_fidelity(state: SpinState) -> float:
    """Squared overlap with the even kink vacuum."""
    return float(abs(np.vdot(ghz_even(state.n_sites).amplitudes, state.amplitudes)) ** 2)


def exact_zz(state: SpinState, i: int, R: int) -> float:
    z = _z_signs(state.n_sites)
    p = np.abs(state.amplitudes) ** 2
    return float(p @ (z[:, i] * z[:, (i + R) % state.n_sites]))


@lru_cache(maxsize=8)
def fermion_operators(n: int) -> tuple[sparse.csr_matrix, ...]:
    """Jordan-Wigner annihilators ``c_n = prod_{m<n} sx_m (-|+x><-x|)_n``.

    Occupied means ``sx = -1``; with this choice ``c_n + c_n^dag`` equals
    ``-sz_n`` times the string, as in the standard chain mapping.
    """
    _check_size(n)
    sx = sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    eye = sparse.identity(2, format="csr")
    low = sparse.csr_matrix(-0.5 * np.array([[1.0, -1.0], [1.0, -1.0]]))
    ops = []
    for site in range(n):
        # kron order: last factor is bit 0
        factors = [eye] * n
        for m in range(site):
            factors[m] = sx
        factors[site] = low
        op = factors[n - 1]
        for m in range(n - 2, -1, -1):
            op = sparse.kron(op, factors[m], format="csr")
        ops.append(op)
    return tuple(ops)


def kink_operators(n: int) -> list[sparse.csr_matrix]:
    """Spin-space annihilators of the bond kinks."""
    from .bdg import kink_basis

    k = kink_basis(n)
    c = fermion_operators(n)
    out = []
    for b in range(n):
        op = sum(np.conj(k.u[s, b]) * c[s] + np.conj(k.v[s, b]) * c[s].conj().T for s in range(n))
        out.append(op.tocsr())
    return out


def _pair_operator(Z: np.ndarray) -> sparse.csr_matrix:
    n = Z.shape[0]
    gam = kink_operators(n)
    gdag = [g.conj().T.tocsr() for g in gam]
    op = sparse.csr_matrix((2**n, 2**n), dtype=complex)
    for a in range(n):
        for b in range(n):
            if Z[a, b] != 0:
                op = op + 0.5 * Z[a, b] * (gdag[a] @ gdag[b])
    return op


def bcs_state(Z: np.ndarray) -> SpinState:
    """Normalized ``exp(1/2 sum Z_ab g+_a g+_b)`` acting on the kink vacuum, summed term by term."""
    Z = np.asarray(getattr(Z, "Z", Z))
    n = Z.shape[0]
    op = _pair_operator(Z)
    term = ghz_even(n).amplitudes
    psi = term.copy()
    for k in range(1, n // 2 + 1):
        term = op @ term / k
        psi = psi + term
    return SpinState(psi / np.linalg.norm(psi), n)


def fidelity_series(Z: np.ndarray) -> float:
    """``1 / sum_k <0|(Zhat^dag)^k Zhat^k|0> / (k!)^2`` over ``k = 0..N/2``."""
    Z = np.asarray(getattr(Z, "Z", Z))
    n = Z.shape[0]
    op = _pair_operator(Z)
    vec = ghz_even(n).amplitudes
    total = 1.0
    for k in range(1, n // 2 + 1):
        vec = op @ vec
        total += float(np.vdot(vec, vec).real) / math.factorial(k) ** 2
    return 1.0 / total
