"""Stationary Bogoliubov-de Gennes problem of the even-parity Ising chain.

Conventions
-----------
A fermionic Gaussian state is stored as two ``N x N`` matrices ``u`` and ``v``
(rows: sites ``n``, columns: modes ``m``) such that

    c_n = sum_m u[n, m] gamma_m + conj(v[n, m]) gamma_m^dagger .

The generator acting on a stacked column ``(u_m, v_m)`` is the real symmetric
matrix ``[[A, B], [-B, -A]]`` obtained from the even-sector Hamiltonian with
antiperiodic fermions. In the ``u+- = u +- v`` variables it reads

    omega u+_n = 2 g_n u-_n - 2 u-_{n-1}
    omega u-_n = 2 g_n u+_n - 2 u+_{n+1}

with ``u+-_{0} = -u+-_{N}`` and ``u+-_{N+1} = -u+-_{1}``.

The kink mode ``m`` sits on the bond between sites ``m`` and ``m+1``:
``u0[n, m] = (delta_{n, m+1} - delta_{n, m}) / 2`` and
``v0[n, m] = (delta_{n, m+1} + delta_{n, m}) / 2``, antiperiodic in ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import FieldProfile

__all__ = [
    "BogoliubovModes",
    "OverlapPair",
    "PairWavefunction",
    "SingularOverlap",
    "bdg_generator",
    "solve_ground_modes",
    "kink_basis",
    "bogoliubov_overlap",
    "ground_kink_density",
    "ground_energy",
    "pair_wavefunction",
    "fix_phases",
]

_DEGENERACY_GAP = 1e-12
_SINGULAR_RATIO = 1e-12


class SingularOverlap(np.linalg.LinAlgError):
    """The state has (numerically) no overlap with the kink vacuum."""


@dataclass(frozen=True)
class BogoliubovModes:
    u: np.ndarray
    v: np.ndarray
    omega: np.ndarray | None = None
    boundary: str = "antiperiodic"
    degenerate: bool = False

    @property
    def n_sites(self) -> int:
        return self.u.shape[0]

    @property
    def u_plus(self) -> np.ndarray:
        return self.u + self.v

    @property
    def u_minus(self) -> np.ndarray:
        return self.u - self.v

    def mode_matrix(self) -> np.ndarray:
        """The full ``2N x 2N`` Bogoliubov matrix ``[[u, v*], [v, u*]]``."""
        u, v = self.u, self.v
        return np.block([[u, v.conj()], [v, u.conj()]])

    def normalization_error(self) -> float:
        norms = np.sum(np.abs(self.u) ** 2 + np.abs(self.v) ** 2, axis=0)
        return float(np.max(np.abs(norms - 1.0)))

    def unitarity_error(self) -> float:
        w = self.mode_matrix()
        return float(np.max(np.abs(w.conj().T @ w - np.eye(w.shape[0]))))

    def with_phases(self, phases: np.ndarray) -> "BogoliubovModes":
        """Multiply mode column ``m`` by ``phases[m]`` (a gauge change)."""
        return BogoliubovModes(self.u * phases, self.v * phases, self.omega, self.boundary, self.degenerate)


@dataclass(frozen=True)
class OverlapPair:
    """Bogoliubov transformation ``gamma_a = U*_ba gamma0_b + V*_ba gamma0_b^dagger``."""

    U: np.ndarray
    V: np.ndarray

    def unitarity_error(self) -> float:
        U, V = self.U, self.V
        g = U.conj().T @ U + V.conj().T @ V
        return float(np.max(np.abs(g - np.eye(g.shape[0]))))


@dataclass(frozen=True)
class PairWavefunction:
    """Antisymmetric pair amplitude ``Z_ab`` of the BCS form over kink modes."""

    Z: np.ndarray
    regularized: bool = False
    tikhonov: float = 0.0

    @property
    def n_sites(self) -> int:
        return self.Z.shape[0]


def _hopping_blocks(n: int) -> tuple[np.ndarray, np.ndarray]:
    # bond (n, n+1): -(c+_n c_{n+1} + h.c.) - (c+_n c+_{n+1} + h.c.); sign flips across the seam
    A = np.zeros((n, n))
    B = np.zeros((n, n))
    idx = np.arange(n)
    nxt = (idx + 1) % n
    sgn = np.ones(n)
    sgn[-1] = -1.0
    np.add.at(A, (idx, nxt), -sgn)
    np.add.at(A, (nxt, idx), -sgn)
    np.add.at(B, (idx, nxt), -sgn)
    np.add.at(B, (nxt, idx), sgn)
    return A, B


def bdg_generator(g_n: np.ndarray) -> np.ndarray:
    """Real symmetric ``2N x 2N`` generator acting on stacked ``(u, v)`` columns."""
    g_n = np.asarray(g_n, dtype=float)
    n = g_n.shape[0]
    A, B = _hopping_blocks(n)
    A[np.diag_indices(n)] += 2.0 * g_n
    H = np.block([[A, B], [-B, -A]])
    assert np.array_equal(H, H.T)
    return H


def fix_phases(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Make the largest-magnitude entry of each ``u + v`` column real and positive."""
    up = u + v
    rows = np.argmax(np.abs(up), axis=0)
    pivot = up[rows, np.arange(up.shape[1])]
    phase = np.conj(pivot) / np.abs(pivot)
    if np.isrealobj(u) and np.isrealobj(v):
        phase = phase.real
    return u * phase, v * phase


def kink_basis(n_sites: int) -> BogoliubovModes:
    if n_sites <= 0 or n_sites % 2:
        raise ValueError("n_sites must be a positive even integer")
    n = n_sites
    m = np.arange(n)
    nxt = (m + 1) % n
    sgn = np.ones(n)
    sgn[-1] = -1.0
    u = np.zeros((n, n))
    v = np.zeros((n, n))
    u[m, m] = -0.5
    v[m, m] = 0.5
    u[nxt, m] += 0.5 * sgn
    v[nxt, m] += 0.5 * sgn
    return BogoliubovModes(u, v, omega=np.full(n, 2.0))


def solve_ground_modes(fields: FieldProfile | np.ndarray) -> BogoliubovModes:
    """All ``N`` positive-frequency eigenmodes for the site fields ``g_n``.

    Exactly vanishing fields return the analytic kink basis, which spans the
    fully degenerate ``omega = 2`` eigenspace. ``degenerate`` is set when two
    frequencies are closer than 1e-12 (always true for uniform fields, where
    ``k`` and ``-k`` pair up); the returned columns are orthonormal regardless.
    """
    g_n = np.asarray(getattr(fields, "g_n", fields), dtype=float)
    n = g_n.shape[0]
    if n % 2:
        raise ValueError("the even-parity sector needs an even number of sites")
    if not np.any(g_n):
        return kink_basis(n)
    w, W = np.linalg.eigh(bdg_generator(g_n))
    omega = w[n:]
    degenerate = bool(np.min(np.diff(omega)) < _DEGENERACY_GAP) if n > 1 else False
    u, v = fix_phases(W[:n, n:], W[n:, n:])
    return BogoliubovModes(u, v, omega=omega, degenerate=degenerate)


def ground_energy(modes: BogoliubovModes) -> float:
    """Ground energy ``-sum(omega)/2`` of the even-sector Hamiltonian."""
    if modes.omega is None:
        raise ValueError("evolved modes carry no frequencies")
    return -0.5 * float(np.sum(modes.omega))


def bogoliubov_overlap(target: BogoliubovModes, reference: BogoliubovModes) -> OverlapPair:
    if target.n_sites != reference.n_sites:
        raise ValueError("mode sets have different chain lengths")
    u0, v0 = reference.u, reference.v
    U = u0.conj().T @ target.u + v0.conj().T @ target.v
    V = v0.T @ target.u + u0.T @ target.v
    return OverlapPair(U, V)


def ground_kink_density(overlap: OverlapPair) -> float:
    """Mean number of reference quasiparticles per site, ``Tr(V^dag V) / N``."""
    V = overlap.V
    return float(np.sum(np.abs(V) ** 2) / V.shape[0])


def pair_wavefunction(overlap: OverlapPair, regularize: bool = False, tikhonov: float = 1e-12) -> PairWavefunction:
    """Pair amplitude ``Z = V* (U*)^-1``, antisymmetrized.

    With ``regularize=True`` a near-singular ``U`` is inverted as
    ``(U^dag U + lambda)^-1 U^dag`` with ``lambda = tikhonov * s_max^2``
    instead of raising :class:`SingularOverlap`.
    """
    U, V = overlap.U, overlap.V
    s = np.linalg.svd(U, compute_uv=False)
    singular = s[-1] < _SINGULAR_RATIO * s[0]
    if singular and not regularize:
        raise SingularOverlap(f"smallest singular value of U is {s[-1]:.3g} (largest {s[0]:.3g})")
    if singular:
        lam = tikhonov * s[0] ** 2
        Uh = U.conj().T
        X = V @ np.linalg.solve(Uh @ U + lam * np.eye(U.shape[0]), Uh)
    else:
        # X = V U^-1  <=>  U^T X^T = V^T
        X = np.linalg.solve(U.T, V.T).T
        lam = 0.0
    Z = np.conj(X)
    Z = 0.5 * (Z - Z.T)
    return PairWavefunction(Z, regularized=bool(singular), tikhonov=float(lam))
