"""Observables of a Bogoliubov vacuum measured against the kink basis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from pfapack.pfaffian import pfaffian

from .bdg import (
    BogoliubovModes,
    OverlapPair,
    PairWavefunction,
    bogoliubov_overlap,
    ground_kink_density,
    kink_basis,
    pair_wavefunction,
)

__all__ = [
    "IndexOutOfRange",
    "CorrelationBundle",
    "kink_density",
    "kink_overlap",
    "log_fidelity",
    "fidelity_to_kink_vacuum",
    "log_abs_det_overlap",
    "cooper_pair_correlator",
    "kink_probability",
    "pair_convolution",
    "correlation_bundle",
    "window_l1_distance",
    "majorana_contractions",
    "zz_correlator",
    "excess_kink_density",
]


class IndexOutOfRange(IndexError):
    pass


kink_density = ground_kink_density


def kink_overlap(modes: BogoliubovModes) -> OverlapPair:
    return bogoliubov_overlap(modes, kink_basis(modes.n_sites))


def _z(z) -> np.ndarray:
    return np.asarray(getattr(z, "Z", z))


def log_fidelity(z: PairWavefunction | np.ndarray) -> float:
    """``-1/2 sum_i log(1 + s_i^2)`` over the singular values of ``Z``."""
    s = np.linalg.svd(_z(z), compute_uv=False)
    return -0.5 * float(np.sum(np.log1p(s * s)))


def fidelity_to_kink_vacuum(z: PairWavefunction | np.ndarray) -> float:
    return float(np.exp(log_fidelity(z)))


def log_abs_det_overlap(overlap: OverlapPair) -> float:
    """``log |det U|``; equals the log fidelity without inverting ``U``."""
    sign, logdet = np.linalg.slogdet(overlap.U)
    return float(logdet) if sign != 0 else -np.inf


def _normalized(x: np.ndarray) -> np.ndarray:
    total = x.sum()
    return x / total if total > 0 else x


def cooper_pair_correlator(z: PairWavefunction | np.ndarray) -> np.ndarray:
    """``C_r ~ sum_m |Z_{m+r, m}|^2`` for ``r = 0..N-1``, unit sum."""
    w = np.abs(_z(z)) ** 2
    n = w.shape[0]
    m = np.arange(n)
    C = np.array([w[(m + r) % n, m].sum() for r in range(n)])
    return _normalized(C)


def kink_probability(z: PairWavefunction | np.ndarray) -> np.ndarray:
    """``P_n ~ sum_m |Z_{m, n}|^2``, unit sum."""
    return _normalized((np.abs(_z(z)) ** 2).sum(axis=0))


def pair_convolution(P: np.ndarray) -> np.ndarray:
    """``PP_r = sum_n P_n P_{n+r}`` normalized over ``r != 0``; ``PP_0`` is set to 0."""
    P = _normalized(np.asarray(P, dtype=float))
    # circular autocorrelation
    PP = np.real(np.fft.ifft(np.conj(np.fft.fft(P)) * np.fft.fft(P)))
    PP = np.clip(PP, 0.0, None)
    PP[0] = 0.0
    return _normalized(PP)


@dataclass(frozen=True)
class CorrelationBundle:
    C_r: np.ndarray
    P_n: np.ndarray
    PP_r: np.ndarray


def correlation_bundle(z: PairWavefunction | np.ndarray) -> CorrelationBundle:
    P = kink_probability(z)
    return CorrelationBundle(cooper_pair_correlator(z), P, pair_convolution(P))


def window_l1_distance(a: np.ndarray, b: np.ndarray, exclude: int = 5) -> float:
    """L1 distance of two circular distributions after dropping ``|r| <= exclude`` and renormalizing."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    r = np.arange(n)
    keep = np.minimum(r, n - r) > exclude
    return float(np.sum(np.abs(_normalized(a[keep]) - _normalized(b[keep]))))


def majorana_contractions(modes: BogoliubovModes, i: int, R: int) -> np.ndarray:
    """Antisymmetric ``2R x 2R`` matrix of ``<X_a X_b>`` for ``X = (B_i, A_{i+1}, B_{i+1}, ..., A_{i+R})``.

    ``A_n = c_n + c_n^dag``, ``B_n = c_n - c_n^dag``.
    """
    up = modes.u_plus
    um = modes.u_minus
    bs = np.arange(i, i + R)
    As = np.arange(i + 1, i + R + 1)
    rows = np.empty((2 * R, up.shape[1]), dtype=complex)
    rows[0::2] = um[bs]
    rows[1::2] = up[As]
    is_b = np.zeros(2 * R, dtype=bool)
    is_b[0::2] = True
    # <X_a X_b> = s_a * rows_a . conj(rows_b), with s = -1 for a B on the right
    M = rows @ rows.conj().T
    M = M * np.where(is_b[None, :], -1.0, 1.0)
    M = np.triu(M, 1)
    return M - M.T


def zz_correlator(modes: BogoliubovModes, i: int, R: int, method: str = "pfaffian") -> float:
    """``<sz_i sz_{i+R}>`` for ``0 <= i`` and ``i + R <= N - 1``.

    ``method="determinant"`` evaluates the ``R x R`` determinant of the
    ``<B A>`` contractions, which equals the Pfaffian only for states with real
    mode amplitudes.
    """
    n = modes.n_sites
    if i < 0 or R < 0 or i + R > n - 1:
        raise IndexOutOfRange(f"sites {i} and {i + R} must lie in 0..{n - 1}")
    if R == 0:
        return 1.0
    sign = -1.0 if R % 2 else 1.0
    if method == "pfaffian":
        val = pfaffian(majorana_contractions(modes, i, R))
    elif method == "determinant":
        G = modes.u_minus[i : i + R] @ modes.u_plus[i + 1 : i + R + 1].conj().T
        val = np.linalg.det(G)
    else:
        raise ValueError(f"unknown method {method!r}")
    return sign * float(np.real(val))


def excess_kink_density(d_final, d_ground):
    """``d - d_ground``; may be negative for single small-chain realizations."""
    return np.subtract(d_final, d_ground)
