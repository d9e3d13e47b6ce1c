"""Populations, energy, excitation number, purity and ergotropy."""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

from . import hilbert as hb

log = logging.getLogger(__name__)

IMAG_TOL = 1e-10
CLAMP_FLOOR = -1e-6


class EnergeticsReport(NamedTuple):
    energy: float
    ergotropy: float
    passive_energy: float
    populations: tuple[float, ...]
    n_expect: float
    purity: float


def _site_diagonals() -> np.ndarray:
    # occupation of each site on each basis state, shape (6, 64)
    idx = np.arange(hb.DIM)
    return np.array([(idx >> (hb.N_SITES - i)) & 1 for i in range(1, hb.N_SITES + 1)], dtype=float)


_OCC = _site_diagonals()


def _real(value: complex, what: str) -> float:
    if abs(value.imag) > IMAG_TOL * max(1.0, abs(value.real)):
        raise ValueError(f"{what} has imaginary part {value.imag:.3g}; state is corrupted")
    return float(value.real)


def populations(rho: np.ndarray) -> np.ndarray:
    """Tr[sigma_i^+ sigma_i^- rho] for sites 1..6."""
    return _OCC @ np.real(np.diagonal(rho))


def average_energy(rho: np.ndarray, h: np.ndarray) -> float:
    return _real(np.sum(h.T * rho), "Tr[H rho]")


def site_energy(rho: np.ndarray, eps) -> float:
    """sum_i eps_i * population_i, which omits the bond energy."""
    return float(np.dot(eps, populations(rho)))


def excitation_number(rho: np.ndarray) -> float:
    return float(np.dot(_OCC.sum(axis=0), np.real(np.diagonal(rho))))


def purity(rho: np.ndarray) -> float:
    return _real(np.sum(rho.T * rho), "Tr[rho^2]")


def ordered_eigh(h: np.ndarray, tol: float = 1e-9) -> hb.EigenSystem:
    # within a degenerate eigenspace order by the index of the dominant
    # computational-basis component, for reproducible passive states
    es = hb.eigh(h)
    e, v = np.array(es.energies), np.array(es.vectors)
    scale = tol * max(1.0, np.abs(e).max(initial=0.0))
    groups = np.concatenate(([0], np.cumsum(np.diff(e) > scale)))
    dominant = np.argmax(np.abs(v), axis=0)
    order = np.lexsort((dominant, groups))
    return hb.EigenSystem(e[order], v[:, order])


def ergotropy(rho: np.ndarray, h: np.ndarray, h_eig: hb.EigenSystem | None = None):
    """Maximal unitary work W and the passive state of ``rho``.

    Eigenvalues of rho sorted descending are paired with energies sorted
    ascending. Negative weights above ``CLAMP_FLOOR`` (Redfield rounding)
    are clamped to zero and the spectrum renormalized.
    """
    es = h_eig if h_eig is not None else ordered_eigh(h)
    r = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[::-1]
    if r.min() < 0:
        if r.min() < CLAMP_FLOOR:
            log.warning("density matrix eigenvalue %.3g below %.0e", r.min(), CLAMP_FLOOR)
        total = r.sum()
        r = np.clip(r, 0.0, None)
        if r.sum() > 0:
            r *= total / r.sum()
    passive_energy = float(np.dot(r, es.energies))
    energy = average_energy(rho, h)
    w = energy - passive_energy
    passive = (es.vectors * r) @ es.vectors.conj().T
    return w, passive


def is_passive(rho: np.ndarray, h: np.ndarray, tol: float = 1e-10) -> bool:
    return ergotropy(rho, h)[0] <= tol


def project_single_excitation(rho: np.ndarray) -> np.ndarray:
    idx = hb.single_excitation_indices()
    return rho[np.ix_(idx, idx)]


def report(rho: np.ndarray, h: np.ndarray, h_eig: hb.EigenSystem | None = None) -> EnergeticsReport:
    w, _ = ergotropy(rho, h, h_eig)
    e = average_energy(rho, h)
    return EnergeticsReport(
        energy=e,
        ergotropy=w,
        passive_energy=e - w,
        populations=tuple(float(x) for x in populations(rho)),
        n_expect=excitation_number(rho),
        purity=purity(rho),
    )
