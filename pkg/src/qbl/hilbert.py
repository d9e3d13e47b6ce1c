"""Operator algebra on the six-site spin-1/2 ring.

Operators are plain ``numpy`` arrays of dtype ``complex128``. The basis
convention is fixed: site 1 is the leftmost tensor factor, so bit ``6 - i``
of a basis index (most-significant bit first) encodes the occupation of
site ``i``. An excited site is a set bit.
"""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np

N_SITES = 6
DIM = 2**N_SITES

_LOWER = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
_RAISE = _LOWER.T.copy()


class EigenSystem(NamedTuple):
    """Ascending eigenvalues and the unitary of column eigenvectors."""

    energies: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.vectors
        return (v * self.energies) @ v.conj().T


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def check_finite(a: np.ndarray, what: str = "operator") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains non-finite entries")
    return a


def basis_index(occupied: tuple[int, ...] | list[int]) -> int:
    """Index of the computational basis state with the given sites excited."""
    idx = 0
    for i in occupied:
        if not 1 <= i <= N_SITES:
            raise ValueError(f"site index {i} outside 1..{N_SITES}")
        idx |= 1 << (N_SITES - i)
    return idx


def basis_vector(occupied: tuple[int, ...] | list[int] = ()) -> np.ndarray:
    v = np.zeros(DIM, dtype=complex)
    v[basis_index(occupied)] = 1.0
    return v


def occupations(index: int) -> tuple[int, ...]:
    return tuple(int(b) for b in format(index, f"0{N_SITES}b"))


@lru_cache(maxsize=None)
def _ladder(i: int, kind: str) -> np.ndarray:
    op = _RAISE if kind == "raising" else _LOWER
    mats = [op if k == i else np.eye(2, dtype=complex) for k in range(1, N_SITES + 1)]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return _frozen(out)


def site_ladder(i: int, kind: str) -> np.ndarray:
    """sigma_i^+ (``kind="raising"``) or sigma_i^- embedded in the 64-dim space."""
    if not isinstance(i, (int, np.integer)) or not 1 <= i <= N_SITES:
        raise ValueError(f"site index must be an integer in 1..{N_SITES}, got {i!r}")
    if kind not in ("raising", "lowering"):
        raise ValueError(f"kind must be 'raising' or 'lowering', got {kind!r}")
    return _ladder(int(i), kind)


def site_number(i: int) -> np.ndarray:
    """sigma_i^+ sigma_i^-, the occupation of site ``i``."""
    return site_ladder(i, "raising") @ site_ladder(i, "lowering")


def hopping(i: int, j: int) -> np.ndarray:
    """sigma_i^+ sigma_j^- + H.c."""
    a = site_ladder(i, "raising") @ site_ladder(j, "lowering")
    return a + a.conj().T


@lru_cache(maxsize=None)
def _number() -> np.ndarray:
    counts = np.array([bin(k).count("1") for k in range(DIM)], dtype=float)
    return _frozen(np.diag(counts).astype(complex))


def number_operator() -> np.ndarray:
    """Total excitation number N, diagonal in the computational basis."""
    return _number()


def excitation_counts() -> np.ndarray:
    return np.array([bin(k).count("1") for k in range(DIM)])


def sector_indices(n: int) -> np.ndarray:
    """Computational basis indices with exactly ``n`` excited sites."""
    return np.flatnonzero(excitation_counts() == n)


def single_excitation_indices() -> np.ndarray:
    """Basis indices of |1>, ..., |6>, in site order."""
    return np.array([basis_index((i,)) for i in range(1, N_SITES + 1)])


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


def fro(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def is_hermitian(a: np.ndarray, rtol: float = 1e-10) -> bool:
    scale = max(fro(a), 1.0)
    return fro(a - a.conj().T) <= rtol * scale


def eigh(a: np.ndarray) -> EigenSystem:
    """Hermitian eigendecomposition with ascending energies."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    check_finite(a)
    if not is_hermitian(a):
        raise ValueError("eigh requires a Hermitian operator")
    herm = 0.5 * (a + a.conj().T)
    e, v = np.linalg.eigh(herm)
    return EigenSystem(_frozen(e), _frozen(v))


def sector_eigh(a: np.ndarray, counts: np.ndarray | None = None) -> tuple[EigenSystem, np.ndarray]:
    """Diagonalize an N-conserving operator sector by sector.

    Every eigenvector is supported on a single excitation sector, which keeps
    off-sector entries of transformed operators exactly zero. Returns the
    eigensystem and the excitation number of each eigenvector.
    """
    a = np.asarray(a, dtype=complex)
    if counts is None:
        counts = excitation_counts()
    if not is_hermitian(a):
        raise ValueError("sector_eigh requires a Hermitian operator")
    mask = counts[:, None] != counts[None, :]
    if np.any(np.abs(a[mask]) > 1e-12 * max(fro(a), 1.0)):
        raise ValueError("operator does not conserve the excitation number")
    dim = a.shape[0]
    energies = np.empty(dim)
    vectors = np.zeros((dim, dim), dtype=complex)
    labels = np.empty(dim, dtype=int)
    col = 0
    for n in np.unique(counts):
        idx = np.flatnonzero(counts == n)
        block = a[np.ix_(idx, idx)]
        e, v = np.linalg.eigh(0.5 * (block + block.conj().T))
        k = len(idx)
        energies[col:col + k] = e
        vectors[idx, col:col + k] = v
        labels[col:col + k] = n
        col += k
    order = np.argsort(energies, kind="stable")
    es = EigenSystem(_frozen(energies[order]), _frozen(vectors[:, order]))
    return es, _frozen(labels[order])


def unitary_exp(g: np.ndarray, s: float) -> np.ndarray:
    """exp(i s G) for Hermitian G, via its eigendecomposition."""
    es = eigh(g)
    phases = np.exp(1j * s * es.energies)
    return (es.vectors * phases) @ es.vectors.conj().T
