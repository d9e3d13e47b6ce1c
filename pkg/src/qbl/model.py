"""The para-Benzene battery: Hamiltonian, dark state, couplings and symmetries."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import hilbert as hb

PROBE_KINDS = ("number_conserving", "dephasing", "custom")
RING = tuple((i, i % hb.N_SITES + 1) for i in range(1, hb.N_SITES + 1))
# mirror through the axis joining sites 1 and 4
MIRROR_PAIRS = ((2, 6), (3, 5))


@dataclass(frozen=True)
class ModelParams:
    eps: tuple[float, ...] = (250.0, 200.0, 200.0, 0.0, 200.0, 200.0)
    hopping: float = -60.0
    chi: float = 1.0
    gamma_sink: float = 0.1
    sink_site: int = 4
    probe_kind: str = "number_conserving"
    custom_probe: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "eps", tuple(float(e) for e in self.eps))
        if len(self.eps) != hb.N_SITES:
            raise ValueError(f"eps must have {hb.N_SITES} entries, got {len(self.eps)}")
        if not 0.0 <= self.chi <= 1.0:
            raise ValueError(f"chi must lie in [0, 1], got {self.chi}")
        if self.gamma_sink < 0:
            raise ValueError(f"gamma_sink must be >= 0, got {self.gamma_sink}")
        if not 1 <= self.sink_site <= hb.N_SITES:
            raise ValueError(f"sink_site must be in 1..{hb.N_SITES}, got {self.sink_site}")
        if self.probe_kind not in PROBE_KINDS:
            raise ValueError(f"probe_kind must be one of {PROBE_KINDS}, got {self.probe_kind!r}")

    def with_region(self, chi: float, gamma_sink: float) -> "ModelParams":
        return replace(self, chi=chi, gamma_sink=gamma_sink)


def build_hamiltonian(p: ModelParams) -> np.ndarray:
    h = np.zeros((hb.DIM, hb.DIM), dtype=complex)
    for i, e in enumerate(p.eps, start=1):
        h += e * hb.site_number(i)
    for i, j in RING:
        h += p.hopping * hb.hopping(i, j)
    return h


def dark_state() -> np.ndarray:
    """|DS> = (|5> + |6> - |2> - |3>) / 2 as a 64-dim amplitude vector."""
    v = np.zeros(hb.DIM, dtype=complex)
    for site, amp in ((5, 0.5), (6, 0.5), (2, -0.5), (3, -0.5)):
        v[hb.basis_index((site,))] = amp
    return v


def dark_density() -> np.ndarray:
    v = dark_state()
    return np.outer(v, v.conj())


def coupling_operator(which: str, p: ModelParams) -> np.ndarray:
    """System operator S_k coupling to environment ``which``.

    ``bath1`` and ``bath4`` are site occupations; the probe is
    sqrt(chi) times an operator chosen by ``p.probe_kind``.
    """
    if which == "bath1":
        return hb.site_number(1).copy()
    if which == "bath4":
        return hb.site_number(4).copy()
    if which != "probe":
        raise ValueError(f"unknown environment {which!r}; expected bath1, bath4 or probe")
    scale = np.sqrt(p.chi)
    if p.probe_kind == "number_conserving":
        return scale * (hb.site_number(2) + hb.site_number(3))
    if p.probe_kind == "dephasing":
        h = build_hamiltonian(p)
        return scale * h / np.linalg.norm(h, 2)
    if p.custom_probe is None:
        raise ValueError("probe_kind 'custom' requires a custom probe matrix")
    m = np.asarray(p.custom_probe, dtype=complex)
    if m.shape != (hb.DIM, hb.DIM):
        raise ValueError(f"custom probe must be {hb.DIM}x{hb.DIM}, got {m.shape}")
    if not hb.is_hermitian(m):
        raise ValueError("custom probe matrix is not Hermitian")
    return scale * m


def _mirror_generator() -> np.ndarray:
    # exp(i pi G) swaps two sites when G projects onto their antisymmetric
    # single-excitation state: G = (n_i + n_j - 2 n_i n_j - hop_ij) / 2
    g = np.zeros((hb.DIM, hb.DIM), dtype=complex)
    for i, j in MIRROR_PAIRS:
        ni, nj = hb.site_number(i), hb.site_number(j)
        g += 0.5 * (ni + nj - 2 * ni @ nj - hb.hopping(i, j))
    return g


def _literal_generator() -> np.ndarray:
    g = hb.site_number(1) + hb.site_number(4)
    for i, j in MIRROR_PAIRS:
        g = g + hb.hopping(i, j)
    return g


def symmetry_operator(literal: bool = False) -> np.ndarray:
    """Many-body reflection symmetry Pi.

    By default this is the site permutation 2<->6, 3<->5 written as
    exp(i pi G). ``literal=True`` instead exponentiates
    n_1 + n_4 + (sigma_2^+ sigma_6^- + sigma_3^+ sigma_5^- + H.c.) directly,
    which evaluates to (-1)^N and is trivial inside every excitation sector.
    """
    g = _literal_generator() if literal else _mirror_generator()
    return hb.unitary_exp(g, np.pi)


def single_excitation_symmetry() -> np.ndarray:
    m = np.zeros((hb.N_SITES, hb.N_SITES), dtype=complex)
    m[0, 0] = m[3, 3] = 1.0
    for i, j in MIRROR_PAIRS:
        m[i - 1, j - 1] = m[j - 1, i - 1] = 1.0
    return m


def restrict_single_excitation(op: np.ndarray) -> np.ndarray:
    idx = hb.single_excitation_indices()
    return op[np.ix_(idx, idx)]


def labelled_spectrum(h: np.ndarray, pi: np.ndarray | None = None):
    """Eigenvalues of H with excitation number and Pi parity per level.

    H is diagonalized inside each joint (N, Pi) eigenspace, so the labels
    are exact even where levels of opposite parity are degenerate.
    Returns (energies, sectors, parities) sorted by energy.
    """
    pi = symmetry_operator() if pi is None else pi
    counts = hb.excitation_counts()
    energies, sectors, parities = [], [], []
    for n in range(hb.N_SITES + 1):
        idx = hb.sector_indices(n)
        pw, pv = np.linalg.eigh(0.5 * (pi[np.ix_(idx, idx)] + pi[np.ix_(idx, idx)].conj().T))
        for sign in (1, -1):
            basis = pv[:, np.abs(pw - sign) < 1e-8]
            if basis.shape[1] == 0:
                continue
            block = basis.conj().T @ h[np.ix_(idx, idx)] @ basis
            e = np.linalg.eigvalsh(0.5 * (block + block.conj().T))
            energies.extend(e)
            sectors.extend([n] * len(e))
            parities.extend([sign] * len(e))
    if len(energies) != len(counts):
        raise ValueError("Pi does not split the excitation sectors into +1/-1 eigenspaces")
    order = np.argsort(energies, kind="stable")
    return np.array(energies)[order], np.array(sectors)[order], np.array(parities)[order]
