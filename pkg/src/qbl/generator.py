"""Non-secular Redfield generator with an optional Lindblad sink.

Everything is stored in the eigenbasis of H. For one environment with
coupling S and Lambda[a, b] = S[a, b] * Gamma(E_b - E_a), the dissipator is

    R[rho] = Lambda rho S - S Lambda rho + H.c.,

which is the second-order Born-Markov term -int_0^inf C(t) [S, S(-t) rho] dt
+ H.c. for the correlation function C of :mod:`qbl.bath`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import hilbert as hb
from .bath import BathSpec, half_fourier
from .model import symmetry_operator


class Environment(NamedTuple):
    name: str
    coupling: np.ndarray
    bath: BathSpec


class SectorBlock(NamedTuple):
    n: int
    indices: np.ndarray  # eigenvector indices spanning the sector
    matrix: np.ndarray  # (d*d, d*d), acting on C-order vec of d x d blocks


def _secular_pairs(energies, s_ops, lam_ops, tol):
    """Index/coefficient arrays for the secular part of sum_k Lambda_k rho S_k."""
    dim = len(energies)
    out_idx, in_idx, coef = [], [], []
    for s, lam in zip(s_ops, lam_ops):
        la, lc = np.nonzero(lam)
        sd, sb = np.nonzero(s)
        key_l = energies[lc] - energies[la]
        key_s = energies[sd] - energies[sb]
        keys = np.concatenate((key_l, key_s))
        order = np.argsort(keys, kind="stable")
        cluster = np.empty(keys.size, dtype=int)
        cluster[order] = np.concatenate(([0], np.cumsum(np.diff(keys[order]) > tol)))
        cl_l, cl_s = cluster[: key_l.size], cluster[key_l.size:]
        for g in np.intersect1d(cl_l, cl_s):
            il = np.flatnonzero(cl_l == g)
            js = np.flatnonzero(cl_s == g)
            a, c = la[il][:, None], lc[il][:, None]
            d, b = sd[js][None, :], sb[js][None, :]
            out_idx.append((a * dim + b).ravel())
            in_idx.append((c * dim + d).ravel())
            coef.append((lam[la[il], lc[il]][:, None] * s[sd[js], sb[js]][None, :]).ravel())
    if not out_idx:
        return np.zeros(0, int), np.zeros(0, int), np.zeros(0, complex)
    return np.concatenate(out_idx), np.concatenate(in_idx), np.concatenate(coef)


class _Kernel:
    """Right-hand side on a subset of eigenstates (possibly all 64)."""

    def __init__(self, energies, s_ops, lam_ops, sink_op, sink_rate, secular):
        self.energies = energies
        self.dim = len(energies)
        self.s_ops = np.array(s_ops).reshape(-1, self.dim, self.dim)
        self.lam_ops = np.array(lam_ops).reshape(-1, self.dim, self.dim)
        self.sink_rate = sink_rate
        self.sink_op = sink_op
        self.secular = secular
        sl = np.einsum("kab,kbc->ac", self.s_ops, self.lam_ops) if len(self.s_ops) else 0
        if secular:
            tol = 1e-7 * (1.0 + np.abs(energies).max(initial=0.0))
            same = np.abs(energies[:, None] - energies[None, :]) <= tol
            sl = sl * same
            self._pairs = _secular_pairs(energies, self.s_ops, self.lam_ops, tol)
        m = 1j * np.diag(energies).astype(complex) + sl
        if sink_rate > 0:
            m = m + 0.5 * sink_rate * (sink_op.conj().T @ sink_op)
        self.m = m
        self.m_dag = m.conj().T

    def _jump(self, r):
        # sum_k Lambda_k r S_k
        if not len(self.s_ops):
            return np.zeros_like(r)
        if self.secular:
            out_idx, in_idx, coef = self._pairs
            w = coef * r.ravel()[in_idx]
            size = self.dim * self.dim
            flat = np.bincount(out_idx, w.real, size) + 1j * np.bincount(out_idx, w.imag, size)
            return flat.reshape(self.dim, self.dim)
        return sum(lam @ r @ s for lam, s in zip(self.lam_ops, self.s_ops))

    def rhs(self, rho):
        """d rho / dt for Hermitian rho."""
        x = self._jump(rho) - self.m @ rho
        if self.sink_rate > 0:
            x += 0.5 * self.sink_rate * (self.sink_op @ rho @ self.sink_op.conj().T)
        return x + x.conj().T

    def linear(self, r):
        """The same map extended complex-linearly to arbitrary matrices."""
        out = self._jump(r) + self._jump(r.conj().T).conj().T - self.m @ r - r @ self.m_dag
        if self.sink_rate > 0:
            out += self.sink_rate * (self.sink_op @ r @ self.sink_op.conj().T)
        return out


@dataclass(frozen=True, eq=False)
class RedfieldGenerator:
    hamiltonian: np.ndarray
    eig: hb.EigenSystem
    sectors: Optional[np.ndarray]  # excitation number per eigenvector, if H conserves N
    environments: tuple[Environment, ...]
    couplings: tuple[tuple[np.ndarray, np.ndarray], ...]  # (S_k, Lambda_k) in eigenbasis
    sink_rate: float
    sink_site: int
    sink_op: np.ndarray  # sigma_site^- in eigenbasis
    include_lamb_shift: bool = True
    secular: bool = False
    symmetries: dict = field(default_factory=dict)

    def __post_init__(self):
        full = _Kernel(
            self.eig.energies,
            [c[0] for c in self.couplings],
            [c[1] for c in self.couplings],
            self.sink_op,
            self.sink_rate,
            self.secular,
        )
        object.__setattr__(self, "_full", full)

    @property
    def sink_enabled(self) -> bool:
        return self.sink_rate > 0

    @property
    def dim(self) -> int:
        return len(self.eig.energies)

    def to_eig(self, rho: np.ndarray) -> np.ndarray:
        v = self.eig.vectors
        return v.conj().T @ rho @ v

    def from_eig(self, rho_e: np.ndarray) -> np.ndarray:
        v = self.eig.vectors
        return v @ rho_e @ v.conj().T

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """d rho / dt in the computational basis, for Hermitian rho."""
        return self.from_eig(self._full.rhs(self.to_eig(rho)))

    def apply_eig(self, rho_e: np.ndarray) -> np.ndarray:
        return self._full.rhs(rho_e)

    def apply_linear_eig(self, r: np.ndarray) -> np.ndarray:
        return self._full.linear(r)

    def kernel(self, indices: Optional[np.ndarray] = None) -> _Kernel:
        """The right-hand side restricted to the eigenstates ``indices``.

        Only meaningful when those states span an invariant subspace, as
        returned by :meth:`invariant_support`.
        """
        if indices is None or len(indices) == self.dim:
            return self._full
        ix = np.ix_(indices, indices)
        return _Kernel(
            self.eig.energies[indices],
            [s[ix] for s, _ in self.couplings],
            [lam[ix] for _, lam in self.couplings],
            self.sink_op[ix],
            self.sink_rate,
            self.secular,
        )

    def invariant_support(self, rho_e: np.ndarray) -> np.ndarray:
        """Smallest set of eigenstates whose operator space holds rho's orbit.

        With N-conserving couplings the dynamics stays inside the occupied
        excitation sectors, plus every lower sector once the sink is on.
        """
        if self.sectors is None or not self.symmetries.get("number_couplings", False):
            return np.arange(self.dim)
        weight = np.any(rho_e != 0, axis=1) | np.any(rho_e != 0, axis=0)
        occupied = np.unique(self.sectors[weight])
        if occupied.size == 0:
            return np.arange(self.dim)
        if self.sink_enabled:
            occupied = np.arange(0, occupied.max() + 1)
        return np.flatnonzero(np.isin(self.sectors, occupied))


def _commutes(a, b, tol=1e-10):
    scale = max(hb.fro(a) * hb.fro(b), 1.0)
    return hb.fro(a @ b - b @ a) <= tol * scale


def build_generator(
    h: np.ndarray,
    envs: Sequence[Environment | tuple],
    sink: tuple[float, int] = (0.0, 4),
    include_lamb_shift: bool = True,
    secular: bool = False,
) -> RedfieldGenerator:
    """Precompute eigenbasis ingredients of the master equation for H."""
    h = np.asarray(h, dtype=complex)
    if not hb.is_hermitian(h):
        raise ValueError("Hamiltonian is not Hermitian")
    envs = tuple(e if isinstance(e, Environment) else Environment(*e) for e in envs)
    for env in envs:
        if not hb.is_hermitian(env.coupling):
            raise ValueError(f"coupling operator of {env.name!r} is not Hermitian")
    rate, site = sink
    if rate < 0:
        raise ValueError(f"sink rate must be >= 0, got {rate}")

    n_op = hb.number_operator()
    if h.shape == n_op.shape and _commutes(h, n_op, 1e-12):
        eig, sectors = hb.sector_eigh(h)
    else:
        eig, sectors = hb.eigh(h), None
    v = eig.vectors
    bohr = eig.energies[None, :] - eig.energies[:, None]  # E_b - E_a

    couplings = []
    for env in envs:
        s_e = v.conj().T @ env.coupling @ v
        if sectors is not None:
            # kill rounding noise across sectors so sector blocks stay exact
            s_e = np.where(sectors[:, None] == sectors[None, :], s_e, 0.0)
        freqs, inverse = np.unique(bohr.ravel(), return_inverse=True)
        gam = half_fourier(freqs, env.bath)[inverse].reshape(bohr.shape)
        if not include_lamb_shift:
            gam = gam.real.astype(complex)
        couplings.append((s_e, s_e * gam))

    sink_op = v.conj().T @ hb.site_ladder(site, "lowering") @ v
    if sectors is not None:
        sink_op = np.where(sectors[:, None] + 1 == sectors[None, :], sink_op, 0.0)

    number_couplings = sectors is not None and all(_commutes(e.coupling, n_op) for e in envs)
    pi_op = symmetry_operator() if h.shape == n_op.shape else None
    parity = pi_op is not None and _commutes(h, pi_op) and all(_commutes(e.coupling, pi_op) for e in envs)
    if rate > 0 and parity:
        lower = hb.site_ladder(site, "lowering")
        parity = _commutes(lower, pi_op)
    symmetries = {
        "number_couplings": number_couplings,
        "number": number_couplings and rate == 0,
        "parity": parity,
    }
    return RedfieldGenerator(
        hamiltonian=h,
        eig=eig,
        sectors=sectors,
        environments=envs,
        couplings=tuple(couplings),
        sink_rate=float(rate),
        sink_site=int(site),
        sink_op=sink_op,
        include_lamb_shift=include_lamb_shift,
        secular=secular,
        symmetries=symmetries,
    )


def sector_blocks(gen: RedfieldGenerator) -> list[SectorBlock]:
    """Explicit generator blocks on each diagonal excitation sector."""
    if gen.sink_enabled:
        raise ValueError("sector blocks require the sink to be disabled; it couples sectors")
    if gen.sectors is None or not gen.symmetries["number_couplings"]:
        raise ValueError("generator does not conserve the excitation number")
    blocks = []
    for n in range(hb.N_SITES + 1):
        idx = np.flatnonzero(gen.sectors == n)
        ker = gen.kernel(idx)
        d = len(idx)
        mat = np.empty((d * d, d * d), dtype=complex)
        for col in range(d * d):
            unit = np.zeros(d * d, dtype=complex)
            unit[col] = 1.0
            mat[:, col] = ker.linear(unit.reshape(d, d)).ravel()
        blocks.append(SectorBlock(n, idx, mat))
    return blocks
