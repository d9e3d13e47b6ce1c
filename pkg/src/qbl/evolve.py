"""Time integration, steady states and the three-region battery protocol.

Internal units: hbar = 1, energies in cm^-1, time in (cm^-1)^-1. One
internal time unit is 1 / (2 pi c) = 5.309 ps.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.integrate import DOP853

from . import hilbert as hb
from . import observables as obs
from .bath import BathSpec
from .generator import Environment, RedfieldGenerator, build_generator, sector_blocks
from .model import ModelParams, build_hamiltonian, coupling_operator

log = logging.getLogger(__name__)

C_CM_PER_PS = 0.0299792458
PS_PER_UNIT = 1.0 / (2.0 * np.pi * C_CM_PER_PS)
POSITIVITY_WARN = -1e-6


class IntegrationError(RuntimeError):
    pass


class SteadyStateError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class BathSet(NamedTuple):
    bath1: BathSpec = BathSpec()
    bath4: BathSpec = BathSpec()
    probe: BathSpec = BathSpec(lam=10.0)


@dataclass(frozen=True)
class Region:
    label: str
    chi: float
    sink_enabled: bool
    duration: Optional[float] = None
    stop: Optional[str] = None  # "residual" or "n_expect"
    stop_tol: Optional[float] = None
    cap: float = 50.0
    sample_interval: float = 0.05

    def __post_init__(self):
        if self.stop not in (None, "residual", "n_expect"):
            raise ValueError(f"unknown stop condition {self.stop!r}")
        if self.duration is None and self.stop is None:
            raise ValueError(f"region {self.label} needs a duration or a stop condition")
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be > 0")


@dataclass(frozen=True)
class RegionSchedule:
    regions: tuple[Region, ...]
    rtol: float = 1e-8
    atol: float = 1e-10

    @classmethod
    def default(cls, **kw) -> "RegionSchedule":
        return cls(
            (
                Region("I", chi=0.0, sink_enabled=False, duration=0.5, sample_interval=0.01),
                Region("II", chi=1.0, sink_enabled=False, stop="residual", cap=50.0, sample_interval=0.05),
                Region("III", chi=1.0, sink_enabled=True, stop="n_expect", stop_tol=1e-4, cap=500.0,
                       sample_interval=0.5),
            ),
            **kw,
        )

    def only(self, labels: Sequence[str]) -> "RegionSchedule":
        """Regions with the given labels, in schedule order."""
        known = {r.label for r in self.regions}
        unknown = [x for x in labels if x not in known]
        if unknown:
            raise ValueError(f"unknown region(s) {unknown}; schedule has {sorted(known)}")
        return RegionSchedule(tuple(r for r in self.regions if r.label in labels), self.rtol, self.atol)


@dataclass
class Trajectory:
    times: np.ndarray
    regions: list
    populations: np.ndarray
    energy: np.ndarray
    ergotropy: np.ndarray
    n_expect: np.ndarray
    purity: np.ndarray
    trace_dev: np.ndarray
    min_eig: np.ndarray
    final_state: np.ndarray
    states: Optional[list] = None
    final_residual: float = float("nan")
    stopped: bool = False
    t_end: float = float("nan")
    boundaries: list = field(default_factory=list)  # (time, left state, right state)

    @property
    def time_ps(self) -> np.ndarray:
        return self.times * PS_PER_UNIT

    def __len__(self):
        return len(self.times)

    def region_mask(self, label: str) -> np.ndarray:
        return np.array([r == label for r in self.regions])

    @classmethod
    def concatenate(cls, parts: Sequence["Trajectory"]) -> "Trajectory":
        keep = parts[0].states is not None
        return cls(
            times=np.concatenate([p.times for p in parts]),
            regions=[r for p in parts for r in p.regions],
            populations=np.concatenate([p.populations for p in parts]),
            energy=np.concatenate([p.energy for p in parts]),
            ergotropy=np.concatenate([p.ergotropy for p in parts]),
            n_expect=np.concatenate([p.n_expect for p in parts]),
            purity=np.concatenate([p.purity for p in parts]),
            trace_dev=np.concatenate([p.trace_dev for p in parts]),
            min_eig=np.concatenate([p.min_eig for p in parts]),
            final_state=parts[-1].final_state,
            states=[s for p in parts for s in p.states] if keep else None,
            final_residual=parts[-1].final_residual,
            stopped=parts[-1].stopped,
            t_end=parts[-1].t_end,
        )


class _Recorder:
    def __init__(self, gen: RedfieldGenerator, region: str, keep_states: bool):
        self.gen = gen
        self.region = region
        self.keep = keep_states
        self.rows = []
        self.states = [] if keep_states else None
        self.warned = False

    def add(self, t: float, rho: np.ndarray):
        evals = np.linalg.eigvalsh(rho)
        w, _ = obs.ergotropy(rho, self.gen.hamiltonian, self.gen.eig)
        tr = np.trace(rho)
        if evals[0] < POSITIVITY_WARN and not self.warned:
            warnings.warn(f"density matrix eigenvalue {evals[0]:.3g} at t={t:.4g}", RuntimeWarning)
            self.warned = True
        self.rows.append((
            t,
            obs.populations(rho),
            obs.average_energy(rho, self.gen.hamiltonian),
            w,
            obs.excitation_number(rho),
            obs.purity(rho),
            abs(tr - 1.0),
            evals[0],
        ))
        if self.keep:
            self.states.append(rho)

    def build(self, final_state, residual) -> Trajectory:
        cols = list(zip(*self.rows)) if self.rows else [[]] * 8
        return Trajectory(
            times=np.array(cols[0], dtype=float),
            regions=[self.region] * len(self.rows),
            populations=np.array(cols[1], dtype=float).reshape(-1, hb.N_SITES),
            energy=np.array(cols[2], dtype=float),
            ergotropy=np.array(cols[3], dtype=float),
            n_expect=np.array(cols[4], dtype=float),
            purity=np.array(cols[5], dtype=float),
            trace_dev=np.array(cols[6], dtype=float),
            min_eig=np.array(cols[7], dtype=float),
            final_state=final_state,
            states=self.states,
            final_residual=residual,
        )


def _hermitize(y: np.ndarray, d: int) -> None:
    m = y.reshape(d, d)
    m[...] = 0.5 * (m + m.conj().T)


def integrate(
    gen: RedfieldGenerator,
    rho0: np.ndarray,
    span: tuple[float, float],
    rtol: float = 1e-8,
    atol: float = 1e-10,
    sample_interval: Optional[float] = None,
    t_eval: Optional[Sequence[float]] = None,
    stop: Optional[Callable[[float, np.ndarray, np.ndarray], bool]] = None,
    keep_states: bool = False,
    reduce: bool = True,
    region: str = "",
    include_start: bool = True,
    max_step: Optional[float] = None,
) -> Trajectory:
    """Integrate the master equation with an adaptive Dormand-Prince 8(5,3).

    ``rho0`` and recorded states are in the computational basis. With
    ``reduce`` the state is propagated only on the smallest invariant set of
    eigenstates (exact; just cheaper). ``stop(t, rho_e, drho_e)`` is checked
    after every accepted step on the reduced eigenbasis blocks and ends the
    run at that step. Steps never exceed the sample spacing unless
    ``max_step`` says otherwise; dense output over much longer steps is
    visibly less accurate than the step endpoints.
    """
    t0, t1 = map(float, span)
    if t1 <= t0:
        raise ValueError("integration span must be increasing")
    if not hb.is_hermitian(rho0, 1e-8):
        raise ValueError("initial state is not Hermitian")
    if abs(np.trace(rho0) - 1.0) > 1e-8:
        raise ValueError(f"initial state has trace {np.trace(rho0).real:.12g}, expected 1")

    rho_e = gen.to_eig(np.asarray(rho0, dtype=complex))
    idx = gen.invariant_support(rho_e) if reduce else np.arange(gen.dim)
    kern = gen.kernel(idx)
    d = len(idx)
    ix = np.ix_(idx, idx)
    vsub = gen.eig.vectors[:, idx]

    def to_site(y):
        m = y.reshape(d, d)
        return vsub @ m @ vsub.conj().T

    if t_eval is not None:
        samples = np.asarray(sorted(t_eval), dtype=float)
    elif sample_interval is not None:
        k = int(np.floor((t1 - t0) / sample_interval + 1e-9))
        samples = t0 + sample_interval * np.arange(k + 1)
    else:
        samples = np.array([t0])
    if not include_start:
        samples = samples[samples > t0]

    rec = _Recorder(gen, region, keep_states)
    y0 = np.ascontiguousarray(rho_e[ix]).ravel()
    _hermitize(y0, d)

    def fun(_t, y):
        return kern.rhs(y.reshape(d, d)).ravel()

    if max_step is None:
        max_step = float(np.min(np.diff(samples))) if len(samples) > 1 else np.inf
    solver = DOP853(fun, t0, y0, t1, rtol=rtol, atol=atol, max_step=max_step)
    pos = 0
    while pos < len(samples) and samples[pos] <= t0:
        rec.add(t0, to_site(y0))
        pos += 1
    stopped = False
    while solver.status == "running":
        t_prev = solver.t
        msg = solver.step()
        if solver.status == "failed":
            raise IntegrationError(f"integration failed at t={solver.t:.6g}: {msg}")
        if not np.all(np.isfinite(solver.y)):
            raise IntegrationError(f"non-finite state at t={solver.t:.6g}")
        _hermitize(solver.y, d)
        t = solver.t
        if pos < len(samples) and samples[pos] <= t:
            dense = solver.dense_output()
            while pos < len(samples) and samples[pos] <= t:
                y = dense(samples[pos]) if samples[pos] < t else solver.y.copy()
                _hermitize(y, d)
                rec.add(samples[pos], to_site(y))
                pos += 1
        if stop is not None and stop(t, solver.y.reshape(d, d), solver.f.reshape(d, d)):
            stopped = True
            if not rec.rows or rec.rows[-1][0] < t:
                rec.add(t, to_site(solver.y))
            break
        if t_prev == t:
            raise IntegrationError(f"step size underflow at t={t:.6g}")

    final = to_site(solver.y)
    residual = float(np.linalg.norm(solver.f))
    traj = rec.build(final, residual)
    traj.stopped = stopped
    traj.t_end = float(solver.t)
    return traj


def residual_stop(tol: float):
    return lambda t, rho_e, drho_e: np.linalg.norm(drho_e) <= tol


def number_stop(gen: RedfieldGenerator, rho0: np.ndarray, tol: float, reduce: bool = True):
    idx = gen.invariant_support(gen.to_eig(rho0)) if reduce else np.arange(gen.dim)
    if gen.sectors is not None:
        counts = gen.sectors[idx].astype(float)
        return lambda t, rho_e, drho_e: float(np.dot(counts, np.real(np.diagonal(rho_e)))) < tol
    n_e = gen.to_eig(hb.number_operator())[np.ix_(idx, idx)]
    return lambda t, rho_e, drho_e: float(np.real(np.sum(n_e.T * rho_e))) < tol


def default_residual_tol(gen: RedfieldGenerator) -> float:
    return 1e-10 * hb.fro(gen.hamiltonian)


def steady_state(
    gen: RedfieldGenerator,
    rho0: np.ndarray,
    residual_tol: Optional[float] = None,
    max_time: float = 50.0,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> np.ndarray:
    """Propagate until ||d rho / dt||_F <= residual_tol."""
    tol = default_residual_tol(gen) if residual_tol is None else residual_tol
    traj = integrate(gen, rho0, (0.0, max_time), rtol=rtol, atol=atol, stop=residual_stop(tol))
    if not traj.stopped:
        raise SteadyStateError(
            f"no steady state within t={max_time}: residual {traj.final_residual:.3g} > {tol:.3g}",
            traj.final_residual,
        )
    return traj.final_state


class SectorSteadyState(NamedTuple):
    n: int
    rho: np.ndarray
    gap_ratio: float
    null_dim: int


def sector_steady_states(gen: RedfieldGenerator, gap_tol: float = 1e-8) -> list[SectorSteadyState]:
    """Null vector of each excitation-sector block, as a unit-trace state."""
    out = []
    for blk in sector_blocks(gen):
        d = len(blk.indices)
        if d == 1:
            s = np.abs(blk.matrix).ravel()
            null_vec = np.ones(1, dtype=complex)
            gap = np.inf
            null_dim = 1 if s[0] <= gap_tol * max(1.0, hb.fro(gen.hamiltonian)) else 0
        else:
            _, s, vh = np.linalg.svd(blk.matrix)
            null_dim = int(np.sum(s <= gap_tol * s[0]))
            null_vec = vh[-1].conj()
            gap = s[-2] / s[-1] if s[-1] > 0 else np.inf
        if null_dim != 1:
            raise SteadyStateError(
                f"sector {blk.n}: null space dimension {null_dim}, expected 1 "
                "(degenerate parameters or a symmetry left unbroken)",
                float(s[-1]),
            )
        m = null_vec.reshape(d, d)
        m = m / np.trace(m)
        m = 0.5 * (m + m.conj().T)
        rho_e = np.zeros((gen.dim, gen.dim), dtype=complex)
        rho_e[np.ix_(blk.indices, blk.indices)] = m
        rho = gen.from_eig(rho_e)
        lo = np.linalg.eigvalsh(m)[0]
        if lo < POSITIVITY_WARN:
            warnings.warn(f"sector {blk.n} steady state has eigenvalue {lo:.3g}", RuntimeWarning)
        out.append(SectorSteadyState(blk.n, rho, float(gap), null_dim))
    return out


def make_generator(
    p: ModelParams,
    baths: BathSet = BathSet(),
    include_lamb_shift: bool = True,
    secular: bool = False,
) -> RedfieldGenerator:
    """Generator for the battery with probe strength p.chi and sink rate p.gamma_sink."""
    h = build_hamiltonian(p)
    envs = [
        Environment("bath1", coupling_operator("bath1", p), baths.bath1),
        Environment("bath4", coupling_operator("bath4", p), baths.bath4),
    ]
    if p.chi > 0:
        envs.append(Environment("probe", coupling_operator("probe", p), baths.probe))
    return build_generator(h, envs, (p.gamma_sink, p.sink_site), include_lamb_shift, secular)


def run_protocol(
    p: ModelParams,
    schedule: Optional[RegionSchedule] = None,
    baths: BathSet = BathSet(),
    rho0: Optional[np.ndarray] = None,
    include_lamb_shift: bool = True,
    secular: bool = False,
    keep_states: bool = False,
) -> Trajectory:
    """Run the regions in order from ``rho0`` (default: the dark state)."""
    from .model import dark_density

    schedule = schedule or RegionSchedule.default()
    rho = dark_density() if rho0 is None else rho0
    t = 0.0
    parts, boundaries = [], []
    for k, reg in enumerate(schedule.regions):
        params = p.with_region(chi=reg.chi, gamma_sink=p.gamma_sink if reg.sink_enabled else 0.0)
        gen = make_generator(params, baths, include_lamb_shift, secular)
        if reg.stop == "residual":
            tol = reg.stop_tol if reg.stop_tol is not None else default_residual_tol(gen)
            stop = residual_stop(tol)
        elif reg.stop == "n_expect":
            stop = number_stop(gen, rho, reg.stop_tol if reg.stop_tol is not None else 1e-4)
        else:
            stop = None
        length = reg.duration if reg.duration is not None else reg.cap
        log.info("region %s: chi=%g sink=%s from t=%g", reg.label, params.chi, params.gamma_sink, t)
        try:
            part = integrate(
                gen, rho, (t, t + length), rtol=schedule.rtol, atol=schedule.atol,
                sample_interval=reg.sample_interval, stop=stop, keep_states=keep_states,
                region=reg.label, include_start=(k == 0),
            )
        except IntegrationError as exc:
            raise IntegrationError(f"region {reg.label}: {exc}") from exc
        if reg.stop is not None and reg.duration is None and not part.stopped:
            raise SteadyStateError(
                f"region {reg.label}: stop condition '{reg.stop}' not met within cap {reg.cap}",
                part.final_residual,
            )
        parts.append(part)
        t = part.t_end
        if k + 1 < len(schedule.regions):
            boundaries.append((t, part.final_state, part.final_state.copy()))
        rho = part.final_state
    traj = Trajectory.concatenate(parts)
    traj.boundaries = boundaries
    return traj
