"""Self-checks: module invariants plus independent oracles.

Each check returns ``(passed, detail)``. ``run_checks`` times them, turns
exceptions into failures and prints a PASS/FAIL table.
"""

from __future__ import annotations

import time
import traceback
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import expm

from . import hilbert as hb
from . import observables as obs
from .bath import correlation_function, half_fourier, rate_gamma
from .config import RunConfig
from .evolve import BathSet, integrate, make_generator, run_protocol, sector_steady_states
from .generator import build_generator
from .model import (
    build_hamiltonian, coupling_operator, dark_density, dark_state, restrict_single_excitation,
    single_excitation_symmetry, symmetry_operator,
)


# ---------------------------------------------------------------- oracles

def quadrature_dissipator(h, envs, rho, tau_max: float = 0.5, epsrel: float = 1e-11):
    """-int_0^inf C(t) [S, S(-t) rho] dt + H.c. by adaptive quadrature.

    Works in the computational basis with S(-t) = exp(-iHt) S exp(iHt);
    ``envs`` holds (coupling, BathSpec) pairs. The unitary part is not included.
    """
    e, v = np.linalg.eigh(h)
    out = np.zeros_like(rho, dtype=complex)
    for s, bath in envs:
        s_e = v.conj().T @ s @ v
        rho_e = v.conj().T @ rho @ v

        def integrand(t):
            ph = np.exp(-1j * e * t)
            s_t = (ph[:, None] * s_e) * ph.conj()[None, :]
            c = correlation_function(t, bath)
            return (-c * (s_e @ s_t @ rho_e - s_t @ rho_e @ s_e)).ravel()

        # split where the log singularity at 0 and the fast Matsubara decay live
        pts = [0.0, 1e-5, 1e-4, 1e-3, 1e-2, 0.05, 0.15, tau_max]
        acc = np.zeros(rho.size, dtype=complex)
        for a, b in zip(pts[:-1], pts[1:]):
            val, _ = quad_vec(integrand, a, b, epsrel=epsrel, epsabs=1e-14, limit=400)
            acc += val
        x = acc.reshape(rho.shape)
        out += v @ (x + x.conj().T) @ v.conj().T
    return out


def lindblad_sink(rho, rate: float, site: int):
    lower = hb.site_ladder(site, "lowering")
    jj = lower.conj().T @ lower
    return rate * (lower @ rho @ lower.conj().T - 0.5 * (jj @ rho + rho @ jj))


def exact_closed(h, rho0, t: float):
    u = expm(-1j * h * t)
    return u @ rho0 @ u.conj().T


def random_state(rng: np.random.Generator, dim: int = hb.DIM, rank: int | None = None):
    """Random full-rank (or given rank) density matrix from a Ginibre draw."""
    k = rank or dim
    g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def rel_fro(a, b) -> float:
    return hb.fro(a - b) / max(hb.fro(b), 1e-300)


# ---------------------------------------------------------------- checks

class Context:
    """Lazily built objects shared between checks."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._cache = {}

    def get(self, key, factory):
        if key not in self._cache:
            self._cache[key] = factory()
        return self._cache[key]

    @property
    def params(self):
        return self.get("params", self.cfg.model_params)

    @property
    def baths(self) -> BathSet:
        return self.get("baths", self.cfg.baths)

    @property
    def hamiltonian(self):
        return self.get("h", lambda: build_hamiltonian(self.params))

    @property
    def trajectory(self):
        def run():
            return run_protocol(
                self.params, self.cfg.schedule(), self.baths,
                include_lamb_shift=self.cfg.toggles.include_lamb_shift,
                secular=self.cfg.toggles.secular,
            )
        return self.get("traj", run)


def check_operator_algebra(ctx: Context):
    worst = 0.0
    eye = np.eye(hb.DIM)
    for i in range(1, hb.N_SITES + 1):
        up, dn = hb.site_ladder(i, "raising"), hb.site_ladder(i, "lowering")
        worst = max(worst, hb.fro(hb.anticommutator(up, dn) - eye), hb.fro(dn @ dn))
        for j in range(i + 1, hb.N_SITES + 1):
            worst = max(worst, hb.fro(hb.commutator(dn, hb.site_ladder(j, "raising"))))
    h = ctx.hamiltonian
    recon = hb.fro(hb.eigh(h).reconstruct() - h) / hb.fro(h)
    n_comm = hb.fro(hb.commutator(h, hb.number_operator()))
    ok = worst < 1e-14 and recon < 1e-12 and n_comm < 1e-12
    return ok, f"ladder {worst:.1e}, eigh recon {recon:.1e}, [H,N] {n_comm:.1e}"


def check_symmetry(ctx: Context):
    h = ctx.hamiltonian
    pi = symmetry_operator()
    comm = hb.fro(hb.commutator(h, pi))
    unit = hb.fro(pi.conj().T @ pi - np.eye(hb.DIM))
    r = restrict_single_excitation(pi)
    target = single_excitation_symmetry()
    phase = np.vdot(target, r) / np.vdot(target, target)
    restr = hb.fro(r - phase / abs(phase) * target)
    ds = dark_state()
    odd = np.linalg.norm(pi @ ds + ds)
    ok = comm <= 1e-9 and unit <= 1e-10 and restr <= 1e-9 and odd <= 1e-10
    return ok, f"[H,Pi] {comm:.1e}, unitarity {unit:.1e}, restriction {restr:.1e}, Pi DS + DS {odd:.1e}"


def check_dark_state(ctx: Context):
    ds = dark_state()
    h = ctx.hamiltonian
    e = np.vdot(ds, h @ ds).real
    eig_dev = np.linalg.norm(h @ ds - e * ds)
    kill = max(np.linalg.norm(coupling_operator(w, ctx.params.with_region(1.0, 0.0)) @ ds)
               for w in ("bath1", "bath4"))
    ok = eig_dev < 1e-12 and kill < 1e-14
    return ok, f"<H> = {e:.10g}, ||H DS - E DS|| {eig_dev:.1e}, max ||S_k DS|| {kill:.1e}"


def check_bath_construction(ctx: Context):
    baths = ctx.baths  # raises MatsubaraResonanceError on a resonant cutoff
    return True, ", ".join(f"{n}: lambda={b.lam:g} wc={b.cutoff:g} T={b.temperature:g}"
                           for n, b in zip(BathSet._fields, baths))


def check_bath_statistics(ctx: Context):
    b = ctx.baths.bath1
    w = np.linspace(1.0, 1500.0, 100)
    db = np.max(np.abs(rate_gamma(-w, b) - np.exp(-b.beta * w) * rate_gamma(w, b)) / rate_gamma(w, b))
    grid = np.concatenate((-w[::-1], [0.0], w))
    ratio = 2.0 * b.scale
    re = np.max(np.abs(half_fourier(grid, b).real - ratio * rate_gamma(grid, b) / 2.0)
                / np.maximum(rate_gamma(grid, b), 1e-300))
    g0 = rate_gamma(0.0, b)
    g_small = rate_gamma(1e-7, b)
    ok = db <= 1e-10 and re <= 1e-8 and abs(g0 - g_small) / g0 < 1e-8
    return ok, f"detailed balance {db:.1e}, Re Gamma vs gamma {re:.1e}, gamma(0) = {g0:.6g}"


def check_ergotropy(ctx: Context):
    h = ctx.hamiltonian
    e_min = np.linalg.eigvalsh(h)[0]
    beta = ctx.baths.bath1.beta
    es = np.linalg.eigh(h)
    p = np.exp(-beta * (es[0] - es[0].min()))
    gibbs = (es[1] * (p / p.sum())) @ es[1].conj().T
    w_gibbs = obs.ergotropy(gibbs, h)[0]
    rho_d = dark_density()
    w_dark = obs.ergotropy(rho_d, h)[0]
    target = obs.average_energy(rho_d, h) - e_min
    ok = abs(w_gibbs) <= 1e-10 and abs(w_dark - target) <= 1e-8
    return ok, f"W(Gibbs) {w_gibbs:.1e}, W(dark) = {w_dark:.10g} vs {target:.10g}"


def check_dark_stationary(ctx: Context):
    gen = make_generator(ctx.params.with_region(0.0, 0.0), ctx.baths)
    d = hb.fro(gen.apply(dark_density()))
    return d <= 1e-10, f"||L[rho_dark]||_F = {d:.1e} (probe and sink off)"


def check_generator_trace(ctx: Context):
    rng = np.random.default_rng(7)
    gen = make_generator(ctx.params, ctx.baths)
    rho = random_state(rng)
    out = gen.apply(rho)
    tr = abs(np.trace(out))
    herm = hb.fro(out - out.conj().T)
    ok = tr <= 1e-9 * hb.fro(out) and herm <= 1e-9 * hb.fro(out)
    return ok, f"|Tr L[rho]| {tr:.1e}, ||L - L^dag|| {herm:.1e} (probe and sink on)"


def check_sink_decay(ctx: Context):
    rate = ctx.params.gamma_sink or 0.1
    site = ctx.params.sink_site
    p = ctx.params.with_region(0.0, rate)
    h = build_hamiltonian(type(p)(eps=p.eps, hopping=0.0))
    gen = build_generator(h, [], (rate, site))
    rho0 = np.zeros((hb.DIM, hb.DIM), complex)
    k = hb.basis_index((site,))
    rho0[k, k] = 1.0
    t_end = 5.0 / rate
    ts = np.linspace(0.0, t_end, 51)
    traj = integrate(gen, rho0, (0.0, t_end), rtol=1e-12, atol=1e-14, t_eval=ts)
    err = np.max(np.abs(traj.populations[:, site - 1] - np.exp(-rate * traj.times)))
    return err <= 1e-8, f"max |p_{site} - exp(-Gamma t)| = {err:.1e} over 5/Gamma"


def check_quadrature_oracle(ctx: Context, n_states: int = 3):
    gen = make_generator(ctx.params.with_region(ctx.params.chi or 1.0, 0.0), ctx.baths)
    h = gen.hamiltonian
    envs = [(e.coupling, e.bath) for e in gen.environments]
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(n_states):
        rho = random_state(rng)
        mine = gen.apply(rho) + 1j * hb.commutator(h, rho)
        worst = max(worst, rel_fro(mine, quadrature_dissipator(h, envs, rho)))
    return worst <= 1e-6, f"max relative Frobenius deviation {worst:.1e} over {n_states} states"


def check_closed_propagator(ctx: Context):
    rng = np.random.default_rng(11)
    h = ctx.hamiltonian
    gen = build_generator(h, [])
    rho0 = random_state(rng)
    ts = np.linspace(0.0, 0.2, 5)
    traj = integrate(gen, rho0, (0.0, 0.2), rtol=1e-12, atol=1e-14, t_eval=ts, keep_states=True)
    err = max(hb.fro(s - exact_closed(h, rho0, t)) for t, s in zip(traj.times, traj.states))
    return err <= 1e-8, f"max ||rho(t) - U rho0 U^dag||_F = {err:.1e}"


def check_seven_steady_states(ctx: Context):
    gen = make_generator(ctx.params.with_region(ctx.params.chi or 1.0, 0.0), ctx.baths)
    states = sector_steady_states(gen)
    gaps = [s.gap_ratio for s in states]
    ok = len(states) == hb.N_SITES + 1 and min(gaps) >= 1e8
    return ok, f"{len(states)} steady states, min singular-value gap {min(gaps):.1e}"


def check_protocol(ctx: Context):
    traj = ctx.trajectory
    e_dark = obs.average_energy(dark_density(), ctx.hamiltonian)
    r1, r2, r3 = (traj.region_mask(x) for x in ("I", "II", "III"))
    flat = np.max(np.abs(traj.energy[r1] - e_dark)) if r1.any() else 0.0
    e_ss = traj.energy[r2][-1]
    n_dev = np.max(np.abs(traj.n_expect[r1 | r2] - 1.0))
    n3 = traj.n_expect[r3]
    mono = np.max(np.diff(n3), initial=0.0)
    ok = (flat <= 1e-6 and e_dark - e_ss > 1.0 and n_dev <= 1e-8 and mono <= 1e-8
          and n3[-1] < ctx.cfg.protocol.region3_n_threshold
          and np.min(traj.ergotropy) >= 0.0)
    return ok, (f"region I drift {flat:.1e}, E_ss(II) = {e_ss:.6g}, |<N>-1| {n_dev:.1e}, "
                f"max d<N> in III {mono:.1e}, final <N> {n3[-1]:.1e}, min W {np.min(traj.ergotropy):.1e}")


class Check(NamedTuple):
    name: str
    module: str
    quick: bool
    fn: Callable


CHECKS = (
    Check("operator algebra", "hilbert", True, check_operator_algebra),
    Check("reflection symmetry", "model", True, check_symmetry),
    Check("dark state", "model", True, check_dark_state),
    Check("bath parameters", "bath", True, check_bath_construction),
    Check("bath statistics", "bath", True, check_bath_statistics),
    Check("ergotropy limits", "observables", True, check_ergotropy),
    Check("dark state stationary", "generator", True, check_dark_stationary),
    Check("trace and hermiticity", "generator", True, check_generator_trace),
    Check("sink decay", "evolve", True, check_sink_decay),
    Check("quadrature oracle", "generator", False, check_quadrature_oracle),
    Check("closed-system propagator", "evolve", False, check_closed_propagator),
    Check("seven steady states", "evolve", False, check_seven_steady_states),
    Check("three-region protocol", "evolve", False, check_protocol),
)


class CheckResult(NamedTuple):
    name: str
    module: str
    passed: bool
    detail: str
    seconds: float


def run_checks(cfg: RunConfig, quick: bool = False, checks=CHECKS) -> list[CheckResult]:
    ctx = Context(cfg)
    results = []
    for chk in checks:
        if quick and not chk.quick:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = chk.fn(ctx)
        except Exception as exc:  # a crashing check is a failing check
            ok = False
            detail = f"{type(exc).__name__}: {exc}"
            if not isinstance(exc, ValueError):
                detail += " | " + traceback.format_exc(limit=1).splitlines()[-1]
        results.append(CheckResult(chk.name, chk.module, bool(ok), detail, time.perf_counter() - t0))
    return results


def format_table(results) -> str:
    w_name = max([len(r.name) for r in results] + [5])
    w_mod = max([len(r.module) for r in results] + [6])
    lines = [f"{'status':6}  {'module':{w_mod}}  {'check':{w_name}}  {'time':>7}  detail"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{status:6}  {r.module:{w_mod}}  {r.name:{w_name}}  {r.seconds:6.2f}s  {r.detail}")
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    return "\n".join(lines)
