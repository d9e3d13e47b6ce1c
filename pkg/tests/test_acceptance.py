"""Acceptance criteria 1-10, one test each.

Every test prints a ``criterion N PASS|FAIL`` line; the lines are repeated
at the end of the pytest run under "acceptance criteria".
"""

import time

import numpy as np
import pytest
from scipy.linalg import expm

from qbl import hilbert as hb
from qbl import observables as obs
from qbl.bath import BathSpec, half_fourier, rate_gamma
from qbl.evolve import RegionSchedule, integrate, make_generator, number_stop, run_protocol, sector_steady_states
from qbl.generator import build_generator
from qbl.model import (
    ModelParams, build_hamiltonian, dark_density, dark_state, restrict_single_excitation,
    single_excitation_symmetry, symmetry_operator,
)
from qbl.validation import exact_closed, quadrature_dissipator, random_state, rel_fro

RHO_DARK = dark_density()
E_DARK = 140.0


@pytest.fixture(scope="module")
def charge_leak():
    """Regions I and II from the dark state, timed; shared by criteria 1, 2, 5 and 9."""
    t0 = time.perf_counter()
    traj = run_protocol(ModelParams(), RegionSchedule.default().only(["I", "II"]), keep_states=True)
    return traj, time.perf_counter() - t0


@pytest.fixture(scope="module")
def discharge(charge_leak):
    """Region III from region II's steady state, recording <N> after every accepted step."""
    traj_ii = charge_leak[0]
    rho_ss = traj_ii.final_state
    reg = RegionSchedule.default().regions[2]
    t0 = time.perf_counter()
    gen = make_generator(ModelParams().with_region(reg.chi, 0.1))
    inner = number_stop(gen, rho_ss, reg.stop_tol)
    counts = gen.sectors[gen.invariant_support(gen.to_eig(rho_ss))].astype(float)
    steps = []

    def monitor(t, rho_e, drho_e):
        steps.append(float(np.dot(counts, np.real(np.diagonal(rho_e)))))
        return inner(t, rho_e, drho_e)

    traj = integrate(gen, rho_ss, (0.0, reg.cap), sample_interval=reg.sample_interval, stop=monitor,
                     region="III")
    return traj, np.array(steps), rho_ss, time.perf_counter() - t0


def test_criterion_01_dark_state_stationary(charge_leak, criterion):
    traj, _ = charge_leak
    t0 = time.perf_counter()
    gen = make_generator(ModelParams().with_region(0.0, 0.0))
    solo = integrate(gen, RHO_DARK, (0.0, 0.5), sample_interval=0.01, keep_states=True)
    elapsed = time.perf_counter() - t0
    dist = max(hb.fro(s - RHO_DARK) for s in solo.states)
    m = traj.region_mask("I")
    dist_protocol = max(hb.fro(s - RHO_DARK) for s, k in zip(traj.states, m) if k)
    pops = np.max(np.abs(solo.populations - [0, 0.25, 0.25, 0, 0.25, 0.25]))
    energy = np.max(np.abs(solo.energy - E_DARK))
    ok = max(dist, dist_protocol) <= 1e-8 and pops <= 1e-8 and energy <= 1e-6 and elapsed < 5
    criterion(1, "dark-state stationarity", ok,
              f"max ||rho - rho_dark||_F = {max(dist, dist_protocol):.2e} (<= 1e-8), "
              f"populations off by {pops:.1e}, |E - 140| = {energy:.1e} (<= 1e-6), {elapsed:.2f} s (< 5 s)")


def test_criterion_02_leaky_battery(charge_leak, criterion):
    traj, elapsed = charge_leak
    assert traj.stopped, "region II did not reach the residual tolerance"
    e_ss = obs.average_energy(traj.final_state, build_hamiltonian(ModelParams()))
    ok = E_DARK - e_ss > 1.0 and elapsed < 30
    criterion(2, "leaky battery", ok,
              f"Tr[H rho_ss] = {e_ss:.6f} cm^-1, margin {E_DARK - e_ss:.3f} cm^-1 (> 1), "
              f"regions I+II in {elapsed:.2f} s (< 30 s)")


def test_criterion_03_discharge(discharge, criterion):
    traj, steps, rho_ss, elapsed = discharge
    rise = np.max(np.diff(steps), initial=0.0)
    rise_samples = np.max(np.diff(traj.n_expect), initial=0.0)
    p4_ii = obs.populations(rho_ss)[3]
    p4_end = traj.populations[-1, 3]
    ok = (traj.stopped and rise <= 1e-8 and rise_samples <= 1e-8 and traj.n_expect[-1] < 1e-4
          and p4_end < p4_ii and elapsed < 60)
    criterion(3, "discharge", ok,
              f"{len(steps)} steps, max step increase of <N> {rise:.1e} (<= 1e-8), "
              f"<N> = {traj.n_expect[-1]:.2e} at t = {traj.t_end:.1f} (cap 500), "
              f"p4 {p4_ii:.4f} -> {p4_end:.2e}, {elapsed:.2f} s (< 60 s)")


def test_criterion_04_seven_steady_states(criterion):
    t0 = time.perf_counter()
    gen = make_generator(ModelParams().with_region(1.0, 0.0))
    states = sector_steady_states(gen, gap_tol=1e-8)
    elapsed = time.perf_counter() - t0
    one_dim = [s.null_dim == 1 for s in states]
    gaps = [s.gap_ratio for s in states]
    ok = len(states) == 7 and all(one_dim) and min(gaps) >= 1e8 and elapsed < 60
    criterion(4, "seven steady states", ok,
              f"{len(states)} sectors with 1-dim null space, min singular-value gap {min(gaps):.1e} "
              f"(>= 1e8), {elapsed:.2f} s (< 60 s)")


def test_criterion_05_number_conservation(charge_leak, criterion):
    traj, _ = charge_leak
    dev = np.max(np.abs(traj.n_expect - 1.0))
    criterion(5, "number conservation", dev <= 1e-8,
              f"max |<N> - 1| over {len(traj)} samples of regions I+II = {dev:.1e} (<= 1e-8)")


def test_criterion_06_symmetry(criterion):
    t0 = time.perf_counter()
    h = build_hamiltonian(ModelParams())
    pi = symmetry_operator()
    comm = hb.fro(h @ pi - pi @ h)
    unit = hb.fro(pi.conj().T @ pi - np.eye(hb.DIM))
    r = restrict_single_excitation(pi)
    k = np.unravel_index(np.argmax(np.abs(r)), r.shape)
    restr = hb.fro(r / (r[k] / abs(r[k])) - single_excitation_symmetry())
    ds = dark_state()
    odd = np.linalg.norm(single_excitation_symmetry() @ ds[hb.single_excitation_indices()]
                         + ds[hb.single_excitation_indices()])
    odd_many = np.linalg.norm(pi @ ds + ds)
    elapsed = time.perf_counter() - t0
    ok = comm <= 1e-9 and unit <= 1e-10 and restr <= 1e-9 and odd <= 1e-12 and odd_many <= 1e-10 and elapsed < 1
    criterion(6, "symmetry suite", ok,
              f"||[H,Pi]|| {comm:.1e} (<= 1e-9), ||Pi^dag Pi - I|| {unit:.1e} (<= 1e-10), "
              f"restriction vs 6x6 matrix {restr:.1e} (<= 1e-9), Pi DS + DS {odd:.1e}, {elapsed:.2f} s (< 1 s)")


def test_criterion_07_oracles(criterion):
    t0 = time.perf_counter()
    gen = make_generator(ModelParams().with_region(1.0, 0.0))
    h = gen.hamiltonian
    envs = [(e.coupling, e.bath) for e in gen.environments]
    rng = np.random.default_rng(20240601)
    devs = []
    for _ in range(3):
        rho = random_state(rng)
        mine = gen.apply(rho) + 1j * (h @ rho - rho @ h)
        devs.append(rel_fro(mine, quadrature_dissipator(h, envs, rho)))
    closed = build_generator(h, [])
    rho0 = random_state(rng)
    ts = np.linspace(0.0, 0.5, 11)
    traj = integrate(closed, rho0, (0.0, 0.5), rtol=1e-12, atol=1e-14, t_eval=ts, keep_states=True)
    prop = max(hb.fro(s - exact_closed(h, rho0, t)) for t, s in zip(traj.times, traj.states))
    elapsed = time.perf_counter() - t0
    ok = max(devs) <= 1e-6 and prop <= 1e-8 and elapsed < 60
    criterion(7, "oracle equivalence", ok,
              f"quadrature deviations {', '.join(f'{d:.1e}' for d in devs)} (<= 1e-6), "
              f"closed-system vs exp(-iHt) {prop:.1e} (<= 1e-8), {elapsed:.2f} s (< 60 s)")


def test_criterion_08_bath_statistics(criterion):
    t0 = time.perf_counter()
    b = BathSpec()
    w = np.linspace(1.0, 2000.0, 100)
    db = np.max(np.abs(rate_gamma(-w, b) - np.exp(-b.beta * w) * rate_gamma(w, b)) / rate_gamma(-w, b))
    grid = np.concatenate((-w, [0.0], w))
    re = np.max(np.abs(half_fourier(grid, b).real - rate_gamma(grid, b) / 2) / (rate_gamma(grid, b) / 2))
    g0 = rate_gamma(0.0, b)
    elapsed = time.perf_counter() - t0
    ok = db <= 1e-10 and re <= 1e-8 and abs(g0 - 137.7) <= 0.1 and elapsed < 1
    criterion(8, "bath statistics", ok,
              f"detailed balance {db:.1e} (<= 1e-10), Re Gamma vs gamma/2 {re:.1e} (<= 1e-8), "
              f"gamma(0) = {g0:.4f} (137.7 +- 0.1), {elapsed:.3f} s (< 1 s)")


def test_criterion_09_energetics(charge_leak, discharge, criterion):
    h = build_hamiltonian(ModelParams())
    es = np.linalg.eigh(h)
    e_min = es[0][0]
    beta = BathSpec().beta
    p = np.exp(-beta * (es[0] - e_min))
    gibbs = (es[1] * (p / p.sum())) @ es[1].conj().T
    w_gibbs = obs.ergotropy(gibbs, h)[0]
    hot = expm(-0.001 * h)
    w_hot = obs.ergotropy(hot / np.trace(hot), h)[0]
    w_dark = obs.ergotropy(RHO_DARK, h)[0]
    traj_ii, traj_iii = charge_leak[0], discharge[0]
    w_all = np.concatenate((traj_ii.ergotropy, traj_iii.ergotropy))
    w_ss = obs.ergotropy(traj_ii.final_state, h)[0]
    passive = obs.is_passive(traj_ii.final_state, h)
    ok = (abs(w_gibbs) <= 1e-10 and abs(w_hot) <= 1e-10 and abs(w_dark - (E_DARK - e_min)) <= 1e-8
          and np.min(w_all) >= 0 and w_ss < w_dark)
    criterion(9, "energetics", ok,
              f"W(Gibbs) {w_gibbs:.1e} (<= 1e-10), W(dark) - (140 - E_min) = {w_dark - (E_DARK - e_min):.1e} "
              f"(E_min = {e_min:.6f}), min W over {len(w_all)} samples {np.min(w_all):.3f} (>= 0), "
              f"W(rho_ss,II) = {w_ss:.4f} < W(dark) = {w_dark:.4f}; rho_ss,II passive: {passive}")


def test_criterion_10_sink_analytics(criterion):
    t0 = time.perf_counter()
    gamma = 0.1
    h = build_hamiltonian(ModelParams(hopping=0.0))
    gen = build_generator(h, [], (gamma, 4))
    rho0 = np.zeros((hb.DIM, hb.DIM), complex)
    k = hb.basis_index((4,))
    rho0[k, k] = 1.0
    ts = np.linspace(0.0, 5.0 / gamma, 101)
    traj = integrate(gen, rho0, (0.0, 5.0 / gamma), rtol=1e-12, atol=1e-14, t_eval=ts)
    err = np.max(np.abs(traj.populations[:, 3] - np.exp(-gamma * traj.times)))
    elapsed = time.perf_counter() - t0
    criterion(10, "sink analytics", err <= 1e-8 and elapsed < 5,
              f"max |p4 - exp(-Gamma t)| over [0, 5/Gamma] = {err:.1e} (<= 1e-8), {elapsed:.2f} s (< 5 s)")
