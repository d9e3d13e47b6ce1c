import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import expm

from qbl import hilbert as hb
from qbl import observables as obs
from qbl.model import dark_density
from qbl.validation import random_state

VACUUM = np.zeros((hb.DIM, hb.DIM), complex)
VACUUM[0, 0] = 1.0
MIXED = np.eye(hb.DIM, dtype=complex) / hb.DIM


def gibbs(h, beta):
    g = expm(-beta * h)
    return g / np.trace(g)


def test_populations_examples():
    np.testing.assert_allclose(obs.populations(dark_density()), [0, 0.25, 0.25, 0, 0.25, 0.25], atol=1e-15)
    np.testing.assert_array_equal(obs.populations(VACUUM), np.zeros(6))
    np.testing.assert_allclose(obs.populations(MIXED), np.full(6, 0.5))


def test_populations_match_site_numbers(rng):
    rho = random_state(rng)
    ref = [np.trace(hb.site_number(i) @ rho).real for i in range(1, 7)]
    np.testing.assert_allclose(obs.populations(rho), ref, atol=1e-14)


def test_average_energy_examples(ham, params):
    rho = dark_density()
    assert obs.average_energy(rho, ham) == pytest.approx(140.0, abs=1e-12)
    assert obs.site_energy(rho, params.eps) == pytest.approx(200.0, abs=1e-12)
    assert obs.average_energy(VACUUM, ham) == 0.0


def test_average_energy_rejects_imaginary(ham):
    bad = dark_density() + 1e-3j * np.eye(hb.DIM)
    with pytest.raises(ValueError, match="imaginary"):
        obs.average_energy(bad, ham)


def test_ergotropy_examples(ham):
    assert abs(obs.ergotropy(gibbs(ham, 1.0 / 208.5), ham)[0]) <= 1e-10
    assert abs(obs.ergotropy(gibbs(ham, 0.05), ham)[0]) <= 1e-10
    assert abs(obs.ergotropy(MIXED, ham)[0]) <= 1e-10
    e_min = np.linalg.eigvalsh(ham)[0]
    assert e_min < 0
    w, passive = obs.ergotropy(dark_density(), ham)
    assert w == pytest.approx(140.0 - e_min, abs=1e-8)
    ground = np.linalg.eigh(ham)[1][:, 0]
    assert hb.fro(passive - np.outer(ground, ground.conj())) <= 1e-10


def test_passive_state_properties(ham, rng):
    rho = random_state(rng, rank=5)
    w, passive = obs.ergotropy(rho, ham)
    assert w >= 0
    assert hb.fro(hb.commutator(passive, ham)) <= 1e-9
    e, v = np.linalg.eigh(ham)
    pops = np.real(np.einsum("ia,ij,ja->a", v.conj(), passive, v))
    assert np.all(np.diff(pops) <= 1e-12)
    assert obs.average_energy(passive, ham) == pytest.approx(obs.average_energy(rho, ham) - w, abs=1e-9)


def test_ergotropy_invariant_under_commuting_unitary(ham, rng):
    rho = random_state(rng, rank=3)
    u = expm(-1j * 0.37 * ham)
    a = obs.ergotropy(rho, ham)[0]
    b = obs.ergotropy(u @ rho @ u.conj().T, ham)[0]
    assert a == pytest.approx(b, abs=1e-9)


def test_ordered_eigh_is_deterministic():
    h = np.diag([1.0, 0.0, 1.0, 0.0]).astype(complex)
    es = obs.ordered_eigh(h)
    np.testing.assert_array_equal(np.argmax(np.abs(es.vectors), axis=0), [1, 3, 0, 2])


def test_clamping_of_small_negative_weights(ham):
    rho = dark_density().copy()
    rho[0, 0] = -1e-9
    rho[1, 1] = 1e-9
    w, passive = obs.ergotropy(rho, ham)
    assert np.linalg.eigvalsh(passive).min() >= -1e-15
    assert np.isfinite(w)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 6, elements=st.floats(0.0, 1.0)),
       st.permutations(range(6)))
def test_zero_ergotropy_iff_aligned(weights, perm):
    if weights.sum() < 1e-3:
        return
    energies = np.array([-2.0, -1.0, 0.5, 1.0, 3.0, 4.0])
    h = np.diag(energies).astype(complex)
    p = weights / weights.sum()
    rho = np.diag(p[list(perm)]).astype(complex)
    w = obs.ergotropy(rho, h)[0]
    aligned = np.all(np.diff(p[list(perm)]) <= 1e-14)
    if aligned:
        assert abs(w) <= 1e-12
    elif np.sort(p)[::-1] @ energies < p[list(perm)] @ energies - 1e-12:
        assert w > 0
    assert obs.is_passive(rho, h) == (w <= 1e-10)


def test_single_excitation_projection(rng):
    proj = obs.project_single_excitation(dark_density())
    v = np.array([0, -0.5, -0.5, 0, 0.5, 0.5])
    np.testing.assert_allclose(proj, np.outer(v, v), atol=1e-15)
    assert np.abs(obs.project_single_excitation(VACUUM)).max() == 0
    rho = random_state(rng)
    p = obs.project_single_excitation(rho)
    assert hb.fro(p - p.conj().T) <= 1e-14 and np.trace(p).real <= 1 + 1e-9


def test_purity_and_number():
    assert obs.purity(dark_density()) == pytest.approx(1.0)
    assert obs.purity(MIXED) == pytest.approx(1 / 64)
    assert obs.excitation_number(dark_density()) == pytest.approx(1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_linearity_and_sum_rule(ham, seed, alpha):
    r = np.random.default_rng(seed)
    a, b = random_state(r), random_state(r)
    mix = alpha * a + (1 - alpha) * b
    for f in (obs.populations, obs.excitation_number, lambda x: obs.average_energy(x, ham)):
        np.testing.assert_allclose(f(mix), alpha * np.asarray(f(a)) + (1 - alpha) * np.asarray(f(b)),
                                   atol=1e-10)
    assert obs.populations(mix).sum() == pytest.approx(obs.excitation_number(mix), abs=1e-9)


def test_report_fields(ham):
    rep = obs.report(dark_density(), ham)
    assert rep.energy == pytest.approx(140.0)
    assert rep.passive_energy == pytest.approx(rep.energy - rep.ergotropy)
    assert rep.passive_energy <= rep.energy + 1e-10
    assert rep.n_expect == pytest.approx(sum(rep.populations))
    assert rep.purity == pytest.approx(1.0)
