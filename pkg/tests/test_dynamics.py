import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SX, SY, SZ, partial_trace_oracle, random_state
from spinchaos.dynamics import (
    bloch_and_purity,
    bloch_eigenbasis_expansion,
    bloch_site_state,
    ensemble_averaged_purity,
    environment_hamiltonian,
    evolve_density,
    evolve_state,
    fluctuations,
    gibbs_environment_state,
    gibbs_state,
    normalize_curve,
    probe_trajectory,
    probe_trajectory_density,
    product_state,
    random_product_state,
    random_site_states,
    reduce_to_probe,
    reduce_to_sites,
    thermal_ensemble_purity,
    time_averaged_purity,
    time_grid,
    ProbeTrajectory,
)
from spinchaos.exceptions import DegenerateRangeError
from spinchaos.operators import SpinModel, build_hamiltonian
from spinchaos.spectral import eigendecompose


def _spectral(model):
    return eigendecompose(build_hamiltonian(model), want_vectors=True)


@pytest.mark.parametrize("L", [1, 2, 3, 4])
def test_partial_trace_matches_index_sums(L, rng):
    psi = random_state(2**L, rng)
    rho = np.outer(psi, psi.conj())
    for k in range(1, L + 1):
        ref = partial_trace_oracle(rho, L, k)
        assert np.allclose(reduce_to_sites(psi, L, k), ref, atol=1e-12)
        assert np.allclose(reduce_to_sites(rho, L, k), ref, atol=1e-12)


def test_product_state_reduces_to_site_state(rng):
    sites = random_site_states(4, rng)
    rho1 = reduce_to_probe(product_state(sites), 4)
    assert np.allclose(rho1, np.outer(sites[0], sites[0].conj()))
    r, P = bloch_and_purity(rho1)
    assert P == pytest.approx(1.0)
    assert np.linalg.norm(r) == pytest.approx(1.0)


def test_bloch_vector_definition():
    psi = bloch_site_state(np.pi / 2, 0.0)
    r, _ = bloch_and_purity(np.outer(psi, psi.conj()))
    assert np.allclose(r, [1, 0, 0], atol=1e-15)
    rho = np.array([[0.7, 0.1 - 0.2j], [0.1 + 0.2j, 0.3]])
    r, P = bloch_and_purity(rho)
    assert np.allclose(r, [np.trace(s @ rho).real for s in (SX, SY, SZ)])
    assert P == pytest.approx((1 + r @ r) / 2, abs=1e-10)


def test_rabi_oscillation_single_spin():
    # H = h_x X: P(|1>) = sin^2(h_x t)
    s = _spectral(SpinModel.ising(1, 0.8, 0.0))
    t = np.linspace(0, 5, 51)
    psi = evolve_state(s, np.array([1, 0], complex), t)
    assert np.allclose(np.abs(psi[:, 1]) ** 2, np.sin(0.8 * t) ** 2, atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(hz=st.floats(0, 1.5), seed=st.integers(0, 1000))
def test_trajectory_identities(hz, seed):
    L = 4
    model = SpinModel.ising(L, 1.0, hz, 1.0)
    s = _spectral(model)
    H = build_hamiltonian(model)
    rng = np.random.default_rng(seed)
    psi0 = random_product_state(L, rng)
    t = np.linspace(0, 10, 21)
    states = evolve_state(s, psi0, t)
    norms = np.linalg.norm(states, axis=1)
    energies = np.einsum("ti,ij,tj->t", states.conj(), H, states).real
    assert np.allclose(norms, 1, atol=1e-10)
    assert np.allclose(energies, energies[0], atol=1e-10)
    traj = probe_trajectory(s, psi0, t)
    assert np.allclose(traj.purity, (1 + np.sum(traj.bloch**2, axis=1)) / 2, atol=1e-10)
    assert np.all(traj.purity <= 1 + 1e-12) and np.all(traj.purity >= 0.5 - 1e-12)


def test_eigenbasis_resummation_matches_propagation(rng):
    L = 5
    s = _spectral(SpinModel.ising(L, 1.0, 0.4))
    psi0 = random_product_state(L, rng)
    t = np.linspace(0, 20, 41)
    exp = bloch_eigenbasis_expansion(s, psi0)
    assert np.allclose(exp.at(t), probe_trajectory(s, psi0, t).bloch, atol=1e-8)
    assert np.allclose(exp.at(0.0), probe_trajectory(s, psi0, [0.0]).bloch[0], atol=1e-8)


def test_density_propagation_matches_pure(rng):
    L = 3
    s = _spectral(SpinModel.ising(L, 1.0, 0.3))
    psi0 = random_state(2**L, rng)
    t = np.linspace(0, 3, 7)
    rhos = evolve_density(s, np.outer(psi0, psi0.conj()), t)
    psis = evolve_state(s, psi0, t)
    assert np.allclose(rhos, np.einsum("ti,tj->tij", psis, psis.conj()), atol=1e-12)
    a = probe_trajectory(s, psi0, t)
    b = probe_trajectory_density(s, np.outer(psi0, psi0.conj()), t)
    assert np.allclose(a.purity, b.purity) and np.allclose(a.bloch, b.bloch)


def test_time_grid_and_average():
    t = time_grid(50, 0.1)
    assert t.size == 501 and t[-1] == 50
    traj = ProbeTrajectory(t, np.zeros((t.size, 3)), 1 - t / 100)
    assert time_averaged_purity(traj, (0, 50)) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        time_averaged_purity(traj, (0, 60))


def test_fluctuations_population_std():
    assert fluctuations([1, 3]) == 1.0
    with pytest.raises(ValueError):
        fluctuations([1.0])


def test_normalize_curve():
    assert np.allclose(normalize_curve([2, 4, 3]), [0, 1, 0.5])
    with pytest.raises(DegenerateRangeError):
        normalize_curve([1.0])
    with pytest.raises(DegenerateRangeError):
        normalize_curve([1.0, 1.0])


def test_sphere_uniform_sampling_moments():
    rng = np.random.default_rng(5)
    states = random_site_states(20000, rng)
    r = np.array([bloch_and_purity(np.outer(s, s.conj()))[0] for s in states[:4000]])
    assert np.allclose(r.mean(axis=0), 0, atol=0.05)
    assert np.allclose(np.mean(r**2, axis=0), 1 / 3, atol=0.03)


def test_ensemble_is_deterministic_and_worker_independent():
    m = SpinModel.ising(4, 1.0, 0.5)
    a = ensemble_averaged_purity(m, 6, 5.0, seed=3)
    b = ensemble_averaged_purity(m, 6, 5.0, seed=3, workers=2)
    assert np.array_equal(a.values, b.values)
    # realization i is a prefix-stable stream
    c = ensemble_averaged_purity(m, 3, 5.0, seed=3)
    assert np.array_equal(a.values[:3], c.values)


def test_single_spin_purity_stays_one():
    est = ensemble_averaged_purity(SpinModel.ising(1, 1.0, 0.5), 3, 5.0)
    assert est.mean == pytest.approx(1.0)


def test_gibbs_state_limits():
    H = build_hamiltonian(SpinModel.ising(3, 1.0, 0.5))
    assert np.allclose(gibbs_state(H, 0.0), np.eye(8) / 8)
    rho = gibbs_state(H, 200.0)
    w, v = np.linalg.eigh(H)
    assert np.allclose(rho, np.outer(v[:, 0], v[:, 0].conj()), atol=1e-8)
    with pytest.raises(ValueError):
        gibbs_state(H, -1.0)


def test_environment_hamiltonian_is_chain_without_probe():
    m = SpinModel.ising(4, 1.0, 0.5, [0.7, 1.1, 1.3])
    Henv = environment_hamiltonian(m)
    ref = build_hamiltonian(SpinModel.ising(3, 1.0, 0.5, [1.1, 1.3]))
    assert np.allclose(Henv, ref)
    rho = gibbs_environment_state(m, 0.7)
    assert np.trace(rho).real == pytest.approx(1.0)


def test_thermal_purity_runs_and_is_bounded():
    est = thermal_ensemble_purity(SpinModel.ising(3), 1.0, 4, 5.0, seed=1)
    assert 0.5 <= est.mean <= 1.0
    with pytest.raises(ValueError):
        thermal_ensemble_purity(SpinModel.heisenberg(3, 1.0), 1.0, 2, 5.0)


def test_mixture_trajectory_matches_density_propagation(rng):
    from spinchaos.dynamics import gibbs_weights, probe_trajectory_mixture
    m = SpinModel.ising(4, 1.0, 0.5)
    s = _spectral(m)
    w, Venv = gibbs_weights(environment_hamiltonian(m), 0.8, cutoff=0.0)
    probe = random_site_states(1, rng)[0]
    rho0 = np.kron(np.outer(probe, probe.conj()), (Venv * w) @ Venv.conj().T)
    t = np.linspace(0, 6, 13)
    a = probe_trajectory_mixture(s, w, np.kron(probe[:, None], Venv), t)
    b = probe_trajectory_density(s, rho0, t)
    assert np.allclose(a.purity, b.purity, atol=1e-12)
    assert np.allclose(a.bloch, b.bloch, atol=1e-12)
