"""Initial states, exact propagation and probe (site 1) observables.

Times are in units of 1/J with hbar = 1. All propagation is done in the
eigenbasis of the Hamiltonian: ``U(t) = V exp(-i E t) V^dagger``.
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np
from joblib import Parallel, delayed
from scipy.integrate import trapezoid

from .exceptions import DegenerateRangeError, NumericError
from .operators import PAULI, build_hamiltonian, environment_terms, hamiltonian_from_terms
from .seeding import stream
from .spectral import eigendecompose
from .validation import check_density, check_state, n_sites_from_dim

DEFAULT_DT = 0.1
_SIGMAS = np.stack([PAULI["x"], PAULI["y"], PAULI["z"]])


# -- states -------------------------------------------------------------------


def bloch_site_state(theta, phi):
    """``cos(theta/2)|up> + exp(i phi) sin(theta/2)|down>``."""
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def product_state(site_states):
    """Tensor product with the first entry as the leftmost factor."""
    return reduce(np.kron, [np.asarray(s, dtype=complex) for s in site_states])


def random_site_states(n, rng, angle_uniform=False):
    """``n`` single-qubit states pointing in random Bloch-sphere directions.

    By default directions are uniform on the sphere (``cos(theta)`` uniform).
    ``angle_uniform=True`` draws ``theta`` uniformly in ``[0, pi)`` instead.
    """
    u = rng.random((n, 2))
    if angle_uniform:
        theta = np.pi * u[:, 0]
    else:
        theta = np.arccos(1.0 - 2.0 * u[:, 0])
    phi = 2 * np.pi * u[:, 1]
    return [bloch_site_state(t, p) for t, p in zip(theta, phi)]


def random_product_state(L, rng, angle_uniform=False):
    if L < 1:
        raise ValueError("L must be >= 1")
    return product_state(random_site_states(L, rng, angle_uniform))


# -- propagation --------------------------------------------------------------


def _require_vectors(spectral):
    if not spectral.has_vectors:
        raise ValueError("spectral data has no eigenvectors; use want_vectors=True")


def evolve_state(spectral, psi0, times):
    """States ``psi(t)`` for every entry of ``times``, shape ``(n_times, dim)``."""
    _require_vectors(spectral)
    psi0 = check_state(psi0, spectral.dim)
    V = spectral.eigenvectors
    c = V.conj().T @ psi0
    phases = np.exp(-1j * np.outer(spectral.eigenvalues, np.asarray(times, dtype=float)))
    return (V @ (phases * c[:, None])).T


def evolve_density(spectral, rho0, times):
    """Density matrices ``U(t) rho0 U(t)^dagger``, shape ``(n_times, dim, dim)``."""
    _require_vectors(spectral)
    rho0 = check_density(rho0, spectral.dim)
    V = spectral.eigenvectors
    E = spectral.eigenvalues
    R = V.conj().T @ rho0 @ V
    out = np.empty((len(times), E.size, E.size), dtype=complex)
    for i, t in enumerate(np.asarray(times, dtype=float)):
        ph = np.exp(-1j * E * t)
        out[i] = V @ ((ph[:, None] * R) * ph.conj()[None, :]) @ V.conj().T
    return out


# -- probe observables --------------------------------------------------------


def reduce_to_sites(state, L, n_keep):
    """Reduced density matrix of the first ``n_keep`` sites.

    ``state`` is either a state vector of length ``2^L`` or a ``2^L x 2^L``
    density matrix.
    """
    state = np.asarray(state)
    dim = 2**L
    if state.shape not in ((dim,), (dim, dim)):
        raise ValueError(f"state of shape {state.shape} does not match L={L}")
    keep, rest = 2**n_keep, 2 ** (L - n_keep)
    if state.ndim == 1:
        m = state.reshape(keep, rest)
        return m @ m.conj().T
    return np.trace(state.reshape(keep, rest, keep, rest), axis1=1, axis2=3)


def reduce_to_probe(state, L):
    """2x2 reduced state of site 1."""
    return reduce_to_sites(state, L, 1)


def _probe_states_batch(states):
    """Probe reduced matrices for a batch of state vectors ``(n, dim)``."""
    m = states.reshape(states.shape[0], 2, -1)
    return np.einsum("tie,tje->tij", m, m.conj())


def _probe_density_batch(rhos):
    n, dim = rhos.shape[0], rhos.shape[1]
    return np.trace(rhos.reshape(n, 2, dim // 2, 2, dim // 2), axis1=2, axis2=4)


def bloch_vector(rho):
    """``r_i = Tr(sigma_i rho)``; works on a single 2x2 matrix or a batch."""
    rho = np.asarray(rho)
    return np.einsum("kij,...ji->...k", _SIGMAS, rho).real


def bloch_and_purity(rho):
    """Bloch vector and purity ``Tr rho^2`` of a single-qubit state."""
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        raise ValueError("expected a 2x2 density matrix")
    r = bloch_vector(rho)
    return r, float(np.sum(np.abs(rho) ** 2))


@dataclass(frozen=True)
class ProbeTrajectory:
    """Probe Bloch vector and purity sampled on a time grid."""

    times: np.ndarray
    bloch: np.ndarray
    purity: np.ndarray

    @classmethod
    def from_reduced(cls, times, rhos):
        return cls(np.asarray(times, dtype=float), bloch_vector(rhos),
                   np.sum(np.abs(rhos) ** 2, axis=(1, 2)))


def probe_trajectory(spectral, psi0, times):
    """Probe trajectory from a pure initial state of the whole chain."""
    return ProbeTrajectory.from_reduced(times, _probe_states_batch(evolve_state(spectral, psi0, times)))


def probe_trajectory_density(spectral, rho0, times):
    """Probe trajectory from a mixed initial state of the whole chain."""
    return ProbeTrajectory.from_reduced(times, _probe_density_batch(evolve_density(spectral, rho0, times)))


def time_grid(T, dt=DEFAULT_DT, start=0.0):
    """Uniform grid from ``start`` to ``T`` inclusive with step close to ``dt``."""
    if T <= start:
        raise ValueError("empty time window")
    n = max(1, int(round((T - start) / dt)))
    return np.linspace(start, T, n + 1)


def time_averaged_purity(traj, window):
    """Trapezoidal ``1/(t1 - t0) * integral of P(t)`` over ``window = (t0, t1)``."""
    t0, t1 = window
    if not t1 > t0:
        raise ValueError("empty averaging window")
    t = traj.times
    eps = 1e-9 * max(1.0, abs(t1))
    if t[0] > t0 + eps or t[-1] < t1 - eps:
        raise ValueError(f"time grid [{t[0]}, {t[-1]}] does not cover window [{t0}, {t1}]")
    sel = (t >= t0 - eps) & (t <= t1 + eps)
    return float(trapezoid(traj.purity[sel], t[sel]) / (t[sel][-1] - t[sel][0]))


def fluctuations(series):
    """Population standard deviation ``sqrt(<X^2> - <X>^2)``."""
    x = np.asarray(series, dtype=float)
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    return float(np.std(x))


def window_mask(times, window):
    t0, t1 = window
    eps = 1e-9 * max(1.0, abs(t1))
    return (times >= t0 - eps) & (times <= t1 + eps)


def normalize_curve(values):
    """Min-max normalization over the swept range."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise DegenerateRangeError("need at least 2 values to normalize")
    lo, hi = v.min(), v.max()
    if not hi > lo:
        raise DegenerateRangeError("constant curve cannot be normalized")
    return (v - lo) / (hi - lo)


# -- ensembles ----------------------------------------------------------------


@dataclass(frozen=True)
class PurityEstimate:
    """Ensemble mean of the time-averaged probe purity."""

    mean: float
    std: float
    values: np.ndarray


def _realization_purity(model, spectral, seed, index, T, dt, angle_uniform):
    rng = stream(seed, index)
    if model.is_stochastic:
        model = model.realize(rng)
        spectral = eigendecompose(build_hamiltonian(model), want_vectors=True)
    psi0 = random_product_state(model.L, rng, angle_uniform)
    times = time_grid(T, dt)
    return time_averaged_purity(probe_trajectory(spectral, psi0, times), (0.0, T))


def ensemble_averaged_purity(model, N, T, dt=DEFAULT_DT, seed=0, angle_uniform=False, workers=1):
    """Mean (and spread) over ``N`` random product states of the time-averaged purity.

    Realization ``i`` draws from the stream ``(seed, i)``: first the disorder
    (stochastic models only), then the initial state.
    """
    if N < 1:
        raise ValueError("need at least one realization")
    spectral = None
    if not model.is_stochastic:
        spectral = eigendecompose(build_hamiltonian(model), want_vectors=True)
    args = (T, dt, angle_uniform)
    if workers == 1:
        values = [_realization_purity(model, spectral, seed, i, *args) for i in range(N)]
    else:
        values = Parallel(n_jobs=workers)(
            delayed(_realization_purity)(model, spectral, seed, i, *args) for i in range(N)
        )
    values = np.array(values)
    return PurityEstimate(float(values.mean()), float(values.std()), values)


# -- finite temperature environment --------------------------------------------


def environment_hamiltonian(model):
    """Chain Hamiltonian restricted to sites 2..L (probe and its bond removed)."""
    n = model.L - 1
    if n == 0:
        return np.zeros((1, 1), dtype=complex)
    return hamiltonian_from_terms(environment_terms(model), n, np.arange(2**n, dtype=np.int64))


def gibbs_weights(H, beta, cutoff=1e-14):
    """Boltzmann weights and eigenvectors of ``H`` with weights above ``cutoff``.

    The spectrum is shifted by its ground energy so large ``beta`` cannot
    overflow.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    spec = eigendecompose(H, want_vectors=True)
    E = spec.eigenvalues
    w = np.exp(-beta * (E - E[0]))
    if not np.all(np.isfinite(w)) or w.sum() <= 0:
        raise NumericError("Boltzmann weights overflowed")
    w /= w.sum()
    keep = w > cutoff
    return w[keep], spec.eigenvectors[:, keep]


def gibbs_state(H, beta):
    """``exp(-beta H) / Z`` computed from the shifted spectrum."""
    w, V = gibbs_weights(H, beta, cutoff=0.0)
    return (V * w) @ V.conj().T


def gibbs_environment_state(model, beta):
    """Thermal state of the environment sites 2..L at inverse temperature ``beta``."""
    return gibbs_state(environment_hamiltonian(model), beta)


def probe_trajectory_mixture(spectral, weights, states, times):
    """Probe trajectory of ``sum_k w_k |psi_k><psi_k|`` (columns of ``states``).

    Equivalent to :func:`probe_trajectory_density` but propagates the pure
    components, which is much cheaper when the mixture has low rank.
    """
    _require_vectors(spectral)
    V, E = spectral.eigenvectors, spectral.eigenvalues
    C = V.conj().T @ states
    times = np.asarray(times, dtype=float)
    rhos = np.empty((times.size, 2, 2), dtype=complex)
    for i, t in enumerate(times):
        psi = V @ (np.exp(-1j * E * t)[:, None] * C)
        m = psi.reshape(2, -1, psi.shape[1])
        rhos[i] = np.einsum("iek,jek,k->ij", m, m.conj(), weights)
    return ProbeTrajectory.from_reduced(times, rhos)


def _thermal_realization_purity(spectral, env, seed, index, T, dt, angle_uniform):
    w, Venv = env
    rng = stream(seed, index)
    probe = random_site_states(1, rng, angle_uniform)[0]
    states = np.kron(probe[:, None], Venv)
    times = time_grid(T, dt)
    return time_averaged_purity(probe_trajectory_mixture(spectral, w, states, times), (0.0, T))


def thermal_ensemble_purity(model, beta, N, T, dt=DEFAULT_DT, seed=0, angle_uniform=False):
    """Like :func:`ensemble_averaged_purity`, with a Gibbs environment at ``beta``.

    Only the probe's pure state is random; the environment starts in
    :func:`gibbs_environment_state`.
    """
    if N < 1:
        raise ValueError("need at least one realization")
    if model.is_stochastic:
        raise ValueError("thermal ensembles are defined for fixed Hamiltonians only")
    spectral = eigendecompose(build_hamiltonian(model), want_vectors=True)
    env = gibbs_weights(environment_hamiltonian(model), beta)
    values = np.array([
        _thermal_realization_purity(spectral, env, seed, i, T, dt, angle_uniform)
        for i in range(N)
    ])
    return PurityEstimate(float(values.mean()), float(values.std()), values)


# -- eigenbasis expansion of the Bloch vector -----------------------------------


@dataclass(frozen=True)
class BlochExpansion:
    """``r(t) = diagonal + Re sum_k amplitude_k exp(-i frequency_k t)``.

    The sum runs over ordered pairs ``(m, n)`` with ``m != n`` and nonzero
    amplitude ``C_n C_m^* <m| sigma x I |n>``; ``frequency = E_n - E_m``.
    """

    coefficients: np.ndarray
    diagonal: np.ndarray
    amplitudes: np.ndarray
    frequencies: np.ndarray
    pairs: np.ndarray

    def at(self, t):
        """Bloch vector at time(s) ``t``; shape ``(3,)`` or ``(len(t), 3)``."""
        t = np.asarray(t, dtype=float)
        ph = np.exp(-1j * np.multiply.outer(t, self.frequencies))
        return self.diagonal + (ph @ self.amplitudes).real


def bloch_eigenbasis_expansion(spectral, psi0, atol=1e-14):
    """Split the probe Bloch vector into its time-independent and oscillating parts."""
    _require_vectors(spectral)
    psi0 = check_state(psi0, spectral.dim)
    n_sites_from_dim(spectral.dim)
    V = spectral.eigenvectors
    E = spectral.eigenvalues
    C = V.conj().T @ psi0
    half = spectral.dim // 2
    Vr = V.reshape(2, half, -1)
    # O_i = V^dagger (sigma_i x I) V
    O = np.einsum("kab,aen,bem->knm", _SIGMAS, Vr.conj(), Vr)
    weights = np.abs(C) ** 2
    diagonal = np.einsum("n,knn->k", weights, O).real
    A = O * (C.conj()[:, None] * C[None, :])[None]  # A[k, m, n] = C_m^* C_n O[k, m, n]
    m_idx, n_idx = np.nonzero(~np.eye(E.size, dtype=bool))
    amps = A[:, m_idx, n_idx].T
    keep = np.any(np.abs(amps) > atol, axis=1)
    return BlochExpansion(
        coefficients=C,
        diagonal=diagonal,
        amplitudes=amps[keep],
        frequencies=(E[n_idx] - E[m_idx])[keep],
        pairs=np.stack([m_idx, n_idx], axis=1)[keep],
    )
