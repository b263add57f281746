"""Piecewise-constant control of the probe spin and multi-start fidelity optimization.

The controlled Hamiltonian is ``H0 + lambda(t) Hc`` with ``Hc = sigma^z_1`` by
default and ``lambda`` held constant on each of ``n_ts`` equal time steps.
"""

from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize
from scipy.stats import spearmanr

from .dynamics import product_state, random_site_states, reduce_to_sites
from .operators import build_hamiltonian, site_operator
from .seeding import stream
from .validation import check_hermitian, check_state, n_sites_from_dim

DEFAULT_BOUNDS = (-2.0, 2.0)
FD_STEP = 1e-6
MEMO_QUANTUM = 1e-12

ZERO = np.array([1.0, 0.0], dtype=complex)
ONE = np.array([0.0, 1.0], dtype=complex)
BELL = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True)
class ControlProblem:
    """State-to-state control task on the first sites of a chain.

    ``target`` lives on the first ``log2(len(target))`` sites; fidelity is
    ``<target| rho_sub |target>`` with ``rho_sub`` the reduced final state.
    """

    model: object
    target: np.ndarray
    psi0: np.ndarray
    T: float = 20.0
    n_ts: int = 20
    bounds: tuple = DEFAULT_BOUNDS
    control_operator: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        L = self.model.L
        if self.n_ts < 1:
            raise ValueError("n_ts must be >= 1")
        lo, hi = self.bounds
        if lo > hi:
            raise ValueError(f"empty amplitude bounds [{lo}, {hi}]")
        if self.T <= 0:
            raise ValueError("horizon T must be positive")
        target = check_state(self.target, name="target")
        n_target = n_sites_from_dim(target.size)
        if not 1 <= n_target <= L:
            raise ValueError(f"target on {n_target} sites does not fit a chain of {L}")
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "psi0", check_state(self.psi0, 2**L, name="psi0"))
        Hc = self.control_operator
        if Hc is None:
            Hc = site_operator("z", 1, L)
        object.__setattr__(self, "control_operator", check_hermitian(Hc, name="control operator"))

    @property
    def n_target_sites(self):
        return n_sites_from_dim(self.target.size)

    @property
    def dt(self):
        return self.T / self.n_ts

    def to_dict(self):
        return {"T": self.T, "n_ts": self.n_ts, "bounds": list(self.bounds),
                "n_target_sites": self.n_target_sites, "model": self.model.to_dict()}


def transfer_problem(model, rng, T=20.0, n_ts=20, bounds=DEFAULT_BOUNDS, angle_uniform=False):
    """Population transfer ``|0> -> |1>`` of the probe; the rest starts random."""
    rest = random_site_states(model.L - 1, rng, angle_uniform) if model.L > 1 else []
    return ControlProblem(model, ONE, product_state([ZERO, *rest]), T, n_ts, tuple(bounds))


def entangling_problem(model, rng, T=20.0, n_ts=20, bounds=DEFAULT_BOUNDS, angle_uniform=False):
    """Bell state ``(|00> + |11>)/sqrt(2)`` on sites 1-2 from a random product state."""
    if model.L < 2:
        raise ValueError("entangling protocol needs L >= 2")
    psi0 = product_state(random_site_states(model.L, rng, angle_uniform))
    return ControlProblem(model, BELL, psi0, T, n_ts, tuple(bounds))


class StepPropagator:
    """Step unitaries ``exp(-i (H0 + lam Hc) dt)``, memoized by quantized ``lam``."""

    def __init__(self, problem, max_cache=4096):
        H0 = build_hamiltonian(problem.model)
        Hc = problem.control_operator
        real = not np.any(H0.imag) and not np.any(Hc.imag)
        self.H0 = H0.real if real else H0
        self.Hc = Hc.real if real else Hc
        self.dt = problem.dt
        self.max_cache = max_cache
        self._cache = {}
        self.n_decompositions = 0

    def __call__(self, lam):
        key = round(lam / MEMO_QUANTUM)
        U = self._cache.get(key)
        if U is None:
            w, V = np.linalg.eigh(self.H0 + lam * self.Hc)
            self.n_decompositions += 1
            U = (V * np.exp(-1j * w * self.dt)) @ V.conj().T
            if len(self._cache) >= self.max_cache:
                self._cache.clear()
            self._cache[key] = U
        return U


def _check_lambdas(problem, lambdas):
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.shape != (problem.n_ts,):
        raise ValueError(f"expected {problem.n_ts} amplitudes, got shape {lambdas.shape}")
    lo, hi = problem.bounds
    if np.any(lambdas < lo) or np.any(lambdas > hi):
        raise ValueError(f"amplitudes outside bounds [{lo}, {hi}]")
    return lambdas


def propagate_piecewise(problem, lambdas, propagator=None):
    """Final state after applying the ``n_ts`` constant-amplitude steps in order."""
    lambdas = _check_lambdas(problem, lambdas)
    step = propagator or StepPropagator(problem)
    psi = problem.psi0
    for lam in lambdas:
        psi = step(lam) @ psi
    return psi


def fidelity(psi_T, problem):
    """Overlap of the reduced final state with the target, in ``[0, 1]``."""
    L = problem.model.L
    psi_T = np.asarray(psi_T)
    if psi_T.shape != (2**L,):
        raise ValueError(f"final state has shape {psi_T.shape}, expected ({2**L},)")
    rho = reduce_to_sites(psi_T, L, problem.n_target_sites)
    t = problem.target
    return float(np.clip((t.conj() @ rho @ t).real, 0.0, 1.0))


class _Objective:
    """Fidelity and its central-difference gradient for one problem.

    Perturbing step ``l`` only changes one factor, so each difference is
    evaluated as ``|W_l U(lam') phi_{l-1}|^2`` from cached forward states
    ``phi`` and backward-propagated projections ``W``.
    """

    def __init__(self, problem, propagator):
        self.problem = problem
        self.step = propagator
        L = problem.model.L
        k = problem.n_target_sites
        rest = 2 ** (L - k)
        # M psi gives the amplitudes <target| x I applied to psi
        self.M = np.kron(problem.target.conj()[None, :], np.eye(rest))
        self.n_evaluations = 0

    def value(self, lambdas):
        psi = self.problem.psi0
        for lam in lambdas:
            psi = self.step(lam) @ psi
        self.n_evaluations += 1
        return float(min(np.sum(np.abs(self.M @ psi) ** 2), 1.0))

    def value_and_grad(self, lambdas):
        n = lambdas.size
        Us = [self.step(lam) for lam in lambdas]
        phis = [self.problem.psi0]
        for U in Us:
            phis.append(U @ phis[-1])
        W = [None] * n
        W[n - 1] = self.M
        for l in range(n - 2, -1, -1):
            W[l] = W[l + 1] @ Us[l + 1]
        F = float(np.sum(np.abs(self.M @ phis[-1]) ** 2))
        grad = np.empty(n)
        for l in range(n):
            plus = np.sum(np.abs(W[l] @ (self.step(lambdas[l] + FD_STEP) @ phis[l])) ** 2)
            minus = np.sum(np.abs(W[l] @ (self.step(lambdas[l] - FD_STEP) @ phis[l])) ** 2)
            grad[l] = (plus - minus) / (2 * FD_STEP)
        self.n_evaluations += 1 + 2 * n
        return F, grad


@dataclass(frozen=True)
class ControlResult:
    best_lambda: np.ndarray
    best_fidelity: float
    fidelities: np.ndarray
    n_evaluations: int

    @property
    def best_start(self):
        return int(np.argmax(self.fidelities))


def _run_start(problem, x0, maxiter, ftol):
    obj = _Objective(problem, StepPropagator(problem))

    def fun(x):
        F, g = obj.value_and_grad(x)
        return -F, -g

    res = minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=[problem.bounds] * problem.n_ts,
                   options={"maxiter": maxiter, "ftol": ftol, "gtol": 1e-12})
    x = np.clip(res.x, *problem.bounds)
    F = obj.value(x)
    F0 = obj.value(np.asarray(x0, dtype=float))
    # a non-convergent start still returns its best iterate
    if F0 > F:
        x, F = np.asarray(x0, dtype=float), F0
    return x, F, obj.n_evaluations


def optimize(problem, n_seeds=10, seed=0, maxiter=200, ftol=1e-8, workers=1):
    """Multi-start bounded quasi-Newton maximization of the fidelity.

    Start 0 is the zero field, so the result is never worse than the
    uncontrolled evolution; starts ``1..n_seeds`` are uniform in the bounds,
    drawn from stream ``(seed, j)``.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    lo, hi = problem.bounds
    starts = [np.zeros(problem.n_ts) if lo <= 0 <= hi else np.full(problem.n_ts, (lo + hi) / 2)]
    starts += [stream(seed, j).uniform(lo, hi, problem.n_ts) for j in range(1, n_seeds + 1)]
    if workers == 1:
        runs = [_run_start(problem, x0, maxiter, ftol) for x0 in starts]
    else:
        runs = Parallel(n_jobs=workers)(
            delayed(_run_start)(problem, x0, maxiter, ftol) for x0 in starts
        )
    fids = np.array([F for _, F, _ in runs])
    best = int(np.argmax(fids))
    return ControlResult(runs[best][0], float(fids[best]), fids, int(sum(n for *_, n in runs)))


def fidelity_vs_eta(params, fidelities, eta_params, eta_values, atol=1e-12):
    """Join optimal fidelities with the chaos indicator on a shared grid.

    Returns an ``(n, 3)`` array of ``(param, eta, fidelity)`` rows in grid order.
    """
    params = np.asarray(params, dtype=float)
    eta_params = np.asarray(eta_params, dtype=float)
    if params.shape != eta_params.shape or not np.allclose(params, eta_params, rtol=0, atol=atol):
        raise ValueError("fidelity and eta curves are not on the same grid")
    return np.column_stack([params, np.asarray(eta_values, float), np.asarray(fidelities, float)])


def rank_correlation(x, y):
    """Spearman correlation, ``nan`` for constant input."""
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return float("nan")
    return float(spearmanr(x, y).statistic)
