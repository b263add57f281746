"""Parameter sweeps producing the data behind each purity / eta / control curve.

Random streams are keyed by ``(master seed, purpose, realization)`` and do not
depend on the grid value, so every grid point sees the same initial states
and disorder draws (common random numbers). This keeps the normalized curves
free of point-to-point sampling noise and makes results independent of the
grid and of the worker count.
"""

import hashlib
import json
import logging
from decimal import Decimal
from dataclasses import asdict, dataclass, field, fields
from importlib.metadata import PackageNotFoundError, version

import numpy as np
from joblib import Parallel, delayed

from . import __version__
from .control import entangling_problem, optimize, rank_correlation, transfer_problem
from .dynamics import (
    ensemble_averaged_purity,
    fluctuations,
    probe_trajectory,
    random_product_state,
    thermal_ensemble_purity,
    time_grid,
    window_mask,
)
from .estimators import PurityNormalizer
from .exceptions import ConfigError, DegenerateRangeError, GridPointError
from .operators import ModelKind, build_hamiltonian, sample_random_couplings
from .seeding import child_seed, stream
from .spectral import SectorPolicy, eigendecompose, eta_for_model
from .validation import check_grid

logger = logging.getLogger(__name__)

# stream purposes
STATES, COUPLINGS, DISORDER, CONTROL_STATE, OPTIMIZER = range(5)

PURITY_COLUMNS = ("param", "mean_purity", "std_purity", "purity_norm", "eta", "one_minus_eta")
ETA_COLUMNS = ("param", "eta", "one_minus_eta", "n_levels", "degeneracies")
FLUCTUATION_COLUMNS = ("L", "delta_purity", "delta_rx", "delta_ry", "delta_rz")
CONTROL_COLUMNS = ("param", "best_fidelity", "std_fidelity", "zero_field_fidelity",
                   "n_evaluations", "eta", "one_minus_eta")
TEMPERATURE_COLUMNS = ("beta", "param", "mean_purity", "std_purity", "purity_norm",
                       "eta", "one_minus_eta")


@dataclass(frozen=True)
class ControlSettings:
    protocol: str = "transfer"
    T: float = 20.0
    n_ts: int = 20
    bounds: tuple = (-2.0, 2.0)
    n_seeds: int = 10
    realizations: int = 1
    maxiter: int = 200

    def __post_init__(self):
        if self.protocol not in ("transfer", "entangling"):
            raise ConfigError(f"unknown protocol {self.protocol!r}", "control.protocol")
        if self.n_seeds < 1:
            raise ConfigError("must be >= 1", "control.n_seeds")
        if self.realizations < 1:
            raise ConfigError("must be >= 1", "control.realizations")
        if self.n_ts < 1:
            raise ConfigError("must be >= 1", "control.n_ts")
        if self.bounds[0] > self.bounds[1]:
            raise ConfigError("lower bound exceeds upper bound", "control.bounds")


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter over a model template plus run settings.

    ``eta_length`` (when set) is the chain length used for the spectral
    indicator column; the purity itself is computed at ``model.L``.
    ``random_couplings = (lo, hi)`` replaces the Ising bonds with one draw
    per sweep, applied to the dynamics only.
    """

    model: object
    param: str
    grid: tuple
    realizations: int = 50
    T: float = 50.0
    dt: float = 0.1
    window: tuple = None
    eta_length: int = None
    sector: SectorPolicy = SectorPolicy()
    random_couplings: tuple = None
    angle_uniform: bool = False
    seed: int = 0
    workers: int = 1
    betas: tuple = (0.0,)
    control: ControlSettings = ControlSettings()

    def __post_init__(self):
        try:
            grid = check_grid(self.grid, name="sweep.grid")
        except ValueError as exc:
            raise ConfigError(str(exc), "sweep.grid") from None
        object.__setattr__(self, "grid", tuple(float(g) for g in grid))
        if self.realizations < 1:
            raise ConfigError("must be >= 1", "sweep.realizations")
        if self.T <= 0 or self.dt <= 0 or self.dt > self.T:
            raise ConfigError("need 0 < dt <= T", "dynamics.dt")
        if self.window is None:
            object.__setattr__(self, "window", (self.T / 2, self.T))
        if not 0 <= self.window[0] < self.window[1]:
            raise ConfigError("window must satisfy 0 <= start < end", "dynamics.window")
        if self.seed is None or int(self.seed) < 0:
            raise ConfigError("seed is required and must be nonnegative", "seed")
        if self.param != "L" and self.param not in self.model.params:
            raise ConfigError(
                f"{self.param!r} is not a parameter of the {self.model.kind.value} model",
                "sweep.param",
            )
        if self.random_couplings is not None:
            if self.model.kind is not ModelKind.ISING:
                raise ConfigError("random couplings apply to the ising model only",
                                  "model.random_couplings")
            lo, hi = self.random_couplings
            if lo > hi:
                raise ConfigError("empty coupling range", "model.random_couplings")
        if any(b < 0 for b in self.betas):
            raise ConfigError("inverse temperatures must be nonnegative", "sweep.betas")

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["model"] = self.model.to_dict()
        d["grid"] = list(self.grid)
        d["sector"] = asdict(self.sector)
        d["control"] = asdict(self.control)
        return d

    def config_hash(self):
        d = self.to_dict()
        d.pop("workers")  # does not affect results
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class SweepResult:
    """Rows in grid order plus provenance metadata."""

    columns: tuple
    rows: list
    meta: dict = field(default_factory=dict)

    def column(self, name):
        i = self.columns.index(name)
        return np.array([np.nan if r[i] is None else r[i] for r in self.rows], dtype=float)

    def to_csv(self):
        lines = [",".join(self.columns)]
        lines += [",".join(format_value(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"


def format_value(value):
    """12 significant digits, positional notation, ``NA`` for missing."""
    if value is None:
        return "NA"
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if not np.isfinite(value):
        return "NA"
    return format(Decimal(f"{value:.11e}"), "f")


def _versions():
    out = {"spinchaos": __version__, "numpy": np.__version__}
    for pkg in ("scipy", "joblib"):
        try:
            out[pkg] = version(pkg)
        except PackageNotFoundError:  # pragma: no cover
            out[pkg] = None
    return out


def _meta(spec, kind, **extra):
    return {"sweep": kind, "seed": spec.seed, "config_hash": spec.config_hash(),
            "versions": _versions(), **extra}


# -- model plumbing -------------------------------------------------------------


def _apply(model, param, value):
    if param == "L":
        return model.with_params(L=int(round(value)))
    return model.with_params(**{param: value})


def dynamics_model(spec, value):
    """Model used for the probe dynamics at one grid value."""
    model = _apply(spec.model, spec.param, value)
    if spec.random_couplings is not None:
        J = sample_random_couplings(model.L, spec.random_couplings, stream(spec.seed, COUPLINGS))
        model = model.with_params(couplings=J)
    return model


def spectral_model(spec, value):
    """Model used for the eta column: equal couplings, length ``eta_length``."""
    model = _apply(spec.model, spec.param, value)
    if model.kind is ModelKind.ISING and isinstance(model["couplings"], tuple):
        if not model.uniform_couplings:
            if len(model["couplings"]) != spec.eta_length - 1:
                raise ConfigError("explicit couplings do not fit eta_length", "model.couplings")
            return model.with_params(L=spec.eta_length, include_probe_hamiltonian=True)
        model = model.with_params(couplings=model["couplings"][0] if model.L > 1 else 1.0)
    return model.with_params(L=spec.eta_length, include_probe_hamiltonian=True)


def spectral_policy(spec):
    return SectorPolicy(spec.sector.parity, spec.sector.n_up, spec.sector.realizations,
                        child_seed(spec.seed, DISORDER))


def check_symmetry_policy(spec):
    """Reject sector choices the models cannot support before any computation."""
    if spec.eta_length is None:
        return
    model = spectral_model(spec, spec.grid[0])
    if spec.sector.parity is not None:
        if spec.eta_length < 2:
            raise ConfigError("parity sectors need eta_length >= 2", "sweep.eta_length")
        if model.kind is ModelKind.ISING and not model.uniform_couplings:
            raise ConfigError("unequal couplings break parity; use sector=none",
                              "sweep.sector")
        if model.kind is ModelKind.HEISENBERG:
            raise ConfigError("random fields break parity; use sector=none", "sweep.sector")
    if spec.sector.n_up is not None:
        if model.kind in (ModelKind.ISING, ModelKind.TILTED):
            raise ConfigError(f"{model.kind.value} model does not conserve total S^z",
                              "sweep.n_up")
        if not 0 <= spec.sector.n_up <= spec.eta_length:
            raise ConfigError(f"n_up must lie in 0..{spec.eta_length}", "sweep.n_up")


def _map_points(func, spec, values, progress):
    """Evaluate ``func(value)`` per grid point; fail fast with the location."""

    def guarded(i, v):
        try:
            return i, func(v), None
        except Exception as exc:  # noqa: BLE001 - re-raised with location below
            return i, None, exc

    if spec.workers == 1:
        out = []
        for i, v in enumerate(values):
            res = guarded(i, v)
            if res[2] is not None:
                raise GridPointError(i, v, res[2]) from res[2]
            out.append(res[1])
            if progress:
                progress(i, res[1])
        return out
    results = Parallel(n_jobs=spec.workers)(delayed(guarded)(i, v) for i, v in enumerate(values))
    out = []
    for i, value, exc in results:
        if exc is not None:
            raise GridPointError(i, values[i], exc) from exc
        out.append(value)
        if progress:
            progress(i, value)
    return out


def _eta_values(spec, progress=None):
    if spec.eta_length is None:
        return [None] * len(spec.grid)
    policy = spectral_policy(spec)
    return _map_points(lambda v: eta_for_model(spectral_model(spec, v), policy), spec,
                       spec.grid, progress)


def _normalized(values):
    try:
        return PurityNormalizer().fit_transform(values).tolist()
    except DegenerateRangeError as exc:
        logger.warning("purity normalization skipped: %s", exc)
        return [None] * len(values)


# -- sweeps ---------------------------------------------------------------------


def run_purity_sweep(spec, progress=None):
    """Ensemble-averaged probe purity over the grid, normalized across it."""
    check_symmetry_policy(spec)
    state_seed = child_seed(spec.seed, STATES)

    def point(v):
        est = ensemble_averaged_purity(dynamics_model(spec, v), spec.realizations, spec.T,
                                       spec.dt, state_seed, spec.angle_uniform)
        return est.mean, est.std

    stats = _map_points(point, spec, spec.grid, progress)
    means = [m for m, _ in stats]
    norm = _normalized(means)
    etas = _eta_values(spec)
    rows = [
        (g, m, s, n, e, None if e is None else 1 - e)
        for g, (m, s), n, e in zip(spec.grid, stats, norm, etas)
    ]
    meta = _meta(spec, "purity", degenerate_range=norm[0] is None)
    return SweepResult(PURITY_COLUMNS, rows, meta)


def run_eta_sweep(spec, progress=None):
    """Spectral indicator over the grid at chain length ``eta_length``."""
    if spec.eta_length is None:
        raise ConfigError("eta sweep needs sweep.eta_length", "sweep.eta_length")
    check_symmetry_policy(spec)
    policy = spectral_policy(spec)

    def point(v):
        value, details = eta_for_model(spectral_model(spec, v), policy, return_details=True)
        return value, details["n_levels"], details["degeneracies"]

    stats = _map_points(point, spec, spec.grid, progress)
    rows = [(g, e, 1 - e, n, d) for g, (e, n, d) in zip(spec.grid, stats)]
    return SweepResult(ETA_COLUMNS, rows, _meta(spec, "eta"))


def single_trajectory_fluctuations(model, psi0, window, dt):
    """``(delta P, delta r_x, delta r_y, delta r_z)`` of one trajectory over ``window``."""
    spectral = eigendecompose(build_hamiltonian(model), want_vectors=True)
    times = time_grid(window[1], dt, start=window[0])
    traj = probe_trajectory(spectral, psi0, times)
    sel = window_mask(traj.times, window)
    return (fluctuations(traj.purity[sel]), *(fluctuations(traj.bloch[sel, k]) for k in range(3)))


def log2_slope(lengths, values):
    """Least-squares slope of ``log2(values)`` against ``lengths``."""
    return float(np.polyfit(np.asarray(lengths, float), np.log2(np.asarray(values, float)), 1)[0])


def run_fluctuation_scaling(spec, progress=None):
    """Mean temporal fluctuations of the probe versus chain length (``param='L'``)."""
    if spec.param != "L":
        raise ConfigError("fluctuation scaling sweeps the chain length", "sweep.param")
    state_seed = child_seed(spec.seed, STATES)

    def point(v):
        model = dynamics_model(spec, v)
        spectral = eigendecompose(build_hamiltonian(model), want_vectors=True)
        times = time_grid(spec.window[1], spec.dt, start=spec.window[0])
        acc = []
        for i in range(spec.realizations):
            rng = stream(state_seed, i)
            psi0 = random_product_state(model.L, rng, spec.angle_uniform)
            traj = probe_trajectory(spectral, psi0, times)
            acc.append((fluctuations(traj.purity),
                        *(fluctuations(traj.bloch[:, k]) for k in range(3))))
        return np.mean(acc, axis=0)

    stats = _map_points(point, spec, spec.grid, progress)
    rows = [(int(round(g)), *map(float, s)) for g, s in zip(spec.grid, stats)]
    slopes = {}
    if len(rows) >= 2:
        Ls = [r[0] for r in rows]
        for j, name in enumerate(FLUCTUATION_COLUMNS[1:], start=1):
            slopes[name] = log2_slope(Ls, [r[j] for r in rows])
    return SweepResult(FLUCTUATION_COLUMNS, rows, _meta(spec, "fluctuations", log2_slopes=slopes))


def run_control_sweep(spec, progress=None):
    """Optimal control fidelity over the grid, optionally joined with eta."""
    check_symmetry_policy(spec)
    c = spec.control
    opt_seed = child_seed(spec.seed, OPTIMIZER)
    make = transfer_problem if c.protocol == "transfer" else entangling_problem

    def point(v):
        model = dynamics_model(spec, v)
        best, zero = [], []
        n_eval = 0
        for r in range(c.realizations):
            problem = make(model, stream(spec.seed, CONTROL_STATE, r), c.T, c.n_ts, c.bounds,
                           spec.angle_uniform)
            res = optimize(problem, c.n_seeds, opt_seed, maxiter=c.maxiter)
            best.append(res.best_fidelity)
            zero.append(res.fidelities[0])
            n_eval += res.n_evaluations
        return float(np.mean(best)), float(np.std(best)), float(np.mean(zero)), n_eval

    stats = _map_points(point, spec, spec.grid, progress)
    etas = _eta_values(spec)
    rows = [(g, *s, e, None if e is None else 1 - e) for g, s, e in zip(spec.grid, stats, etas)]
    extra = {}
    if spec.eta_length is not None and len(rows) > 1:
        extra["spearman_eta_fidelity"] = rank_correlation([r[5] for r in rows],
                                                          [r[1] for r in rows])
    return SweepResult(CONTROL_COLUMNS, rows, _meta(spec, "control", **extra))


def run_temperature_sweep(spec, progress=None):
    """Normalized probe purity per environment inverse temperature ``beta``."""
    check_symmetry_policy(spec)
    if spec.model.is_stochastic:
        raise ConfigError("temperature sweeps need a fixed Hamiltonian", "model.kind")
    state_seed = child_seed(spec.seed, STATES)
    jobs = [(b, g) for b in spec.betas for g in spec.grid]

    def point(job):
        beta, v = job
        est = thermal_ensemble_purity(dynamics_model(spec, v), beta, spec.realizations, spec.T,
                                      spec.dt, state_seed, spec.angle_uniform)
        return est.mean, est.std

    stats = _map_points(point, spec, jobs, progress)
    etas = _eta_values(spec)
    rows = []
    n = len(spec.grid)
    for k, beta in enumerate(spec.betas):
        block = stats[k * n:(k + 1) * n]
        norm = _normalized([m for m, _ in block])
        for g, (m, s), p, e in zip(spec.grid, block, norm, etas):
            rows.append((beta, g, m, s, p, e, None if e is None else 1 - e))
    return SweepResult(TEMPERATURE_COLUMNS, rows, _meta(spec, "temperature"))
