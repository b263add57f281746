"""scikit-learn style wrappers around the numerical core.

Inputs ``X`` are columns of swept parameter values (shape ``(n, 1)`` or
``(n,)``); ``transform`` returns one row of derived quantities per value, so
the estimators compose with ``Pipeline`` and ``clone``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .control import optimize, propagate_piecewise, fidelity
from .dynamics import ensemble_averaged_purity, normalize_curve
from .operators import SpinModel
from .spectral import SectorPolicy, eta_for_model


def _column(X):
    X = check_array(np.asarray(X, dtype=float).reshape(len(X), -1) if np.ndim(X) == 1 else X,
                    dtype=float)
    if X.shape[1] != 1:
        raise ValueError(f"expected a single column of parameter values, got {X.shape[1]}")
    return X[:, 0]


class PurityNormalizer(TransformerMixin, BaseEstimator):
    """Min-max scaling fitted over a swept curve: ``(P - min) / (max - min)``."""

    def fit(self, X, y=None):
        v = _column(X)
        normalize_curve(v)  # raises on a degenerate range
        self.data_min_ = float(v.min())
        self.data_max_ = float(v.max())
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        return (_column(X) - self.data_min_) / (self.data_max_ - self.data_min_)

    def inverse_transform(self, X):
        check_is_fitted(self, "data_min_")
        return _column(X) * (self.data_max_ - self.data_min_) + self.data_min_


class _ModelSweepMixin:
    def _template(self):
        return SpinModel(self.kind, self.L, dict(self.model_params or {}),
                         self.include_probe_hamiltonian)

    def fit(self, X=None, y=None):
        template = self._template()
        if self.param not in template.params:
            raise ValueError(f"{self.param!r} is not a parameter of the {self.kind} model")
        self.model_ = template
        self.n_features_in_ = 1
        return self

    def _models(self, X):
        check_is_fitted(self, "model_")
        return [self.model_.with_params(**{self.param: v}) for v in _column(X)]


class ProbePurity(_ModelSweepMixin, TransformerMixin, BaseEstimator):
    """Ensemble-averaged time-averaged probe purity.

    Columns are ``(mean, std)``, or just the mean with ``return_std=False``.
    """

    def __init__(self, kind="ising", L=6, param="h_z", model_params=None,
                 include_probe_hamiltonian=True, realizations=50, T=50.0, dt=0.1, seed=0,
                 angle_uniform=False, workers=1, return_std=True):
        self.kind = kind
        self.L = L
        self.param = param
        self.model_params = model_params
        self.include_probe_hamiltonian = include_probe_hamiltonian
        self.realizations = realizations
        self.T = T
        self.dt = dt
        self.seed = seed
        self.angle_uniform = angle_uniform
        self.workers = workers
        self.return_std = return_std

    def transform(self, X):
        out = []
        for m in self._models(X):
            est = ensemble_averaged_purity(m, self.realizations, self.T, self.dt, self.seed,
                                           self.angle_uniform, self.workers)
            out.append((est.mean, est.std) if self.return_std else (est.mean,))
        return np.array(out)


class ChaosIndicator(_ModelSweepMixin, TransformerMixin, BaseEstimator):
    """Normalized mean spacing ratio ``eta`` per parameter value; one column."""

    def __init__(self, kind="ising", L=12, param="h_z", model_params=None,
                 include_probe_hamiltonian=True, parity="odd", n_up=None, realizations=50,
                 seed=0):
        self.kind = kind
        self.L = L
        self.param = param
        self.model_params = model_params
        self.include_probe_hamiltonian = include_probe_hamiltonian
        self.parity = parity
        self.n_up = n_up
        self.realizations = realizations
        self.seed = seed

    def transform(self, X):
        policy = SectorPolicy(self.parity, self.n_up, self.realizations, self.seed)
        return np.array([[eta_for_model(m, policy)] for m in self._models(X)])


class PulseOptimizer(BaseEstimator):
    """Multi-start pulse search; ``fit`` takes a ``ControlProblem``.

    ``predict`` returns the final state under the fitted pulse and ``score``
    its fidelity, so a pulse fitted on one problem can be scored on another
    with the same step count and bounds.
    """

    def __init__(self, n_seeds=10, seed=0, maxiter=200, ftol=1e-8, workers=1):
        self.n_seeds = n_seeds
        self.seed = seed
        self.maxiter = maxiter
        self.ftol = ftol
        self.workers = workers

    def fit(self, problem, y=None):
        res = optimize(problem, self.n_seeds, self.seed, self.maxiter, self.ftol, self.workers)
        self.result_ = res
        self.best_lambda_ = res.best_lambda
        self.best_fidelity_ = res.best_fidelity
        return self

    def predict(self, problem):
        check_is_fitted(self, "best_lambda_")
        return propagate_piecewise(problem, self.best_lambda_)

    def score(self, problem, y=None):
        return fidelity(self.predict(problem), problem)
