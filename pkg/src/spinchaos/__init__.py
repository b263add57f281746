"""Probe-spin sensing of chaos in short spin chains.

Exact diagonalization, symmetry sectors, spacing-ratio statistics, probe
equilibration dynamics and piecewise-constant control.
"""

__version__ = "0.1.0"

from .control import ControlProblem, ControlResult, optimize, propagate_piecewise, fidelity
from .dynamics import ensemble_averaged_purity, probe_trajectory, thermal_ensemble_purity
from .estimators import ChaosIndicator, ProbePurity, PulseOptimizer, PurityNormalizer
from .exceptions import (
    CapacityError,
    ConfigError,
    DegenerateRangeError,
    GridPointError,
    NumericError,
    SpinChaosError,
    SymmetryViolationError,
)
from .operators import ModelKind, SpinModel, build_hamiltonian
from .spectral import I_POISSON, I_WD, SectorPolicy, eigendecompose, eta, eta_for_model, r_tilde

__all__ = [
    "CapacityError", "ChaosIndicator", "ConfigError", "ControlProblem", "ControlResult",
    "DegenerateRangeError", "GridPointError", "I_POISSON", "I_WD", "ModelKind", "NumericError",
    "ProbePurity", "PulseOptimizer", "PurityNormalizer", "SectorPolicy", "SpinChaosError",
    "SpinModel", "SymmetryViolationError", "build_hamiltonian", "eigendecompose",
    "ensemble_averaged_purity", "eta", "eta_for_model", "fidelity", "optimize",
    "probe_trajectory", "propagate_piecewise", "r_tilde", "thermal_ensemble_purity",
]
