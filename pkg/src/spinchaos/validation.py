"""Input validation helpers shared by the numerical modules and estimators."""

import numpy as np

from .exceptions import NumericError

HERMITIAN_ATOL = 1e-12
NORM_ATOL = 1e-12


def check_hermitian(a, atol=HERMITIAN_ATOL, name="operator"):
    """Return ``a`` as a square complex array, raising if it is not Hermitian."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{name} contains non-finite entries")
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > atol:
        raise ValueError(f"{name} is not Hermitian (max |A - A^H| = {dev:.3e})")
    return a


def check_state(psi, dim=None, atol=NORM_ATOL, name="state"):
    """Validate a normalized state vector, optionally of a given dimension."""
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise ValueError(f"{name} must be a 1-d amplitude vector")
    if dim is not None and psi.shape[0] != dim:
        raise ValueError(f"{name} has dimension {psi.shape[0]}, expected {dim}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > atol:
        raise ValueError(f"{name} is not normalized (|psi| = {norm!r})")
    return psi


def check_density(rho, dim=None, atol=NORM_ATOL, name="density matrix"):
    """Validate Hermiticity, unit trace and (approximate) positivity."""
    rho = check_hermitian(np.asarray(rho, dtype=complex), atol=atol, name=name)
    if dim is not None and rho.shape[0] != dim:
        raise ValueError(f"{name} has dimension {rho.shape[0]}, expected {dim}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > atol:
        raise ValueError(f"{name} has trace {tr!r}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ValueError(f"{name} is not positive semidefinite")
    return rho


def n_sites_from_dim(dim):
    """Number of qubits ``L`` such that ``2**L == dim``."""
    L = int(dim).bit_length() - 1
    if dim < 1 or 2**L != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return L


def check_grid(values, name="grid", strictly_increasing=True):
    """1-d finite float array, non-empty and (by default) strictly increasing."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} contains non-finite values")
    if strictly_increasing and np.any(np.diff(values) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    return values
