"""Exception types raised across the package."""


class SpinChaosError(Exception):
    """Base class for package errors."""


class CapacityError(SpinChaosError, MemoryError):
    """Requested Hilbert-space dimension exceeds the configured cap."""


class SymmetryViolationError(SpinChaosError, ValueError):
    """A Hamiltonian does not commute with the symmetry used to block it."""


class DegenerateRangeError(SpinChaosError, ValueError):
    """A curve cannot be min-max normalized because max == min."""


class NumericError(SpinChaosError, ArithmeticError):
    """Non-finite intermediate result or solver failure."""


class ConfigError(SpinChaosError, ValueError):
    """Invalid run configuration. ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class GridPointError(SpinChaosError, RuntimeError):
    """A sweep failed at a specific grid point."""

    def __init__(self, index, value, cause):
        super().__init__(f"grid point #{index} (value={value!r}) failed: {cause}")
        self.index = index
        self.value = value
        self.cause = cause
