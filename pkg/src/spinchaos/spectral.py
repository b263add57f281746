"""Exact diagonalization and the spacing-ratio chaos indicator."""

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import NumericError
from .seeding import stream
from .symmetry import sector_hamiltonian
from .validation import check_hermitian

logger = logging.getLogger(__name__)

# Mean of min(r, 1/r): Wigner-Dyson (GOE) and Poisson reference values.
I_WD = 0.5307
I_POISSON = 2 * np.log(2) - 1  # 0.38629..., commonly quoted as 0.386


@dataclass(frozen=True)
class SpectralData:
    """Ascending eigenvalues and, optionally, the matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = None

    @property
    def dim(self):
        return self.eigenvalues.size

    @property
    def has_vectors(self):
        return self.eigenvectors is not None


def eigendecompose(H, want_vectors=False):
    """Full spectrum of a Hermitian matrix.

    Real symmetric input (zero imaginary part) is routed to the real solver,
    which is several times faster and yields real eigenvectors.
    """
    H = check_hermitian(H)
    if np.iscomplexobj(H) and not np.any(H.imag):
        H = H.real
    try:
        if want_vectors:
            w, v = np.linalg.eigh(H)
        else:
            w, v = np.linalg.eigvalsh(H), None
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    return SpectralData(w, v)


def count_degeneracies(eigenvalues):
    """Number of exactly zero nearest-neighbour spacings."""
    return int(np.count_nonzero(np.diff(np.asarray(eigenvalues, dtype=float)) == 0.0))


def r_tilde(eigenvalues):
    """Ratios ``min(s_n, s_{n-1}) / max(s_n, s_{n-1})`` for each interior level.

    Exact degeneracies are handled totally: two zero spacings give 1, a
    single zero spacing gives 0. A warning reports how many were found.
    """
    e = np.asarray(eigenvalues, dtype=float)
    if e.ndim != 1 or e.size < 3:
        raise ValueError("need at least 3 levels for the spacing ratio")
    if np.any(np.diff(e) < 0):
        raise ValueError("eigenvalues must be sorted ascending")
    s = np.diff(e)
    lo = np.minimum(s[1:], s[:-1])
    hi = np.maximum(s[1:], s[:-1])
    with np.errstate(invalid="ignore", divide="ignore"):
        r = lo / hi
    r[hi == 0.0] = 1.0
    n_deg = int(np.count_nonzero(s == 0.0))
    if n_deg:
        logger.warning("%d exactly degenerate spacings in spectrum of %d levels", n_deg, e.size)
    return r


def eta_from_mean(mean_r):
    """Affine map sending the Poisson value to 0 and the GOE value to 1."""
    return (mean_r - I_POISSON) / (I_WD - I_POISSON)


def eta(eigenvalues):
    """Normalized mean spacing ratio (not clamped to [0, 1])."""
    return float(eta_from_mean(np.mean(r_tilde(eigenvalues))))


@dataclass(frozen=True)
class SectorPolicy:
    """Which symmetry block to diagonalize and how to average disorder.

    ``parity`` is ``"even"``, ``"odd"`` or ``None``; ``n_up`` selects a
    total-S^z sector. ``realizations`` only matters for stochastic models.
    """

    parity: str = "odd"
    n_up: int = None
    realizations: int = 50
    seed: int = 0


def sector_spectrum(model, policy):
    block = sector_hamiltonian(model, n_up=policy.n_up, parity=policy.parity)
    return eigendecompose(block).eigenvalues


def eta_for_model(model, policy=SectorPolicy(), return_details=False):
    """Chaos indicator of ``model`` on the sector chosen by ``policy``.

    Stochastic models (random-field Heisenberg) are averaged over
    ``policy.realizations`` independent disorder draws.
    """
    if model.is_stochastic:
        values = []
        for i in range(policy.realizations):
            realized = model.realize(stream(policy.seed, i))
            values.append(eta(sector_spectrum(realized, policy)))
        values = np.array(values)
        result = float(values.mean())
        details = {"n_levels": None, "degeneracies": None, "realizations": values}
    else:
        levels = sector_spectrum(model, policy)
        result = eta(levels)
        details = {"n_levels": levels.size, "degeneracies": count_degeneracies(levels)}
    if return_details:
        return result, details
    return result


def sample_goe(n, rng):
    """GOE matrix: standard-normal diagonal, off-diagonals N(0, 1/2)."""
    a = rng.standard_normal((n, n))
    return (a + a.T) / 2
