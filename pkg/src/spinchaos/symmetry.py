"""Chain-reversal parity and total-S^z sectors.

Sector bases are built in ascending basis-index order so projected matrices
are reproducible bit for bit. Symmetries are always checked numerically
before a Hamiltonian is blocked.
"""

from dataclasses import dataclass
from math import comb

import numpy as np

from .exceptions import SymmetryViolationError
from .operators import build_hamiltonian, restricted_hamiltonian
from .validation import check_hermitian

SYMMETRY_ATOL = 1e-10


def reverse_bits(states, L):
    """Index of ``|b_L ... b_1>`` for each ``|b_1 ... b_L>``."""
    states = np.asarray(states, dtype=np.int64)
    out = np.zeros_like(states)
    for k in range(L):
        out |= ((states >> k) & 1) << (L - 1 - k)
    return out


def sz_states(L, n_up):
    """Sorted basis indices with exactly ``n_up`` up-spins (bit value 0)."""
    if not 0 <= n_up <= L:
        raise ValueError(f"n_up must lie in 0..{L}, got {n_up}")
    states = np.arange(2**L, dtype=np.int64)
    return states[L - _popcount(states, L) == n_up]


def _popcount(states, L):
    count = np.zeros_like(states)
    for k in range(L):
        count += (states >> k) & 1
    return count


@dataclass(frozen=True)
class SectorBasis:
    """Orthonormal basis of a symmetry sector, stored as sparse coefficients.

    Each basis vector ``k`` is ``weight_a[k] |a[k]> + weight_b[k] |b[k]>``
    (with ``weight_b[k] == 0`` and ``b[k] == a[k]`` for single-state vectors).
    Indices are positions in the parent basis of size ``parent_dim``.
    """

    label: object
    parent_dim: int
    a: np.ndarray
    b: np.ndarray
    weight_a: np.ndarray
    weight_b: np.ndarray

    @property
    def dim(self):
        return self.a.size

    @property
    def vectors(self):
        """Dense ``parent_dim x dim`` matrix with the basis vectors as columns."""
        V = np.zeros((self.parent_dim, self.dim))
        cols = np.arange(self.dim)
        V[self.a, cols] += self.weight_a
        V[self.b, cols] += self.weight_b
        return V

    def project(self, H):
        """``V^T H V`` via index gathers (each column of V has <= 2 entries)."""
        cols = H[:, self.a] * self.weight_a + H[:, self.b] * self.weight_b
        return self.weight_a[:, None] * cols[self.a, :] + self.weight_b[:, None] * cols[self.b, :]


def _parity_basis(mirror, label):
    """Parity sector basis given ``mirror[i]`` = position of the reversed state."""
    if label not in ("even", "odd"):
        raise ValueError(f"parity label must be 'even' or 'odd', got {label!r}")
    idx = np.arange(mirror.size)
    rep = idx <= mirror
    fixed = idx == mirror
    sign = 1.0 if label == "even" else -1.0
    if label == "even":
        keep = rep
    else:
        keep = rep & ~fixed
    a = idx[keep]
    b = mirror[keep]
    s = np.where(fixed[keep], 1.0, 1 / np.sqrt(2))
    wb = np.where(fixed[keep], 0.0, sign / np.sqrt(2))
    return SectorBasis(label, mirror.size, a, b, s, wb)


def parity_basis(L, label):
    """Even/odd eigenspace basis of the reversal operator on the full space."""
    states = np.arange(2**L, dtype=np.int64)
    return _parity_basis(reverse_bits(states, L), label)


def parity_operator(L):
    """Permutation matrix of ``|b_1 ... b_L> -> |b_L ... b_1>``."""
    if L < 2:
        raise ValueError("parity needs L >= 2")
    dim = 2**L
    P = np.zeros((dim, dim))
    states = np.arange(dim)
    P[reverse_bits(states, L), states] = 1.0
    return P


def parity_commutator_norm(H, L):
    mirror = reverse_bits(np.arange(2**L), L)
    # (H Pi)[:, b] = H[:, rev b] and (Pi H)[a, :] = H[rev a, :]
    return float(np.max(np.abs(H[:, mirror] - H[mirror, :])))


def sz_commutator_norm(H, L):
    m = (L - 2 * _popcount(np.arange(2**L, dtype=np.int64), L)) / 2
    return float(np.max(np.abs(H * (m[None, :] - m[:, None]))))


def _require(norm, what):
    if norm > SYMMETRY_ATOL:
        raise SymmetryViolationError(
            f"Hamiltonian does not conserve {what} (commutator norm {norm:.3e})"
        )


def parity_sectors(H, L):
    """Blocks of ``H`` on the even and odd parity eigenspaces."""
    H = check_hermitian(H)
    if H.shape[0] != 2**L:
        raise ValueError(f"H has dimension {H.shape[0]}, expected 2^{L}")
    _require(parity_commutator_norm(H, L), "parity")
    return parity_basis(L, "even").project(H), parity_basis(L, "odd").project(H)


def sz_sector(H, L, n_up):
    """Block of ``H`` on the states with exactly ``n_up`` up-spins."""
    H = check_hermitian(H)
    if H.shape[0] != 2**L:
        raise ValueError(f"H has dimension {H.shape[0]}, expected 2^{L}")
    _require(sz_commutator_norm(H, L), "total S^z")
    states = sz_states(L, n_up)
    return H[np.ix_(states, states)]


def _sector_mirror(states, L):
    rev = reverse_bits(states, L)
    return np.searchsorted(states, rev)


def composed_sector(H, L, n_up, parity):
    """Block of ``H`` on a fixed-``n_up`` sector further split by parity."""
    H = check_hermitian(H)
    _require(parity_commutator_norm(H, L), "parity")
    block = sz_sector(H, L, n_up)
    states = sz_states(L, n_up)
    return _parity_basis(_sector_mirror(states, L), parity).project(block)


def sector_dimension(L, n_up=None, parity=None):
    """Closed-form sector dimension.

    The reversal permutation fixes ``2^ceil(L/2)`` basis states, which gives
    ``dim_even = (2^L + 2^ceil(L/2)) / 2``. Combined sectors are counted
    by enumeration.
    """
    if n_up is None and parity is None:
        return 2**L
    if parity is None:
        return comb(L, n_up)
    if n_up is None:
        fixed = 2 ** ((L + 1) // 2)
        return (2**L + fixed) // 2 if parity == "even" else (2**L - fixed) // 2
    states = sz_states(L, n_up)
    return _parity_basis(_sector_mirror(states, L), parity).dim


def sector_hamiltonian(model, n_up=None, parity=None):
    """Build the sector block of ``model``'s Hamiltonian without the full matrix.

    For ``n_up`` sectors only the ``C(L, n_up)`` states are touched, which lets
    S^z-conserving chains go beyond the dense full-space cap. Symmetries are
    still verified on the block actually built.
    """
    L = model.L
    if n_up is None:
        states = np.arange(2**L, dtype=np.int64)
        block = build_hamiltonian(model)
    else:
        states = sz_states(L, n_up)
        try:
            block = restricted_hamiltonian(model, states)
        except ValueError as exc:
            raise SymmetryViolationError(f"model does not conserve total S^z: {exc}") from None
    if parity is None:
        return block
    mirror = _sector_mirror(states, L)
    _require(float(np.max(np.abs(block[:, mirror] - block[mirror, :]))), "parity")
    return _parity_basis(mirror, parity).project(block)
