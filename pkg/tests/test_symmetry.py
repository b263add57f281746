import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinchaos.exceptions import SymmetryViolationError
from spinchaos.operators import SpinModel, build_hamiltonian
from spinchaos.symmetry import (
    composed_sector,
    parity_basis,
    parity_operator,
    parity_sectors,
    reverse_bits,
    sector_dimension,
    sector_hamiltonian,
    sz_sector,
    sz_states,
)


def _multiset_equal(a, b, atol=1e-10):
    a, b = np.sort(np.asarray(a)), np.sort(np.asarray(b))
    return a.shape == b.shape and np.allclose(a, b, atol=atol, rtol=0)


def test_reverse_bits_involution():
    s = np.arange(64)
    assert np.array_equal(reverse_bits(reverse_bits(s, 6), 6), s)
    assert reverse_bits(np.array([0b100]), 3)[0] == 0b001


@pytest.mark.parametrize("L", [2, 3, 4, 5, 6])
def test_parity_sector_spectra_multiset_equal(L):
    H = build_hamiltonian(SpinModel.ising(L, 1.0, 0.4))
    even, odd = parity_sectors(H, L)
    full = np.linalg.eigvalsh(H)
    assert _multiset_equal(np.concatenate([np.linalg.eigvalsh(even), np.linalg.eigvalsh(odd)]), full)


@pytest.mark.parametrize("L", [2, 3, 4, 5, 6])
def test_sz_sectors_multiset_equal(L):
    H = build_hamiltonian(SpinModel.xxz(L, 0.1, 0.5))
    parts = [np.linalg.eigvalsh(sz_sector(H, L, n)) for n in range(L + 1)]
    assert _multiset_equal(np.concatenate(parts), np.linalg.eigvalsh(H))


@pytest.mark.parametrize("L", [3, 4, 5, 6])
def test_composed_sectors_multiset_equal(L):
    H = build_hamiltonian(SpinModel.xxz(L, 0.1, 0.7))
    parts = [np.linalg.eigvalsh(composed_sector(H, L, n, p))
             for n in range(L + 1) for p in ("even", "odd")]
    parts = [p for p in parts if p.size]
    assert _multiset_equal(np.concatenate(parts), np.linalg.eigvalsh(H))


def test_parity_basis_is_orthonormal_eigenbasis():
    L = 5
    P = parity_operator(L)
    for label, sign in (("even", 1), ("odd", -1)):
        V = parity_basis(L, label).vectors
        assert np.allclose(V.T @ V, np.eye(V.shape[1]))
        assert np.allclose(P @ V, sign * V)


@pytest.mark.parametrize("L", [2, 3, 4, 5, 7, 8])
def test_sector_dimensions(L):
    even = sector_dimension(L, parity="even")
    odd = sector_dimension(L, parity="odd")
    assert even + odd == 2**L
    assert even == parity_basis(L, "even").dim and odd == parity_basis(L, "odd").dim
    assert sum(sector_dimension(L, n) for n in range(L + 1)) == 2**L


def test_l12_odd_dimension():
    assert sector_dimension(12, parity="odd") == 2016
    assert sector_dimension(12, parity="even") == 2080


def test_random_couplings_violate_parity():
    H = build_hamiltonian(SpinModel.ising(4, 1.0, 0.5, [0.6, 1.0, 1.4]))
    with pytest.raises(SymmetryViolationError):
        parity_sectors(H, 4)


def test_ising_does_not_conserve_sz():
    H = build_hamiltonian(SpinModel.ising(4))
    with pytest.raises(SymmetryViolationError):
        sz_sector(H, 4, 2)
    with pytest.raises(SymmetryViolationError):
        sector_hamiltonian(SpinModel.ising(4), n_up=2)


def test_probe_neglect_breaks_parity():
    with pytest.raises(SymmetryViolationError):
        sector_hamiltonian(SpinModel.tilted(4, theta=0.4, include_probe_hamiltonian=False),
                           parity="odd")


@settings(max_examples=15, deadline=None)
@given(L=st.integers(3, 7), n=st.integers(0, 7), parity=st.sampled_from(["even", "odd", None]),
       lam=st.floats(0, 1))
def test_direct_builder_matches_projection(L, n, parity, lam):
    n = min(n, L)
    m = SpinModel.xxz(L, 0.1, lam)
    direct = sector_hamiltonian(m, n_up=n, parity=parity)
    H = build_hamiltonian(m)
    ref = sz_sector(H, L, n) if parity is None else composed_sector(H, L, n, parity)
    assert np.allclose(direct, ref, atol=1e-12)
    assert direct.shape[0] == sector_dimension(L, n, parity)


def test_sz_states_counts():
    s = sz_states(4, 1)
    assert list(s) == [7, 11, 13, 14]
