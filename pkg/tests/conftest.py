"""Independent reference implementations used as test oracles."""

import itertools

import numpy as np
import pytest

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2)


def kron_chain(ops):
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def embed(op, site, L):
    """``op`` on 1-based ``site`` by explicit Kronecker products."""
    return kron_chain([op if k == site else I2 for k in range(1, L + 1)])


def ising_oracle(L, h_x, h_z, J, probe=True):
    J = np.broadcast_to(np.asarray(J, float), (L - 1,)) if L > 1 else []
    H = np.zeros((2**L, 2**L), dtype=complex)
    for k in range(1 if probe else 2, L + 1):
        H += h_x * embed(SX, k, L) + h_z * embed(SZ, k, L)
    for k in range(1, L):
        H -= J[k - 1] * embed(SZ, k, L) @ embed(SZ, k + 1, L)
    return H


def _bond(op, i, j, L):
    return embed(op, i, L) @ embed(op, j, L)


def tilted_oracle(L, B, theta, J, probe=True):
    H = np.zeros((2**L, 2**L), dtype=complex)
    for k in range(1 if probe else 2, L + 1):
        H += B * (np.sin(theta) * embed(SX / 2, k, L) + np.cos(theta) * embed(SZ / 2, k, L))
    for k in range(1, L):
        H += J * _bond(SZ / 2, k, k + 1, L)
    return H


def heisenberg_oracle(L, fields):
    H = np.zeros((2**L, 2**L), dtype=complex)
    for k in range(1, L):
        for s in (SX, SY, SZ):
            H += _bond(s / 2, k, k + 1, L)
    for k in range(1, L + 1):
        H += fields[k - 1] * embed(SZ / 2, k, L)
    return H


def xxz_oracle(L, mu, lam):
    H = np.zeros((2**L, 2**L), dtype=complex)
    for dist, scale in ((1, 1.0), (2, lam)):
        for k in range(1, L - dist + 1):
            H += scale * (_bond(SX / 2, k, k + dist, L) + _bond(SY / 2, k, k + dist, L)
                          + mu * _bond(SZ / 2, k, k + dist, L))
    return H


def partial_trace_oracle(rho, L, n_keep):
    """Reduced density matrix of the first ``n_keep`` sites by explicit index sums."""
    dk, dr = 2**n_keep, 2 ** (L - n_keep)
    out = np.zeros((dk, dk), dtype=complex)
    for i, j in itertools.product(range(dk), repeat=2):
        for e in range(dr):
            out[i, j] += rho[i * dr + e, j * dr + e]
    return out


def random_state(dim, rng):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def report(criterion, ok, detail):
    """Record and print one acceptance line."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
