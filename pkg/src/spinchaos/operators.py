"""Spin-1/2 chain models and their dense Hamiltonians.

Basis convention: site 1 is the leftmost (most significant) tensor factor, so
basis index ``b`` encodes ``|b_1 b_2 ... b_L>`` with bit value 0 meaning spin up
(the +1 eigenstate of sigma^z).  Site ``k`` lives in bit ``L - k`` of ``b``.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType

import numpy as np

from .exceptions import CapacityError

DEFAULT_MAX_DIM = 2**14

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class ModelKind(str, Enum):
    ISING = "ising"
    TILTED = "tilted"
    HEISENBERG = "heisenberg"
    XXZ = "xxz"


# Parameter names per model kind, with defaults. ``None`` for couplings/fields
# means "not fixed": couplings fall back to J_k = 1 and fields are drawn per
# disorder realization.
MODEL_PARAMS = {
    ModelKind.ISING: {"h_x": 1.0, "h_z": 0.5, "couplings": 1.0},
    ModelKind.TILTED: {"B": 2.0, "theta": 0.0, "J": 2.0},
    ModelKind.HEISENBERG: {"h": 0.0, "fields": None},
    ModelKind.XXZ: {"mu": 0.1, "lam": 0.0},
}


def _freeze(value):
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(float(v) for v in value)
    if value is None:
        return None
    return float(value)


@dataclass(frozen=True)
class SpinModel:
    """One of the four open-boundary chain Hamiltonians plus its parameters.

    Ising (``ising``) uses Pauli matrices::

        H = sum_k (h_x X_k + h_z Z_k) - sum_k J_k Z_k Z_{k+1}

    The other kinds use spin operators ``S = sigma / 2``:

    * ``tilted``: ``B sum_k (sin(theta) S^x_k + cos(theta) S^z_k) + J sum_k S^z_k S^z_{k+1}``
    * ``heisenberg``: ``sum_k S_k . S_{k+1} + sum_k h_k S^z_k`` with ``h_k`` uniform in ``[-h, h]``
    * ``xxz``: nearest-neighbour XXZ with anisotropy ``mu`` plus ``lam`` times
      the same coupling between next-nearest neighbours.

    With ``include_probe_hamiltonian=False`` every single-site term acting on
    site 1 (the probe) is dropped.
    """

    kind: ModelKind
    L: int
    params: MappingProxyType = field(default_factory=dict)
    include_probe_hamiltonian: bool = True

    def __post_init__(self):
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        L = int(self.L)
        if L < 1:
            raise ValueError(f"L must be a positive integer, got {self.L!r}")
        object.__setattr__(self, "L", L)
        allowed = MODEL_PARAMS[kind]
        unknown = set(self.params) - set(allowed)
        if unknown:
            raise ValueError(
                f"unknown parameter(s) {sorted(unknown)} for {kind.value} model; "
                f"allowed: {sorted(allowed)}"
            )
        merged = {k: _freeze(self.params.get(k, v)) for k, v in allowed.items()}
        object.__setattr__(self, "params", MappingProxyType(merged))
        object.__setattr__(
            self, "include_probe_hamiltonian", bool(self.include_probe_hamiltonian)
        )

        if kind in (ModelKind.HEISENBERG, ModelKind.XXZ) and L < 2:
            raise ValueError(f"{kind.value} model needs L >= 2")
        if kind is ModelKind.ISING:
            J = merged["couplings"]
            if isinstance(J, tuple) and len(J) != L - 1:
                raise ValueError(f"expected {L - 1} couplings for L={L}, got {len(J)}")
        if kind is ModelKind.HEISENBERG:
            if merged["h"] < 0:
                raise ValueError("field bound h must be nonnegative")
            fields = merged["fields"]
            if fields is not None and len(fields) != L:
                raise ValueError(f"expected {L} fields for L={L}, got {len(fields)}")

    # constructors -------------------------------------------------------

    @classmethod
    def ising(cls, L, h_x=1.0, h_z=0.5, couplings=1.0, include_probe_hamiltonian=True):
        return cls(ModelKind.ISING, L, {"h_x": h_x, "h_z": h_z, "couplings": couplings},
                   include_probe_hamiltonian)

    @classmethod
    def tilted(cls, L, B=2.0, theta=0.0, J=2.0, include_probe_hamiltonian=True):
        return cls(ModelKind.TILTED, L, {"B": B, "theta": theta, "J": J},
                   include_probe_hamiltonian)

    @classmethod
    def heisenberg(cls, L, h=0.0, fields=None, include_probe_hamiltonian=True):
        return cls(ModelKind.HEISENBERG, L, {"h": h, "fields": fields},
                   include_probe_hamiltonian)

    @classmethod
    def xxz(cls, L, mu=0.1, lam=0.0, include_probe_hamiltonian=True):
        return cls(ModelKind.XXZ, L, {"mu": mu, "lam": lam}, include_probe_hamiltonian)

    # derived views ------------------------------------------------------

    def __getitem__(self, name):
        return self.params[name]

    def with_params(self, **changes):
        """Copy with some parameters replaced (``L`` and the probe flag too)."""
        base = dict(self.params)
        L = changes.pop("L", self.L)
        probe = changes.pop("include_probe_hamiltonian", self.include_probe_hamiltonian)
        base.update(changes)
        return replace(self, L=L, params=base, include_probe_hamiltonian=probe)

    @property
    def couplings(self):
        """Ising bond strengths J_1..J_{L-1} as an array."""
        if self.kind is not ModelKind.ISING:
            raise AttributeError("couplings are defined for the ising model only")
        J = self.params["couplings"]
        if isinstance(J, tuple):
            return np.array(J)
        return np.full(self.L - 1, J)

    @property
    def uniform_couplings(self):
        return self.kind is not ModelKind.ISING or self.L < 2 or np.ptp(self.couplings) == 0.0

    @property
    def is_stochastic(self):
        """True when a disorder realization must be drawn before building H."""
        return self.kind is ModelKind.HEISENBERG and self.params["fields"] is None

    @property
    def spin_convention(self):
        return "pauli" if self.kind is ModelKind.ISING else "half"

    def realize(self, rng):
        """Return a copy with random fields drawn if this model is stochastic."""
        if not self.is_stochastic:
            return self
        fields = sample_random_fields(self.L, self.params["h"], rng)
        return self.with_params(fields=fields)

    def to_dict(self):
        params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()}
        return {"kind": self.kind.value, "L": self.L, **params,
                "include_probe_hamiltonian": self.include_probe_hamiltonian}


def site_operator(axis, site, L, spin_convention="pauli"):
    """Dense ``I x ... x sigma^axis x ... x I`` with the factor at 1-based ``site``."""
    if axis not in PAULI:
        raise ValueError(f"axis must be one of 'x', 'y', 'z', got {axis!r}")
    if not 1 <= site <= L:
        raise ValueError(f"site {site} out of range 1..{L}")
    op = PAULI[axis]
    if spin_convention == "half":
        op = op / 2
    elif spin_convention != "pauli":
        raise ValueError(f"unknown spin convention {spin_convention!r}")
    left = np.eye(2 ** (site - 1))
    right = np.eye(2 ** (L - site))
    return np.kron(np.kron(left, op), right)


def pauli_terms(model):
    """Expand ``model`` into ``[(coefficient, ((site, axis), ...)), ...]``.

    Coefficients multiply products of Pauli matrices, so the spin-1/2 factor
    of the non-Ising models is folded in here. Sites are 1-based.
    """
    L, p = model.L, model.params
    terms = []

    def single(coef, axis):
        first = 1 if model.include_probe_hamiltonian else 2
        for k in range(first, L + 1):
            if coef != 0.0:
                terms.append((coef, ((k, axis),)))

    def bond(coef, axis, k, dist=1):
        if coef != 0.0:
            terms.append((coef, ((k, axis), (k + dist, axis))))

    if model.kind is ModelKind.ISING:
        single(p["h_x"], "x")
        single(p["h_z"], "z")
        for k, J in enumerate(model.couplings, start=1):
            bond(-J, "z", k)
    elif model.kind is ModelKind.TILTED:
        single(p["B"] * np.sin(p["theta"]) / 2, "x")
        single(p["B"] * np.cos(p["theta"]) / 2, "z")
        for k in range(1, L):
            bond(p["J"] / 4, "z", k)
    elif model.kind is ModelKind.HEISENBERG:
        if p["fields"] is None:
            raise ValueError("heisenberg model has no field realization; call realize(rng)")
        for k in range(1, L):
            for axis in "xyz":
                bond(0.25, axis, k)
        first = 1 if model.include_probe_hamiltonian else 2
        for k in range(first, L + 1):
            if p["fields"][k - 1] != 0.0:
                terms.append((p["fields"][k - 1] / 2, ((k, "z"),)))
    elif model.kind is ModelKind.XXZ:
        for dist, scale in ((1, 1.0), (2, p["lam"])):
            for k in range(1, L - dist + 1):
                bond(scale * 0.25, "x", k, dist)
                bond(scale * 0.25, "y", k, dist)
                bond(scale * p["mu"] * 0.25, "z", k, dist)
    return terms


def _apply_term(ops, L, states):
    """Images and amplitudes of ``P |b>`` for a Pauli string ``P`` over ``states``."""
    flip = 0
    amp = np.ones(states.shape, dtype=complex)
    for site, axis in ops:
        shift = L - site
        bits = (states >> shift) & 1
        if axis in "xy":
            flip |= 1 << shift
        if axis == "y":
            amp *= np.where(bits == 0, 1j, -1j)
        elif axis == "z":
            amp *= np.where(bits == 0, 1.0, -1.0)
    return states ^ flip, amp


def hamiltonian_from_terms(terms, L, states):
    """Dense matrix of a Pauli-string sum on a closed set of basis states."""
    states = np.asarray(states, dtype=np.int64)
    n = states.size
    H = np.zeros((n, n), dtype=complex)
    cols = np.arange(n)
    leaks = {}
    for coef, ops in terms:
        images, amp = _apply_term(ops, L, states)
        rows = np.minimum(np.searchsorted(states, images), n - 1)
        inside = states[rows] == images
        H[rows[inside], cols[inside]] += coef * amp[inside]
        # single strings may leave the subset while their sum does not (XX + YY)
        for img, c, a in zip(images[~inside], cols[~inside], amp[~inside]):
            leaks[img, c] = leaks.get((img, c), 0.0) + coef * a
    if any(abs(v) > 1e-12 for v in leaks.values()):
        raise ValueError("basis subset is not closed under the Hamiltonian")
    return H


def restricted_hamiltonian(model, states):
    """Dense matrix of ``H`` on the span of the given computational basis states.

    ``states`` must be sorted and closed under the action of ``H`` (e.g. all
    states, or a fixed-magnetization subset for S^z-conserving models).
    """
    return hamiltonian_from_terms(pauli_terms(model), model.L, states)


def environment_terms(model):
    """Terms of ``model`` supported on sites 2..L, relabelled to sites 1..L-1."""
    return [
        (coef, tuple((site - 1, axis) for site, axis in ops))
        for coef, ops in pauli_terms(model)
        if all(site != 1 for site, _ in ops)
    ]


def build_hamiltonian(model, max_dim=DEFAULT_MAX_DIM):
    """Dense ``2^L x 2^L`` Hamiltonian of ``model`` (open boundary conditions)."""
    dim = 2**model.L
    if dim > max_dim:
        raise CapacityError(f"dimension 2^{model.L} = {dim} exceeds cap {max_dim}")
    return restricted_hamiltonian(model, np.arange(dim, dtype=np.int64))


def sample_random_couplings(L, range_, rng):
    """``L - 1`` i.i.d. uniform bond strengths in ``[lo, hi]``."""
    lo, hi = range_
    if lo > hi:
        raise ValueError(f"empty coupling range [{lo}, {hi}]")
    return rng.uniform(lo, hi, size=L - 1)


def sample_random_fields(L, h, rng):
    """``L`` i.i.d. uniform fields in ``[-h, h]``."""
    if h < 0:
        raise ValueError("field bound h must be nonnegative")
    return rng.uniform(-h, h, size=L)
