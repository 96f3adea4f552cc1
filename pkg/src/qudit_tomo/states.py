"""Density matrices, generalized Bloch vectors and a catalogue of named states.

Bloch convention: ``rho = d**-n * sum_J r_J Λ_J`` with ``r_0 = 1``. Because
the generators are normalised to ``Tr[λ_j**2] = 2`` rather than ``d``, the
coefficient of an element with ``m`` non-identity factors is

    r_J = (d/2)**m * Tr[rho Λ_J]

which is the raw expectation value for qubits and picks up a 3/2 per factor
for qutrits. Mixing this up with raw expectation values is the most likely
interop bug, hence the explicit helpers.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .errors import NotHermitian, NotNormalized, NotPhysical, UnknownName, ValidationError
from .generators import tensor_basis
from .matrix import (
    TOL_HERM,
    as_matrix,
    dagger,
    hermitian_eigendecomposition,
    matrix_from_json,
    matrix_to_json,
    psd_sqrt,
)

TOL_TRACE = 1e-9
TOL_PSD = 1e-9


def _infer_parts(dim: int, d: int | None, n: int | None) -> tuple[int, int]:
    if d is None and n is None:
        return dim, 1
    if d is None:
        d = round(dim ** (1.0 / n))
    if n is None:
        n = round(np.log(dim) / np.log(d))
    if d**n != dim:
        raise ValidationError(f"matrix dimension {dim} is not d**n = {d}**{n}", field="d")
    return int(d), int(n)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace matrix on ``n`` qudits of dimension ``d``.

    Positivity is *not* required: linear inversion can legitimately return a
    matrix with small negative eigenvalues. Use :attr:`is_physical`.
    """

    matrix: np.ndarray
    d: int
    n: int = 1

    def __post_init__(self):
        m = as_matrix(self.matrix, name="rho")
        if m.shape[0] != m.shape[1] or m.shape[0] != self.d**self.n:
            raise ValidationError(
                f"rho has shape {m.shape}, expected {self.d ** self.n}x{self.d ** self.n}",
                field="matrix",
            )
        if float(np.max(np.abs(m - dagger(m)))) > TOL_HERM:
            raise NotHermitian("rho is not Hermitian", field="matrix")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TOL_TRACE:
            raise NotNormalized(f"trace of rho is {tr:.12g}, expected 1", field="matrix")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_matrix(cls, m, d: int | None = None, n: int | None = None) -> "DensityMatrix":
        m = as_matrix(m, name="rho")
        d, n = _infer_parts(m.shape[0], d, n)
        return cls(m, d, n)

    @property
    def dim(self) -> int:
        return self.d**self.n

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return hermitian_eigendecomposition(self.matrix)[0]

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[-1])

    def is_physical(self, tol: float = TOL_PSD) -> bool:
        return self.min_eigenvalue >= -tol

    def to_json(self) -> dict:
        return {"d": self.d, "n": self.n, "matrix": matrix_to_json(self.matrix)}

    @classmethod
    def from_json(cls, obj) -> "DensityMatrix":
        if not isinstance(obj, dict):
            raise ValidationError("state file must hold a JSON object", field="state")
        for key in ("d", "n", "matrix"):
            if key not in obj:
                raise ValidationError(f"state file is missing '{key}'", field=key)
        return cls(matrix_from_json(obj["matrix"]), int(obj["d"]), int(obj["n"]))


@dataclass(frozen=True, eq=False)
class BlochVector:
    d: int
    n: int
    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=np.float64).copy()
        if r.shape != (self.d ** (2 * self.n),):
            raise ValidationError(
                f"Bloch vector must have length {self.d ** (2 * self.n)}, got {r.shape}", field="r"
            )
        if abs(r[0] - 1.0) > TOL_TRACE:
            raise NotNormalized(f"r[0] must be 1, got {r[0]!r}", field="r")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    def length_squared(self) -> float:
        return float(np.sum(self.r[1:] ** 2))


def from_bloch(b: BlochVector) -> DensityMatrix:
    basis = tensor_basis(b.d, b.n)
    rho = np.tensordot(b.r, basis.operators, axes=1) / basis.dim
    return DensityMatrix(rho, b.d, b.n)


def expectation_values(rho: DensityMatrix) -> np.ndarray:
    """``Tr[rho Λ_J]`` for every basis element."""
    basis = tensor_basis(rho.d, rho.n)
    return kernels.born_probabilities(np.ascontiguousarray(rho.matrix), basis.operators)


def to_bloch(rho: DensityMatrix) -> BlochVector:
    tr = np.trace(rho.matrix).real
    if abs(tr - 1.0) > TOL_TRACE:
        raise NotNormalized(f"trace of rho is {tr:.12g}")
    basis = tensor_basis(rho.d, rho.n)
    r = basis.bloch_factors() * expectation_values(rho)
    r[0] = 1.0
    return BlochVector(rho.d, rho.n, r)


def purity(rho: DensityMatrix) -> float:
    m = rho.matrix
    return float(np.sum(np.abs(m) ** 2))


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    if rho.dim != sigma.dim:
        raise ValidationError(f"dimension mismatch: {rho.dim} vs {sigma.dim}", field="sigma")
    for name, s in (("rho", rho), ("sigma", sigma)):
        if not s.is_physical():
            raise NotPhysical(f"{name} has eigenvalue {s.min_eigenvalue:.3g} < 0", field=name)
    root = psd_sqrt(rho.matrix)
    inner = root @ sigma.matrix @ root
    w = hermitian_eigendecomposition(0.5 * (inner + dagger(inner)))[0]
    f = float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)
    return min(f, 1.0)


def pure(ket, d: int | None = None, n: int | None = None) -> DensityMatrix:
    """Projector onto the normalised ``ket``."""
    v = np.asarray(ket, dtype=np.complex128).ravel()
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValidationError("zero ket", field="ket")
    v = v / norm
    return DensityMatrix.from_matrix(np.outer(v, v.conj()), d, n)


# -- catalogue --------------------------------------------------------------
ALPHA = np.exp(2j * np.pi / 3)
_S2 = 1.0 / np.sqrt(2.0)

QUBIT_KETS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_S2, _S2], dtype=complex),
    "L": np.array([_S2, 1j * _S2], dtype=complex),
    "A": np.array([_S2, -_S2], dtype=complex),
    "R": np.array([_S2, -1j * _S2], dtype=complex),
}


def qutrit_fourier_ket(a: int, b: int) -> np.ndarray:
    """``(|0> + alpha**a |1> + alpha**b |2>)/sqrt(3)`` with ``alpha = exp(2 pi i/3)``."""
    return np.array([1, ALPHA**a, ALPHA**b], dtype=complex) / np.sqrt(3.0)


# the seven balanced superpositions available to the three-path interferometer
QUTRIT_SUPERPOSITIONS = ((0, 0), (1, 2), (2, 1), (0, 1), (1, 0), (0, 2), (2, 0))


def named_ket(name: str, d: int) -> np.ndarray:
    if d == 2 and name in QUBIT_KETS:
        return QUBIT_KETS[name]
    if d == 3 and len(name) == 3 and name[0] == "f" and name[1:].isdigit():
        a, b = int(name[1]), int(name[2])
        if (a, b) in QUTRIT_SUPERPOSITIONS:
            return qutrit_fourier_ket(a, b)
    if name.isdigit() and int(name) < d:
        v = np.zeros(d, dtype=complex)
        v[int(name)] = 1.0
        return v
    raise UnknownName(f"unknown state name {name!r} for d={d}", field="name")


def named_state(name: str, d: int, n: int = 1) -> DensityMatrix:
    """Catalogue lookup.

    ``mixed`` (any d, n) and ``max-entangled`` (n=2, ``sum_k |kk>/sqrt(d)``)
    are global; every other name is a single-qudit ket (``H V D L`` for
    qubits, ``0 .. d-1``, ``f00 f12 f21 f01 f10 f02 f20`` for qutrits) and
    ``n > 1`` gives its n-fold tensor power.
    """
    if name == "mixed":
        dim = d**n
        return DensityMatrix(np.eye(dim, dtype=complex) / dim, d, n)
    if name == "max-entangled":
        if n != 2:
            raise UnknownName("max-entangled is defined for n=2 only", field="n")
        v = np.zeros(d * d, dtype=complex)
        v[[k * d + k for k in range(d)]] = 1.0
        return pure(v, d, 2)
    ket = named_ket(name, d)
    full = ket
    for _ in range(n - 1):
        full = np.kron(full, ket)
    return pure(full, d, n)


def random_physical_state(d: int, n: int = 1, seed=None, purity_class: str = "mixed") -> DensityMatrix:
    """Seeded random state: Haar-like pure ket, or normalised Ginibre ``G G†``."""
    rng = np.random.default_rng(seed)
    dim = d**n
    if purity_class == "pure":
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        return pure(v, d, n)
    if purity_class == "mixed":
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        m = g @ dagger(g)
        m = 0.5 * (m + dagger(m))
        return DensityMatrix(m / np.trace(m).real, d, n)
    raise ValidationError(f"purity_class must be 'pure' or 'mixed', got {purity_class!r}", field="purity_class")
