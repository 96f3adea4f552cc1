"""Identity-plus-SU(d) operator basis.

Indices follow the 1-based convention used in the physics literature:
``elementary(d, k, j)`` has its unit entry at row ``k``, column ``j``
(storage position ``[k-1, j-1]``). The generator slot map is

    lambda[(j-1)**2 + 2*(k-1)] = theta(k, j)     1 <= k < j <= d
    lambda[(j-1)**2 + 2*k - 1] = beta(k, j)
    lambda[j**2 - 1]           = eta(j-1)        2 <= j <= d

with ``lambda[0]`` the *unscaled* identity, so ``Tr[lambda_0**2] = d`` while
every other slot has ``Tr[lambda_j**2] = 2``.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DimensionTooLarge, IndexOutOfRange, InvalidPair, ValidationError

# largest d**n accepted by tensor_basis; memory grows as (d**n)**4
MAX_TENSOR_DIM = 32


def _check_d(d: int) -> int:
    if int(d) != d or d < 2:
        raise ValidationError(f"dimension d must be an integer >= 2, got {d!r}", field="d")
    return int(d)


def elementary(d: int, k: int, j: int) -> np.ndarray:
    """d×d matrix with a single 1 at (row k, column j), both 1-based."""
    d = _check_d(d)
    if not (1 <= k <= d and 1 <= j <= d):
        raise IndexOutOfRange(f"indices ({k}, {j}) outside 1..{d}", field="k,j")
    e = np.zeros((d, d), dtype=np.complex128)
    e[k - 1, j - 1] = 1.0
    return e


def _check_pair(d, k, j):
    d = _check_d(d)
    if not (1 <= k <= d and 1 <= j <= d):
        raise IndexOutOfRange(f"indices ({k}, {j}) outside 1..{d}", field="k,j")
    if k >= j:
        raise InvalidPair(f"need k < j, got k={k}, j={j}", field="k,j")
    return d


def theta(d: int, k: int, j: int) -> np.ndarray:
    """Symmetric off-diagonal generator ``e^k_j + e^j_k``."""
    d = _check_pair(d, k, j)
    return elementary(d, k, j) + elementary(d, j, k)


def beta(d: int, k: int, j: int) -> np.ndarray:
    """Antisymmetric off-diagonal generator ``-i (e^k_j - e^j_k)``."""
    d = _check_pair(d, k, j)
    return -1j * (elementary(d, k, j) - elementary(d, j, k))


def eta(d: int, r: int) -> np.ndarray:
    """Diagonal generator ``sqrt(2/(r(r+1))) (sum_{i<=r} e^i_i - r e^{r+1}_{r+1})``."""
    d = _check_d(d)
    if not 1 <= r <= d - 1:
        raise IndexOutOfRange(f"r={r} outside 1..{d - 1}", field="r")
    diag = np.zeros(d)
    diag[:r] = 1.0
    diag[r] = -r
    # divide by sqrt(r(r+1)/2), an integer, so eta(3, 2) is bit-identical to diag(1,1,-2)/sqrt(3)
    return (np.diag(diag) / np.sqrt(r * (r + 1) // 2)).astype(np.complex128)


def slot_map(d: int) -> dict[int, tuple[str, int, int]]:
    """Generator slot -> (kind, k, j); eta entries use (r, r)."""
    d = _check_d(d)
    slots = {}
    for j in range(2, d + 1):
        for k in range(1, j):
            slots[(j - 1) ** 2 + 2 * (k - 1)] = ("theta", k, j)
            slots[(j - 1) ** 2 + 2 * k - 1] = ("beta", k, j)
        slots[j * j - 1] = ("eta", j - 1, j - 1)
    return slots


@dataclass(frozen=True, eq=False)
class GeneratorBasis:
    """Ordered operator basis for ``n`` qudits of dimension ``d``.

    ``operators[idx]`` is the tensor product ``lambda_{j1} ⊗ ... ⊗ lambda_{jn}``
    where ``(j1, ..., jn)`` is ``idx`` written in base ``d**2`` (first factor
    most significant). ``norms[idx] = Tr[operators[idx]**2]``.
    """

    d: int
    n: int
    operators: np.ndarray
    norms: np.ndarray = field(repr=False)
    active_slots: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.d**self.n

    def __len__(self) -> int:
        return self.operators.shape[0]

    def __getitem__(self, idx):
        return self.operators[idx]

    def __iter__(self):
        return iter(self.operators)

    def multi_index(self, idx: int) -> tuple[int, ...]:
        return tuple(int(v) for v in np.unravel_index(idx, (self.d**2,) * self.n))

    def bloch_factors(self) -> np.ndarray:
        """``(d/2)**m`` per element, m = number of non-identity factors."""
        return (self.d / 2.0) ** self.active_slots


@lru_cache(maxsize=None)
def _single(d: int) -> np.ndarray:
    ops = np.empty((d * d, d, d), dtype=np.complex128)
    ops[0] = np.eye(d)
    build = {"theta": theta, "beta": beta}
    for slot, (kind, k, j) in slot_map(d).items():
        ops[slot] = eta(d, k) if kind == "eta" else build[kind](d, k, j)
    ops.setflags(write=False)
    return ops


def lambda_basis(d: int) -> GeneratorBasis:
    """Identity plus the ``d**2 - 1`` SU(d) generators, in slot order."""
    return tensor_basis(d, 1)


@lru_cache(maxsize=64)
def _tensor_basis_cached(d: int, n: int) -> GeneratorBasis:
    single = _single(d)
    ops = single
    for _ in range(n - 1):
        # (a⊗b) over all ordered pairs, first factor slowest
        ops = np.einsum("aij,bkl->abikjl", ops, single).reshape(
            ops.shape[0] * single.shape[0], ops.shape[1] * d, ops.shape[2] * d
        )
    ops = np.ascontiguousarray(ops)
    ops.setflags(write=False)
    idx = np.arange(ops.shape[0])
    digits = np.stack(np.unravel_index(idx, (d * d,) * n)) if n > 1 else idx[None, :]
    active = (digits != 0).sum(axis=0)
    norms = (float(d) ** (n - active)) * 2.0**active
    norms.setflags(write=False)
    active.setflags(write=False)
    return GeneratorBasis(d, n, ops, norms, active)


def tensor_basis(d: int, n: int, *, max_dim: int = MAX_TENSOR_DIM) -> GeneratorBasis:
    """All ``d**(2n)`` products ``lambda_{j1} ⊗ ... ⊗ lambda_{jn}``, lexicographic in (j1..jn)."""
    d = _check_d(d)
    if int(n) != n or n < 1:
        raise ValidationError(f"number of parts n must be an integer >= 1, got {n!r}", field="n")
    n = int(n)
    if d**n > max_dim:
        raise DimensionTooLarge(
            f"d**n = {d ** n} exceeds the configured cap {max_dim}", field="n"
        )
    return _tensor_basis_cached(d, n)
