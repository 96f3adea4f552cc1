"""Measurement sets, the A-matrix, Born-rule counts and Poisson simulation."""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .errors import (
    BasisMismatch,
    DegenerateSet,
    DimensionMismatch,
    UnknownName,
    ValidationError,
    WrongCount,
    ZeroOverlap,
)
from .generators import GeneratorBasis, lambda_basis, tensor_basis
from .matrix import TOL_HERM, as_matrix, dagger, matrix_from_json, matrix_to_json
from .states import DensityMatrix, QUTRIT_SUPERPOSITIONS, QUBIT_KETS, qutrit_fourier_ket

KAPPA_MAX = 1e8
TOL_PROJECTOR = 1e-9


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Ordered measurement operators on ``n`` qudits of dimension ``d``.

    Normally rank-one projectors ``|psi><psi|``. With ``projective=False`` the
    operators are arbitrary Hermitian observables whose expectation values
    are taken as directly measured (e.g. the generators themselves); such sets
    have exact counts only and cannot be Poisson-sampled.
    """

    d: int
    n: int
    operators: np.ndarray
    labels: tuple
    projective: bool = True
    name: str | None = None

    def __post_init__(self):
        ops = np.asarray(self.operators, dtype=np.complex128)
        dim = self.d**self.n
        if ops.ndim != 3 or ops.shape[1:] != (dim, dim):
            raise DimensionMismatch(
                f"operators must have shape (m, {dim}, {dim}), got {ops.shape}", field="projectors"
            )
        if len(self.labels) != ops.shape[0]:
            raise ValidationError("one label per operator is required", field="labels")
        herm = np.max(np.abs(ops - np.conj(np.transpose(ops, (0, 2, 1)))), axis=(1, 2))
        bad = np.flatnonzero(herm > TOL_HERM)
        if bad.size:
            raise ValidationError(f"operator {bad[0]} is not Hermitian", field=f"projectors[{bad[0]}]")
        if self.projective:
            for i, op in enumerate(ops):
                w = np.linalg.eigvalsh(op)
                if abs(np.trace(op).real - 1.0) > TOL_PROJECTOR or abs(w[-1] - 1.0) > TOL_PROJECTOR:
                    raise ValidationError(
                        f"operator {i} is not a rank-one projector", field=f"projectors[{i}]"
                    )
        ops = np.ascontiguousarray(ops)
        ops.setflags(write=False)
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    @classmethod
    def from_kets(cls, kets, d: int, n: int = 1, labels=None, name=None) -> "MeasurementSet":
        vs = [np.asarray(k, dtype=np.complex128).ravel() for k in kets]
        vs = [v / np.linalg.norm(v) for v in vs]
        ops = np.stack([np.outer(v, v.conj()) for v in vs])
        if labels is None:
            labels = [str(i) for i in range(len(vs))]
        return cls(d, n, ops, tuple(labels), True, name)

    @property
    def projectors(self) -> np.ndarray:
        return self.operators

    @property
    def dim(self) -> int:
        return self.d**self.n

    def __len__(self) -> int:
        return self.operators.shape[0]

    @cached_property
    def a_matrix(self) -> np.ndarray:
        return build_a_matrix(self, allow_overcomplete=True)

    @cached_property
    def condition_number(self) -> float:
        a = self.a_matrix
        if a.shape[0] < a.shape[1]:
            return float("inf")
        s = np.linalg.svd(a, compute_uv=False)
        return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")

    def is_complete(self, kappa_max: float = KAPPA_MAX) -> bool:
        """A has full column rank and condition number below ``kappa_max``."""
        return len(self) >= self.d ** (2 * self.n) and self.condition_number < kappa_max

    def tensor(self, other: "MeasurementSet") -> "MeasurementSet":
        """Product set ``{mu_i ⊗ nu_j}``, ``i`` slowest."""
        if other.d != self.d:
            raise BasisMismatch("product sets need equal local dimension", field="basis")
        ops = np.einsum("aij,bkl->abikjl", self.operators, other.operators).reshape(
            len(self) * len(other), self.dim * other.dim, self.dim * other.dim
        )
        labels = tuple(f"{a},{b}" for a in self.labels for b in other.labels)
        name = f"product:{self.name}x{other.name}" if self.name and other.name else None
        return MeasurementSet(
            self.d, self.n + other.n, ops, labels, self.projective and other.projective, name
        )

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "d": self.d,
            "n": self.n,
            "labels": list(self.labels),
            "projective": self.projective,
            "projectors": [matrix_to_json(op) for op in self.operators],
        }

    @classmethod
    def from_json(cls, obj) -> "MeasurementSet":
        if not isinstance(obj, dict):
            raise ValidationError("measurement-set file must hold a JSON object", field="basis")
        for key in ("d", "n"):
            if not isinstance(obj.get(key), int):
                raise ValidationError(f"'{key}' must be an integer", field=key)
        d, n = obj["d"], obj["n"]
        if "kets" in obj:
            kets = obj["kets"]
            if not isinstance(kets, list) or not kets:
                raise ValidationError("'kets' must be a non-empty list", field="kets")
            vecs = []
            for i, ket in enumerate(kets):
                try:
                    v = np.array([complex(float(re), float(im)) for re, im in ket])
                except (TypeError, ValueError) as exc:
                    raise ValidationError(
                        f"ket {i} must be a list of [re, im] pairs", field=f"kets[{i}]"
                    ) from exc
                if v.size != d**n or not np.all(np.isfinite(v)) or np.linalg.norm(v) == 0:
                    raise ValidationError(f"ket {i} has wrong length or is zero", field=f"kets[{i}]")
                vecs.append(v)
            labels = obj.get("labels") or [str(i) for i in range(len(vecs))]
            if len(labels) != len(vecs):
                raise ValidationError("one label per ket is required", field="labels")
            return cls.from_kets(vecs, d, n, labels)
        if "projectors" in obj:
            mats = obj["projectors"]
            if not isinstance(mats, list) or not mats:
                raise ValidationError("'projectors' must be a non-empty list", field="projectors")
            ops = np.stack([matrix_from_json(m, field=f"projectors[{i}]") for i, m in enumerate(mats)])
            labels = obj.get("labels") or [str(i) for i in range(len(ops))]
            return cls(d, n, ops, tuple(labels), bool(obj.get("projective", True)))
        raise ValidationError("measurement set needs 'kets' or 'projectors'", field="kets")


@dataclass(frozen=True, eq=False)
class CountRecord:
    """Counts per measurement operator.

    ``scale`` is the counts-per-unit-probability constant, ``None`` when
    unknown. ``variances`` is only filled in by :func:`overlap_scaled_counts`.
    """

    counts: np.ndarray
    scale: float | None = None
    seed: int | None = None
    exact: bool = False
    labels: tuple | None = None
    variances: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.float64).copy()
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ValidationError("counts must be a finite 1-D list", field="counts")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        if self.labels is not None:
            if len(self.labels) != c.size:
                raise ValidationError("one label per count is required", field="labels")
            object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self) -> int:
        return self.counts.size

    def to_json(self) -> dict:
        out = {
            "schema": 1,
            "labels": list(self.labels) if self.labels is not None else [str(i) for i in range(len(self))],
            "counts": [float(c) for c in self.counts],
            "scale": "unknown" if self.scale is None else float(self.scale),
            "seed": self.seed,
            "exact": self.exact,
        }
        if self.variances is not None:
            out["variances"] = [float(v) for v in self.variances]
        return out

    @classmethod
    def from_json(cls, obj) -> "CountRecord":
        if not isinstance(obj, dict):
            raise ValidationError("counts file must hold a JSON object", field="counts")
        if "counts" not in obj or not isinstance(obj["counts"], list):
            raise ValidationError("counts file needs a 'counts' list", field="counts")
        try:
            counts = np.array([float(c) for c in obj["counts"]])
        except (TypeError, ValueError) as exc:
            raise ValidationError("counts must be numbers", field="counts") from exc
        scale = obj.get("scale", "unknown")
        if scale == "unknown" or scale is None:
            scale = None
        elif not isinstance(scale, (int, float)) or scale <= 0:
            raise ValidationError("scale must be a positive number or 'unknown'", field="scale")
        seed = obj.get("seed")
        if seed is not None and not isinstance(seed, int):
            raise ValidationError("seed must be an integer", field="seed")
        variances = obj.get("variances")
        return cls(
            counts,
            None if scale is None else float(scale),
            seed,
            bool(obj.get("exact", False)),
            tuple(obj["labels"]) if obj.get("labels") is not None else None,
            None if variances is None else np.asarray(variances, dtype=float),
        )


# -- A-matrix ------------------------------------------------------------------
def build_a_matrix(
    ms: MeasurementSet, basis: GeneratorBasis | None = None, *, allow_overcomplete: bool = False
) -> np.ndarray:
    """Coefficients ``A[i, j]`` with ``mu_i = sum_j A[i, j] lambda_j``.

    Computed by orthogonal projection, ``A[i, j] = Tr[mu_i lambda_j] / Tr[lambda_j**2]``.
    The result is real because both factors are Hermitian.
    """
    if basis is None:
        basis = tensor_basis(ms.d, ms.n)
    if (basis.d, basis.n) != (ms.d, ms.n):
        raise BasisMismatch(
            f"basis is for d={basis.d}, n={basis.n}; set is d={ms.d}, n={ms.n}", field="basis"
        )
    need = len(basis)
    if len(ms) != need and not (allow_overcomplete and len(ms) > need):
        raise WrongCount(f"need {need} operators for a square A-matrix, got {len(ms)}", field="projectors")
    gram = np.einsum("iab,jba->ij", ms.operators, basis.operators).real
    return gram / basis.norms[None, :]


# -- counts ---------------------------------------------------------------------
def _probabilities(rho: DensityMatrix, ms: MeasurementSet) -> np.ndarray:
    if rho.dim != ms.dim:
        raise DimensionMismatch(f"state dimension {rho.dim} != measurement dimension {ms.dim}", field="state")
    p = kernels.born_probabilities(np.ascontiguousarray(rho.matrix), ms.operators)
    if ms.projective:
        p = np.clip(p, 0.0, None)
    return p


def expected_counts(rho: DensityMatrix, ms: MeasurementSet, scale: float) -> CountRecord:
    """Noiseless counts ``scale * Tr[rho mu_i]``."""
    if not scale > 0:
        raise ValidationError("scale must be positive", field="shots")
    return CountRecord(scale * _probabilities(rho, ms), float(scale), None, True, ms.labels)


def sample_poisson(means, rng) -> np.ndarray:
    """Independent Poisson draws; inversion below mean 30, rounded normal above."""
    means = np.clip(np.asarray(means, dtype=np.float64), 0.0, None)
    u = rng.random(means.shape)
    z = rng.standard_normal(means.shape)
    return kernels.poisson_counts(np.ascontiguousarray(means), u, z)


def simulate_counts(rho: DensityMatrix, ms: MeasurementSet, scale: float, seed) -> CountRecord:
    """Poisson counts with means ``scale * Tr[rho mu_i]``; deterministic given ``seed``."""
    if not ms.projective:
        raise ValidationError(
            "Poisson counts need a projective set; observable sets support exact counts only",
            field="basis",
        )
    means = expected_counts(rho, ms, scale).counts
    counts = sample_poisson(means, np.random.default_rng(seed))
    return CountRecord(counts, float(scale), seed if isinstance(seed, int) else None, False, ms.labels)


def simulate_count_batch(rho: DensityMatrix, ms: MeasurementSet, scale: float, seed, replicates: int) -> np.ndarray:
    """``replicates`` independent count vectors as rows of one array."""
    means = expected_counts(rho, ms, scale).counts
    return sample_poisson(np.broadcast_to(means, (replicates, means.size)).copy(), np.random.default_rng(seed))


# -- non-orthogonal sets ----------------------------------------------------------
def nonorthogonal_kets(theta: float, phi: float) -> list[np.ndarray]:
    return [
        np.array([1, 0], dtype=complex),
        np.array([0, 1], dtype=complex),
        np.array([np.cos(theta), np.sin(theta)], dtype=complex),
        np.array([np.cos(phi), 1j * np.sin(phi)], dtype=complex),
    ]


def nonorthogonal_qubit_set(theta: float, phi: float) -> MeasurementSet:
    """Projectors on ``|0>, |1>, cos θ|0> + sin θ|1>, cos φ|0> + i sin φ|1>``.

    ``|1>`` completes the three tilted directions to a square A-matrix.
    θ = φ = π/4 gives the orthogonal H, V, D, L set.
    """
    for label, ang in (("theta", theta), ("phi", phi)):
        if abs(np.sin(2.0 * ang)) < 1e-12:
            raise DegenerateSet(f"{label}={ang} makes the projector coincide with |0> or |1>", field=label)
    return MeasurementSet.from_kets(
        nonorthogonal_kets(theta, phi),
        2,
        1,
        ("0", "1", "theta+", "phi+"),
        name=f"qubit-nonorth:{theta:g}:{phi:g}",
    )


def overlap_scaled_counts(record: CountRecord, overlaps, seed=None) -> CountRecord:
    """Counts seen through tilted projectors with squared overlaps ``overlaps``.

    Without ``seed`` the counts are scaled deterministically, ``n' = n * o``.
    With ``seed`` each of the ``n`` events survives independently with
    probability ``o`` (binomial thinning), which is what a detector behind the
    tilted projector would record. Either way the error estimate
    ``n / o`` is attached as ``variances``.
    """
    o = np.asarray(overlaps, dtype=np.float64)
    if o.shape != record.counts.shape:
        raise DimensionMismatch("one overlap per count is required", field="overlaps")
    if np.any(o <= 0.0) or np.any(o > 1.0):
        raise ZeroOverlap("squared overlaps must lie in (0, 1]", field="overlaps")
    n = record.counts
    if seed is None:
        scaled = n * o
    else:
        rng = np.random.default_rng(seed)
        scaled = rng.binomial(np.rint(n).astype(np.int64), o).astype(np.float64)
    return CountRecord(
        scaled,
        None if record.scale is None else record.scale,
        record.seed if seed is None else seed,
        record.exact and seed is None,
        record.labels,
        n / o,
    )


# -- closed-form scaling ------------------------------------------------------------
def measurement_budget(d: int, n: int, pure: bool = False) -> int:
    """Independent expectation values needed: ``d**(2n) - 1``, or ``2(d**n - 1)`` for pure states."""
    if d < 2 or n < 1:
        raise ValidationError("need d >= 2 and n >= 1", field="d")
    return 2 * (d**n - 1) if pure else d ** (2 * n) - 1


def optics_scaling(d: int) -> tuple[int, float]:
    """Linear-optics element count ``d**2 + 3d`` and generation probability ``2**-(d-1)``."""
    if d < 2:
        raise ValidationError("need d >= 2", field="d")
    return d * d + 3 * d, 0.5 ** (d - 1)


# -- builtin sets --------------------------------------------------------------------
def qubit_hvdl() -> MeasurementSet:
    return MeasurementSet.from_kets([QUBIT_KETS[k] for k in "HVDL"], 2, 1, tuple("HVDL"), name="qubit-hvdl")


def qubit_pauli6() -> MeasurementSet:
    """All six Pauli eigenstates; overcomplete."""
    return MeasurementSet.from_kets([QUBIT_KETS[k] for k in "HVDARL"], 2, 1, tuple("HVDARL"), name="qubit-pauli6")


def qutrit_paper9() -> MeasurementSet:
    """|0>, |1> and the seven balanced three-path superpositions (alpha = exp(2 pi i/3))."""
    e0 = np.array([1, 0, 0], dtype=complex)
    e1 = np.array([0, 1, 0], dtype=complex)
    kets = [e0, e1] + [qutrit_fourier_ket(a, b) for a, b in QUTRIT_SUPERPOSITIONS]
    labels = ["0", "1"] + [f"f{a}{b}" for a, b in QUTRIT_SUPERPOSITIONS]
    return MeasurementSet.from_kets(kets, 3, 1, labels, name="qutrit-paper9")


def qudit_gellmann(d: int) -> MeasurementSet:
    """The generator basis itself, measured as observables (A = identity)."""
    basis = lambda_basis(d)
    return MeasurementSet(
        d, 1, basis.operators, tuple(f"lambda{j}" for j in range(len(basis))), False, f"qudit-gellmann:{d}"
    )


def qudit_pairs(d: int) -> MeasurementSet:
    """``|k>`` for every level plus ``(|j> + |k>)/√2`` and ``(|j> + i|k>)/√2`` for every pair."""
    kets, labels = [], []
    eye = np.eye(d, dtype=complex)
    for k in range(d):
        kets.append(eye[k])
        labels.append(str(k))
    for j in range(d):
        for k in range(j + 1, d):
            kets.append(eye[j] + eye[k])
            labels.append(f"{j}+{k}")
            kets.append(eye[j] + 1j * eye[k])
            labels.append(f"{j}+i{k}")
    return MeasurementSet.from_kets(kets, d, 1, labels, name=f"qudit-pairs:{d}")


BUILTIN_IDS = ("qubit-hvdl", "qubit-pauli6", "qubit-nonorth:<theta>:<phi>", "qutrit-paper9", "qudit-gellmann:<d>",
               "qudit-pairs:<d>", "product:<id>x<id>")


def builtin_set(ident: str) -> MeasurementSet:
    """Resolve a builtin id (see ``BUILTIN_IDS``)."""
    try:
        if ident.startswith("product:"):
            parts = ident[len("product:"):].split("x")
            if len(parts) != 2:
                raise UnknownName(f"product id must be 'product:<id>x<id>', got {ident!r}", field="basis")
            return builtin_set(parts[0]).tensor(builtin_set(parts[1]))
        if ident == "qubit-hvdl":
            return qubit_hvdl()
        if ident == "qubit-pauli6":
            return qubit_pauli6()
        if ident == "qutrit-paper9":
            return qutrit_paper9()
        head, _, rest = ident.partition(":")
        if head == "qubit-nonorth":
            th, ph = rest.split(":")
            return nonorthogonal_qubit_set(float(th), float(ph))
        if head == "qudit-gellmann":
            return qudit_gellmann(int(rest))
        if head == "qudit-pairs":
            return qudit_pairs(int(rest))
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise UnknownName(f"malformed builtin id {ident!r}: {exc}", field="basis") from exc
    raise UnknownName(f"unknown builtin basis {ident!r}; known: {', '.join(BUILTIN_IDS)}", field="basis")
