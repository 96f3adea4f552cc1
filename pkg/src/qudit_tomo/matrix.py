"""Dense complex-matrix helpers.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``; this
module adds the few checked operations the rest of the package relies on and
the JSON matrix encoding ``{"rows", "cols", "entries": [[re, im], ...]}``.
"""
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceFailure, NotHermitian, Singular, ValidationError

TOL_HERM = 1e-9
TOL_UNIT = 1e-9
TOL_SOLVE = 1e-10
# condition number beyond which a solve is refused outright
COND_SINGULAR = 1e13


def as_matrix(m, *, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D finite complex128 array."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValidationError(f"{name} must be a non-empty 2-D array, got shape {a.shape}", field=name)
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries", field=name)
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(m).T


def is_hermitian(m: np.ndarray, tol: float = TOL_HERM) -> bool:
    return m.shape[0] == m.shape[1] and float(np.max(np.abs(m - dagger(m)))) <= tol


def tensor(a, b) -> np.ndarray:
    """Kronecker product; ``(a⊗b)[i*rb + k, j*cb + l] = a[i, j] * b[k, l]``."""
    return np.kron(as_matrix(a, name="a"), as_matrix(b, name="b"))


def tensor_all(mats) -> np.ndarray:
    mats = list(mats)
    out = as_matrix(mats[0])
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def hermitian_eigendecomposition(m, tol: float = TOL_HERM) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and the matching eigenvector columns.

    Raises NotHermitian when ``max|m - m†| > tol``.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise NotHermitian(f"matrix is not square: {m.shape}", field="matrix")
    dev = float(np.max(np.abs(m - dagger(m))))
    if dev > tol:
        raise NotHermitian(f"max |m - m^dagger| = {dev:.3g} exceeds {tol:g}", field="matrix")
    try:
        w, v = np.linalg.eigh(0.5 * (m + dagger(m)))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceFailure(str(exc)) from exc
    return w[::-1].copy(), v[:, ::-1].copy()


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Square root of a Hermitian matrix with negative eigenvalues clipped to zero."""
    w, v = hermitian_eigendecomposition(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ dagger(v)


class Solution(NamedTuple):
    x: np.ndarray
    condition: float


def solve_linear(a, b) -> Solution:
    """Solve ``a @ x = b``; also reports the 2-norm condition number of ``a``."""
    a = as_matrix(a, name="A")
    if a.shape[0] != a.shape[1]:
        raise ValidationError(f"A must be square, got {a.shape}", field="A")
    b = np.asarray(b, dtype=np.complex128)
    cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond > COND_SINGULAR:
        raise Singular(f"matrix is singular to working precision (condition {cond:.3g})")
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise Singular(str(exc)) from exc
    return Solution(x, cond)


# -- JSON ---------------------------------------------------------------------
def matrix_to_json(m) -> dict:
    m = as_matrix(m)
    flat = m.ravel()
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_json(obj, *, field: str = "matrix") -> np.ndarray:
    if not isinstance(obj, dict):
        raise ValidationError(f"{field}: expected an object with rows/cols/entries", field=field)
    for key in ("rows", "cols", "entries"):
        if key not in obj:
            raise ValidationError(f"{field}: missing '{key}'", field=f"{field}.{key}")
    rows, cols, entries = obj["rows"], obj["cols"], obj["entries"]
    if not (isinstance(rows, int) and isinstance(cols, int) and rows > 0 and cols > 0):
        raise ValidationError(f"{field}: rows/cols must be positive integers", field=f"{field}.rows")
    if not isinstance(entries, list) or len(entries) != rows * cols:
        raise ValidationError(
            f"{field}: expected {rows * cols} entries", field=f"{field}.entries"
        )
    try:
        arr = np.array([complex(float(re), float(im)) for re, im in entries], dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{field}: entries must be [re, im] pairs", field=f"{field}.entries") from exc
    return as_matrix(arr.reshape(rows, cols), name=field)
