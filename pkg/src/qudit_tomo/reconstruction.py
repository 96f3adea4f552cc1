"""State reconstruction: linear inversion, physical projection, maximum likelihood."""
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import IncompleteSet, NegativeScale, NonConvergence, Singular, ValidationError, WrongCount
from .generators import GeneratorBasis, tensor_basis
from .matrix import dagger, hermitian_eigendecomposition, solve_linear
from .measurement import KAPPA_MAX, CountRecord, MeasurementSet, build_a_matrix
from .states import BlochVector, DensityMatrix, from_bloch

METHODS = ("linear", "projected", "mle")
# weight of I/dim mixed into a rank-deficient starting point
START_MIX = 1e-6


@dataclass(frozen=True, eq=False)
class MLEOptions:
    p_min: float = 1e-12
    tol: float = 1e-10
    max_iter: int = 5000
    eps0: float = 1.0
    # eps_max = 1 disables over-relaxation
    eps_max: float = 1e4
    # raise NonConvergence when max_iter is hit; otherwise just flag it
    strict: bool = True


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    rho_linear: DensityMatrix | None
    rho_physical: DensityMatrix
    method: str
    scale_estimate: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def rho(self) -> DensityMatrix:
        """The state reported for ``method``."""
        if self.method == "linear":
            return self.rho_linear
        return self.rho_physical


def _check_counts(counts: CountRecord, ms: MeasurementSet):
    if len(counts) != len(ms):
        raise WrongCount(f"{len(counts)} counts for {len(ms)} measurement operators", field="counts")


def _invert(counts: CountRecord, ms: MeasurementSet, basis: GeneratorBasis):
    """Scaled expectation values ``N * Tr[rho lambda_J]`` plus the condition number of A."""
    if len(ms) < len(basis):
        raise IncompleteSet(f"{len(ms)} operators cannot determine {len(basis)} coefficients")
    a = build_a_matrix(ms, basis, allow_overcomplete=True)
    n = counts.counts
    if a.shape[0] == a.shape[1]:
        try:
            sol = solve_linear(a, n)
        except Singular as exc:
            raise IncompleteSet(f"A-matrix is singular: {exc}") from exc
        if sol.condition > KAPPA_MAX:
            raise IncompleteSet(f"A-matrix condition number {sol.condition:.3g} exceeds {KAPPA_MAX:g}")
        return sol.x.real, sol.condition
    warnings.warn("overcomplete measurement set: linear inversion uses least squares", stacklevel=3)
    x, _, rank, s = np.linalg.lstsq(a, n, rcond=None)
    if rank < a.shape[1]:
        raise IncompleteSet("overcomplete set does not span the operator space")
    cond = float(s[0] / s[-1])
    if cond > KAPPA_MAX:
        raise IncompleteSet(f"A-matrix condition number {cond:.3g} exceeds {KAPPA_MAX:g}")
    return x, cond


def linear_inversion(counts: CountRecord, ms: MeasurementSet, basis: GeneratorBasis | None = None) -> ReconstructionResult:
    """Invert ``n = N A e`` for the expectation values ``e`` and rebuild rho.

    The unknown count scale ``N`` is read off the identity slot, since
    ``e_0 = Tr[rho] = 1``. The returned ``rho_linear`` may have negative
    eigenvalues; ``rho_physical`` is its projection.
    """
    _check_counts(counts, ms)
    if basis is None:
        basis = tensor_basis(ms.d, ms.n)
    scaled, cond = _invert(counts, ms, basis)
    scale = float(scaled[0])
    if not scale > 0:
        raise NegativeScale(f"identity-slot coefficient {scale:.3g} is not positive")
    r = basis.bloch_factors() * (scaled / scale)
    r[0] = 1.0
    rho_lin = from_bloch(BlochVector(ms.d, ms.n, r))
    rho_phys = project_physical(rho_lin)
    return ReconstructionResult(
        rho_lin,
        rho_phys,
        "linear",
        scale,
        {"condition_number": cond, "min_eigenvalue_linear": rho_lin.min_eigenvalue},
    )


def project_physical(rho: DensityMatrix) -> DensityMatrix:
    """Frobenius-closest unit-trace PSD matrix.

    Eigenvalues are projected onto the probability simplex: walking up from
    the smallest, each eigenvalue that would go negative is zeroed and its
    weight spread evenly over the ones still standing.
    """
    w, v = hermitian_eigendecomposition(rho.matrix)
    lam = _water_fill(w)
    m = (v * lam) @ dagger(v)
    m = 0.5 * (m + dagger(m))
    return DensityMatrix(m / np.trace(m).real, rho.d, rho.n)


def _water_fill(w: np.ndarray) -> np.ndarray:
    """``w`` sorted descending, summing to one."""
    lam = np.zeros_like(w)
    acc = 0.0
    for i in range(w.size - 1, -1, -1):
        if w[i] + acc / (i + 1) < 0.0:
            acc += w[i]
        else:
            lam[: i + 1] = w[: i + 1] + acc / (i + 1)
            break
    return lam


def log_likelihood(rho: DensityMatrix, counts: CountRecord, ms: MeasurementSet, p_min: float = 1e-12) -> float:
    """Poisson log-likelihood with the count scale profiled out."""
    p = kernels.born_probabilities(np.ascontiguousarray(rho.matrix), ms.operators)
    return kernels._loglik_numpy(p, counts.counts, p_min) + kernels.loglik_offset(counts.counts)


def mle_reconstruct(
    counts: CountRecord, ms: MeasurementSet, options: MLEOptions | None = None
) -> ReconstructionResult:
    """Maximum-likelihood state by the diluted fixed-point iteration

        rho <- N[(1 - eps) rho + eps T rho T†],  T = G⁻¹ R(rho),
        R(rho) = sum_i n_i / (N̂ p_i) mu_i,  G = sum_i mu_i,

    with ``N̂ = sum(n) / sum(p)`` the profiled scale. ``T`` is the identity at
    the maximum, so the true state is a fixed point of noiseless data even
    when the projectors do not sum to the identity. ``eps`` is halved until
    the step does not lower the likelihood and doubled after each accepted
    step. Above 1 the step becomes ``M rho M†`` with ``M = I + eps (T - I)``
    (over-relaxation, off with ``eps_max=1``). Near rank-deficient states the
    plain step crawls and would stop far from the maximum.
    """
    options = options or MLEOptions()
    _check_counts(counts, ms)
    if not ms.projective:
        raise ValidationError("maximum likelihood needs a projective measurement set", field="basis")
    if np.any(counts.counts < 0):
        raise ValidationError("counts must be non-negative", field="counts")
    if counts.counts.sum() <= 0:
        raise ValidationError("all counts are zero", field="counts")

    dim = ms.dim
    g = ms.operators.sum(axis=0)
    try:
        g_inv = np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise IncompleteSet("measurement operators do not span the state space") from exc

    lin = None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lin = linear_inversion(counts, ms)
        rho0 = lin.rho_physical.matrix
        # a physical linear estimate from a square set already maximizes L
        optimal = len(ms) == dim * dim and lin.rho_linear.min_eigenvalue >= 0
        if lin.rho_physical.min_eigenvalue < START_MIX / dim and not optimal:
            # the multiplicative update cannot leave a rank-deficient start
            rho0 = (1.0 - START_MIX) * rho0 + START_MIX * np.eye(dim) / dim
    except (IncompleteSet, NegativeScale, WrongCount):
        rho0 = np.eye(dim, dtype=complex) / dim

    rho, trace, iters, converged = kernels.rrr_mle(
        ms.operators, counts.counts, rho0, g_inv, options.eps0, options.p_min, options.tol, options.max_iter,
        options.eps_max,
    )
    rho = 0.5 * (rho + dagger(rho))
    rho_mle = DensityMatrix(rho / np.trace(rho).real, ms.d, ms.n)
    p = kernels.born_probabilities(np.ascontiguousarray(rho_mle.matrix), ms.operators)
    scale = float(counts.counts.sum() / np.maximum(p, options.p_min).sum())
    result = ReconstructionResult(
        None if lin is None else lin.rho_linear,
        rho_mle,
        "mle",
        scale,
        {
            "condition_number": None if lin is None else lin.diagnostics["condition_number"],
            "min_eigenvalue_linear": None if lin is None else lin.rho_linear.min_eigenvalue,
            "iterations": int(iters),
            "log_likelihood": float(trace[-1]),
            "log_likelihood_trace": trace,
            "converged": bool(converged),
            "backend": kernels.BACKEND,
        },
    )
    if not converged and options.strict:
        raise NonConvergence(f"no convergence after {options.max_iter} iterations", result)
    return result


def reconstruct(counts: CountRecord, ms: MeasurementSet, method: str = "projected", options: MLEOptions | None = None):
    """Dispatch on ``method`` in ``linear | projected | mle``."""
    if method == "mle":
        return mle_reconstruct(counts, ms, options)
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}", field="method")
    res = linear_inversion(counts, ms)
    return ReconstructionResult(res.rho_linear, res.rho_physical, method, res.scale_estimate, res.diagnostics)


def error_covariance(counts: CountRecord, ms: MeasurementSet, basis: GeneratorBasis | None = None) -> np.ndarray:
    """First-order covariance of the reconstructed Bloch vector.

    Counts are independent Poisson variables, ``Cov[n] = diag(n)``. That is
    pushed through ``e~ = A⁻¹ n``, the normalisation ``e = e~ / e~_0`` and the
    Bloch factors ``(d/2)**m``. The identity slot has zero variance.
    """
    _check_counts(counts, ms)
    if basis is None:
        basis = tensor_basis(ms.d, ms.n)
    a = build_a_matrix(ms, basis, allow_overcomplete=True)
    if a.shape[0] == a.shape[1]:
        a_inv = np.linalg.inv(a)
    else:
        a_inv = np.linalg.pinv(a)
    scaled, _ = _invert(counts, ms, basis)
    scale = float(scaled[0])
    if not scale > 0:
        raise NegativeScale(f"identity-slot coefficient {scale:.3g} is not positive")
    cov_scaled = (a_inv * counts.counts[None, :]) @ a_inv.T
    e = scaled / scale
    jac = (np.eye(len(e)) - np.outer(e, np.eye(len(e))[0])) / scale
    factors = basis.bloch_factors()
    jac = factors[:, None] * jac
    return jac @ cov_scaled @ jac.T
