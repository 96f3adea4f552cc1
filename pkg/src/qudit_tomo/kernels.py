"""Hot numeric kernels.

Each kernel exists twice: a loop form compiled with numba and a vectorised
numpy form. The public names point at the numba form unless numba is missing
or ``QUDIT_TOMO_DISABLE_NUMBA`` is set (see :mod:`qudit_tomo._accel`). Both
forms take identical arguments and are tested against each other.
"""
import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA, njit

POISSON_NORMAL_THRESHOLD = 30


# -- Born-rule probabilities ------------------------------------------------
def _born_numpy(rho, ops):
    # Tr[rho O_k] = sum_ab rho_ab (O_k)_ba
    return np.einsum("ab,kba->k", rho, ops).real.copy()


def _born_loops(rho, ops):
    m, dim = ops.shape[0], ops.shape[1]
    out = np.empty(m)
    for k in range(m):
        acc = 0.0
        for a in range(dim):
            for b in range(dim):
                z = rho[a, b] * ops[k, b, a]
                acc += z.real
        out[k] = acc
    return out


# -- Poisson sampling -------------------------------------------------------
def _poisson_numpy(means, uniforms, normals):
    means = np.asarray(means, dtype=np.float64)
    out = np.empty(means.shape)
    flat_m, flat_u, flat_z = means.ravel(), uniforms.ravel(), normals.ravel()
    flat_o = out.reshape(-1)

    big = flat_m >= POISSON_NORMAL_THRESHOLD
    flat_o[big] = np.maximum(0.0, np.rint(flat_m[big] + np.sqrt(flat_m[big]) * flat_z[big]))

    small = np.flatnonzero(~big)
    if small.size:
        lam, u = flat_m[small], flat_u[small]
        k = np.zeros(small.size)
        p = np.exp(-lam)
        cdf = p.copy()
        active = u > cdf
        while active.any():
            k[active] += 1.0
            p[active] *= lam[active] / k[active]
            cdf[active] += p[active]
            # the tail mass can underflow before cdf reaches u
            active &= (u > cdf) & (p > 0.0)
        flat_o[small] = k
    return out


def _poisson_loops(means, uniforms, normals):
    flat_m, flat_u, flat_z = means.ravel(), uniforms.ravel(), normals.ravel()
    out = np.empty(flat_m.size)
    for i in range(flat_m.size):
        lam = flat_m[i]
        if lam >= POISSON_NORMAL_THRESHOLD:
            v = np.rint(lam + np.sqrt(lam) * flat_z[i])
            out[i] = v if v > 0.0 else 0.0
        else:
            k = 0.0
            p = np.exp(-lam)
            cdf = p
            u = flat_u[i]
            while u > cdf and p > 0.0:
                k += 1.0
                p *= lam / k
                cdf += p
            out[i] = k
    return out.reshape(means.shape)


# -- diluted R.rho.R maximum likelihood -------------------------------------
def _loglik(p, counts, p_min):
    # measured from the saturated model, so values stay O(len(p)) near a fit
    total_p = 0.0
    total_n = 0.0
    for i in range(p.size):
        total_p += max(p[i], p_min)
        total_n += counts[i]
    scale = total_n / total_p
    acc = 0.0
    for i in range(p.size):
        if counts[i] > 0.0:
            acc += counts[i] * np.log(scale * max(p[i], p_min) / counts[i])
    return acc


def _rrr_loops(projectors, counts, rho0, g_inv, eps0, eps_max, p_min, tol, max_iter):
    dim = rho0.shape[0]
    eye = np.eye(dim, dtype=np.complex128)
    m = projectors.shape[0]
    trace = np.empty(max_iter + 1)
    rho = rho0.copy()
    p = _born_kernel(rho, projectors)
    ll = _loglik_kernel(p, counts, p_min)
    trace[0] = ll
    eps = eps0
    total_n = counts.sum()
    converged = False
    k = 0
    while k < max_iter:
        tp = 0.0
        for i in range(m):
            tp += max(p[i], p_min)
        scale = total_n / tp
        r_op = np.zeros((dim, dim), dtype=np.complex128)
        for i in range(m):
            if counts[i] > 0.0:
                r_op += (counts[i] / (scale * max(p[i], p_min))) * projectors[i]
        t_op = g_inv @ r_op
        t_adj = np.ascontiguousarray(np.conj(t_op).T)
        step = t_op @ rho @ t_adj

        stalled = False
        while True:
            if eps <= 1.0:
                cand = (1.0 - eps) * rho + eps * step
            else:
                # over-relaxed step; a congruence keeps it positive
                m_op = eye + eps * (t_op - eye)
                cand = m_op @ rho @ np.ascontiguousarray(np.conj(m_op).T)
            cand = 0.5 * (cand + np.ascontiguousarray(np.conj(cand).T))
            tr = 0.0
            for a in range(dim):
                tr += cand[a, a].real
            cand = cand / tr
            pc = _born_kernel(cand, projectors)
            lc = _loglik_kernel(pc, counts, p_min)
            if lc >= ll:
                break
            eps *= 0.5
            if eps < 1e-14:
                stalled = True
                break
        if stalled:
            # no ascent left at machine precision
            converged = True
            break
        gain = lc - ll
        rho, p, ll = cand, pc, lc
        k += 1
        trace[k] = ll
        eps = min(eps_max, 2.0 * eps)
        if gain <= tol * max(1.0, abs(ll)):
            converged = True
            break
    return rho, trace[: k + 1].copy(), k, converged


def _loglik_numpy(p, counts, p_min):
    pc = np.maximum(p, p_min)
    scale = counts.sum() / pc.sum()
    hit = counts > 0
    return float(np.sum(counts[hit] * np.log(scale * pc[hit] / counts[hit])))


def loglik_offset(counts):
    """``L - L_kernel``: the saturated-model constant sum(n log n) - sum(n)."""
    counts = np.asarray(counts, dtype=float)
    hit = counts > 0
    return float(np.sum(counts[hit] * np.log(counts[hit])) - counts.sum())


def _rrr_numpy(projectors, counts, rho0, g_inv, eps0, eps_max, p_min, tol, max_iter):
    eye = np.eye(rho0.shape[0])
    trace = []
    rho = rho0.copy()
    p = _born_numpy(rho, projectors)
    ll = _loglik_numpy(p, counts, p_min)
    trace.append(ll)
    eps = eps0
    total_n = counts.sum()
    converged = False
    k = 0
    while k < max_iter:
        pc_old = np.maximum(p, p_min)
        weights = counts / (total_n / pc_old.sum() * pc_old)
        t_op = g_inv @ np.tensordot(weights, projectors, axes=1)
        step = t_op @ rho @ t_op.conj().T
        while True:
            if eps <= 1.0:
                cand = (1.0 - eps) * rho + eps * step
            else:
                m_op = eye + eps * (t_op - eye)
                cand = m_op @ rho @ m_op.conj().T
            cand = 0.5 * (cand + cand.conj().T)
            cand /= np.trace(cand).real
            pc = _born_numpy(cand, projectors)
            lc = _loglik_numpy(pc, counts, p_min)
            if lc >= ll:
                break
            eps *= 0.5
            if eps < 1e-14:
                break
        if eps < 1e-14:
            converged = True
            break
        gain = lc - ll
        rho, p, ll = cand, pc, lc
        k += 1
        trace.append(ll)
        eps = min(eps_max, 2.0 * eps)
        if gain <= tol * max(1.0, abs(ll)):
            converged = True
            break
    return rho, np.array(trace), k, converged


# _rrr_loops resolves these two names as globals at compile time
_born_kernel = _born_loops
_loglik_kernel = _loglik
if HAVE_NUMBA:
    _born_jit = _born_kernel = njit(_born_loops)
    _loglik_jit = _loglik_kernel = njit(_loglik)
    _poisson_jit = njit(_poisson_loops)
    _rrr_jit = njit(_rrr_loops)

if USE_NUMBA:
    born_probabilities = _born_jit
    poisson_counts = _poisson_jit
    _rrr = _rrr_jit
else:
    born_probabilities = _born_numpy
    poisson_counts = _poisson_numpy
    _rrr = _rrr_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"


def rrr_mle(projectors, counts, rho0, g_inv, eps0=1.0, p_min=1e-12, tol=1e-10, max_iter=5000, eps_max=1e4):
    """Run the diluted fixed-point iteration.

    Returns ``(rho, loglik_trace, iterations, converged)`` where
    ``loglik_trace[k]`` is the profile log-likelihood after the k-th accepted
    step (entry 0 is the starting point).

    ``eps`` starts at ``eps0``, halves whenever a step would lower the
    likelihood and doubles after each accepted step, up to ``eps_max``.
    Steps with ``eps > 1`` use ``M rho M^dag`` with ``M = I + eps (T - I)``,
    which agrees with the plain update at ``eps = 1``.

    The iteration stops once a step gains at most ``tol * max(1, |L - L_sat|)``,
    where ``L_sat`` is the saturated-model value (see ``loglik_offset``).
    """
    rho, trace, iters, converged = _rrr(
        np.ascontiguousarray(projectors, dtype=np.complex128),
        np.ascontiguousarray(counts, dtype=np.float64),
        np.ascontiguousarray(rho0, dtype=np.complex128),
        np.ascontiguousarray(g_inv, dtype=np.complex128),
        float(eps0),
        float(eps_max),
        float(p_min),
        float(tol),
        int(max_iter),
    )
    return rho, trace + loglik_offset(counts), iters, converged


def backends():
    """Map kernel name -> {"numpy": fn, "numba": fn} for tests and benchmarks."""
    table = {
        "born_probabilities": {"numpy": _born_numpy},
        "poisson_counts": {"numpy": _poisson_numpy},
        "loglik": {"numpy": _loglik_numpy},
        "rrr": {"numpy": _rrr_numpy},
    }
    if HAVE_NUMBA:
        table["born_probabilities"]["numba"] = _born_jit
        table["poisson_counts"]["numba"] = _poisson_jit
        table["loglik"]["numba"] = _loglik_jit
        table["rrr"]["numba"] = _rrr_jit
    return table
