"""Non-negative quadratic programming: min 0.5 x'Hx + f'x s.t. x_i >= 0 on masked coords.

Two-phase solver: a cyclic projected coordinate-descent pass (compiled Cython
kernel when available, numpy fallback otherwise) locates the active set, then
an active-set polish solves the free subsystem exactly until the KKT
conditions hold at the requested tolerance.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import _qp_numpy
from .errors import SolverError

try:
    from . import _qp_core

    HAVE_COMPILED = True
except ImportError:  # extension not built; pure-Python path
    _qp_core = None
    HAVE_COMPILED = False

DEFAULT_BACKEND = "compiled" if HAVE_COMPILED else "python"


def _get_kernel(backend: Optional[str]):
    if backend is None:
        backend = DEFAULT_BACKEND
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise SolverError("compiled QP kernel requested but the extension is not built")
        return _qp_core.cd_sweeps
    if backend == "python":
        return _qp_numpy.cd_sweeps
    raise ValueError(f"unknown backend {backend!r} (expected 'compiled' or 'python')")


def kkt_violation(H, f, mask, x, tol):
    """Worst KKT violation, in units of the per-coordinate tolerance.

    Free coordinates need |g_i| <= tol*(1+|f_i|); masked coordinates need
    x_i >= 0, g_i >= -tol at the bound, and stationarity once clearly interior.
    """
    g = H @ x + f
    scale = tol * (1.0 + np.abs(f))
    worst = 0.0
    for i in range(len(f)):
        if mask[i]:
            if x[i] < 0:
                worst = max(worst, -x[i] / tol)
            if x[i] > tol:
                worst = max(worst, abs(g[i]) / scale[i])
            else:
                worst = max(worst, max(0.0, -g[i]) / tol)
        else:
            worst = max(worst, abs(g[i]) / scale[i])
    return worst


def _check_psd(H):
    n = H.shape[0]
    scale = max(np.abs(np.diag(H)).max(), 1.0)
    try:
        np.linalg.cholesky(H + (1e-10 * scale) * np.eye(n))
    except np.linalg.LinAlgError:
        raise SolverError("negative curvature detected: H is not positive semidefinite") from None


def _solve_free(H, f, free):
    n = len(f)
    xs = np.zeros(n)
    idx = np.nonzero(free)[0]
    if idx.size:
        Hff = H[np.ix_(idx, idx)]
        try:
            xs[idx] = np.linalg.solve(Hff, -f[idx])
        except np.linalg.LinAlgError:
            xs[idx] = np.linalg.lstsq(Hff, -f[idx], rcond=None)[0]
    return xs


def _polish(H, f, mask, x, tol, max_rounds=500):
    """Lawson-Hanson style active-set refinement around the descent iterate.

    Inner loop: solve on the free set, step to the feasible boundary and drop
    coordinates that hit zero. Outer loop: free the worst dual violator.
    """
    n = len(f)
    free = (~mask) | (x > 0)
    for _ in range(max_rounds):
        for _ in range(n + 1):
            xs = _solve_free(H, f, free)
            neg = free & mask & (xs < 0)
            if not neg.any():
                x = xs
                break
            steps = np.full(n, np.inf)
            steps[neg] = x[neg] / (x[neg] - xs[neg])
            j = int(np.argmin(steps))
            t = float(np.clip(steps[j], 0.0, 1.0))
            x = x + t * (xs - x)
            hit = free & mask & (x <= 1e-12 * (1.0 + np.abs(x).max()))
            hit[j] = True
            x[hit] = 0.0
            free &= ~hit
        g = H @ x + f
        viol = np.where(mask & ~free, -g, 0.0)
        if viol.max(initial=0.0) <= tol:
            break
        free[int(np.argmax(viol))] = True
    return x


def solve_nonneg_qp(H, f, nonneg_mask=None, tol: float = 1e-8,
                    max_iter: int = 50000, backend: Optional[str] = None) -> np.ndarray:
    """Solve the bound-constrained QP; raises SolverError if KKT cannot be met.

    nonneg_mask marks the coordinates constrained to be non-negative
    (default: all of them). max_iter caps the total number of coordinate
    updates in the descent phase.
    """
    H = np.ascontiguousarray(H, dtype=float)
    f = np.ascontiguousarray(f, dtype=float)
    n = len(f)
    if H.shape != (n, n):
        raise ValueError(f"dimension mismatch: H is {H.shape}, f has length {n}")
    if not np.allclose(H, H.T, rtol=1e-8, atol=1e-12 * max(1.0, np.abs(H).max())):
        raise ValueError("H must be symmetric")
    if nonneg_mask is None:
        mask = np.ones(n, dtype=bool)
    else:
        mask = np.asarray(nonneg_mask, dtype=bool)
        if mask.shape != (n,):
            raise ValueError("nonneg_mask length must match f")
    _check_psd(H)

    kernel = _get_kernel(backend)
    x = np.zeros(n)
    max_sweeps = max(1, int(max_iter) // max(n, 1))
    kernel(H, f, mask.astype(np.uint8), x, tol, max_sweeps)
    x = _polish(H, f, mask, x, tol)

    worst = kkt_violation(H, f, mask, x, tol)
    if worst > 1.0:
        raise SolverError(
            f"QP solver stopped without reaching tolerance {tol:g} "
            f"(worst scaled KKT residual {worst:.3g}x tolerance)"
        )
    return x


def qp_objective(H, f, x) -> float:
    return float(0.5 * x @ (H @ x) + f @ x)
