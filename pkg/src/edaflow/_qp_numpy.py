"""Pure-numpy fallback for the projected coordinate-descent QP kernel.

Same algorithm as the compiled extension (`_qp_core`): cyclic coordinate
minimization of 0.5 x'Hx + f'x with clipping at zero on masked coordinates,
maintaining the gradient g = Hx + f incrementally.
"""

from __future__ import annotations

import numpy as np


def cd_sweeps(H, f, mask, x, tol, max_sweeps):
    """Run up to max_sweeps cyclic sweeps in place on x; return sweeps used.

    Stops early once the largest coordinate step in a sweep falls below
    tol * (1 + max|x|).
    """
    n = len(f)
    diag = np.ascontiguousarray(np.diag(H))
    g = H @ x + f
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_step = 0.0
        for i in range(n):
            hii = diag[i]
            if hii <= 0.0:
                continue
            xi = x[i] - g[i] / hii
            if mask[i] and xi < 0.0:
                xi = 0.0
            d = xi - x[i]
            if d != 0.0:
                x[i] = xi
                g += H[i] * d
                if abs(d) > max_step:
                    max_step = abs(d)
        if max_step <= tol * (1.0 + np.abs(x).max()):
            break
    return sweeps
