"""Tonic/phasic decomposition via a convex non-negative QP.

Model: y ~ K q + T c with q >= 0 sparse (driver), K the Bateman-kernel
convolution matrix, and T a cubic B-spline tonic basis plus offset and drift
columns. Solved as min 0.5||Kq + Tc - y||^2 + alpha*sum(q) + 0.5*gamma*||c||^2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import toeplitz

from .errors import DataError
from .qp import solve_nonneg_qp
from .signal_io import RawTrace

# Long traces are solved in overlapping tiles to bound the QP size.
TILE_S = 120.0
OVERLAP_S = 20.0
MARGIN_S = 10.0


@dataclass(frozen=True)
class DecompParams:
    tau0_s: float = 2.0
    tau1_s: float = 0.7
    alpha: float = 8e-4
    gamma: float = 1e-2
    knot_spacing_s: float = 10.0
    qp_tol: float = 1e-8
    qp_max_iter: int = 50000

    def __post_init__(self):
        if not self.tau0_s > self.tau1_s > 0:
            raise ValueError(f"need tau0 > tau1 > 0, got {self.tau0_s}, {self.tau1_s}")
        if self.alpha < 0 or self.gamma < 0:
            raise ValueError("penalty weights must be non-negative")
        if self.knot_spacing_s <= 0:
            raise ValueError("knot spacing must be positive")


@dataclass(frozen=True)
class DecomposedTrace:
    edl: np.ndarray
    edr: np.ndarray
    driver: np.ndarray
    residual: np.ndarray
    fs: float

    def __len__(self) -> int:
        return len(self.edl)


def bateman_kernel(params: DecompParams, fs: float, duration_s: float) -> np.ndarray:
    """Unit-sum difference-of-exponentials SCR impulse response."""
    if fs <= 0:
        raise ValueError(f"fs must be positive, got {fs}")
    n = math.ceil(duration_s * fs)
    if n < 1:
        raise ValueError("kernel duration too short for this sampling rate")
    t = np.arange(n) / fs
    h = np.exp(-t / params.tau0_s) - np.exp(-t / params.tau1_s)
    total = h.sum()
    if total <= 0:
        raise ValueError("degenerate kernel (check tau0 > tau1)")
    return h / total


def tonic_basis(n: int, fs: float, knot_spacing_s: float) -> np.ndarray:
    """Cubic B-spline columns on uniform knots, plus offset and linear drift."""
    t = np.arange(n) / fs
    spacing = knot_spacing_s
    nseg = int(math.ceil(t[-1] / spacing)) + 1 if n > 1 else 1
    knots = spacing * np.arange(-3, nseg + 4)
    spline = BSpline.design_matrix(t, knots, 3).toarray()
    drift = t / t[-1] if n > 1 else np.zeros(n)
    return np.column_stack([np.ones(n), drift, spline])


def build_problem(y: np.ndarray, fs: float, params: DecompParams):
    """Assemble (K, T, H, f, mask) for one solve of the decomposition QP."""
    n = len(y)
    kern_len = min(n, math.ceil(10.0 * params.tau0_s * fs))
    kern = bateman_kernel(params, fs, kern_len / fs)[:kern_len]
    col = np.zeros(n)
    col[:kern_len] = kern
    K = toeplitz(col, np.zeros(n))
    T = tonic_basis(n, fs, params.knot_spacing_s)
    A = np.hstack([K, T])
    H = A.T @ A
    m = T.shape[1]
    H[np.arange(n, n + m), np.arange(n, n + m)] += params.gamma
    f = -(A.T @ y)
    f[:n] += params.alpha
    mask = np.zeros(n + m, dtype=bool)
    mask[:n] = True
    return K, T, H, f, mask


def _solve_tile(y: np.ndarray, fs: float, params: DecompParams, backend: Optional[str]):
    K, T, H, f, mask = build_problem(y, fs, params)
    z = solve_nonneg_qp(H, f, mask, tol=params.qp_tol,
                        max_iter=params.qp_max_iter, backend=backend)
    n = len(y)
    q = z[:n]
    c = z[n:]
    return T @ c, K @ q, q


def decompose(trace: RawTrace, params: DecompParams = DecompParams(),
              backend: Optional[str] = None) -> DecomposedTrace:
    """Split a trace into tonic (edl), phasic (edr), driver, and residual."""
    y = trace.samples
    fs = trace.fs
    n = len(y)
    if n < 2 * params.knot_spacing_s * fs:
        raise DataError(
            f"trace too short to decompose: {n} samples, "
            f"need at least {2 * params.knot_spacing_s * fs:.0f}"
        )
    tile = int(round(TILE_S * fs))
    edl = np.zeros(n)
    edr = np.zeros(n)
    q = np.zeros(n)
    if n <= tile:
        edl[:], edr[:], q[:] = _solve_tile(y, fs, params, backend)
    else:
        stride = int(round((TILE_S - OVERLAP_S) * fs))
        margin = int(round(MARGIN_S * fs))
        starts = list(range(0, n - tile, stride)) + [n - tile]
        for k, s in enumerate(starts):
            tl_edl, tl_edr, tl_q = _solve_tile(y[s:s + tile], fs, params, backend)
            keep_lo = 0 if k == 0 else margin
            keep_hi = tile if k == len(starts) - 1 else tile - margin
            # abut with the previous tile's kept region
            if k > 0:
                keep_lo = max(keep_lo, prev_hi - s)
            edl[s + keep_lo:s + keep_hi] = tl_edl[keep_lo:keep_hi]
            edr[s + keep_lo:s + keep_hi] = tl_edr[keep_lo:keep_hi]
            q[s + keep_lo:s + keep_hi] = tl_q[keep_lo:keep_hi]
            prev_hi = s + keep_hi
    return DecomposedTrace(edl=edl, edr=edr, driver=q, residual=y - edl - edr, fs=fs)


def decomposition_objective(y: np.ndarray, fs: float, params: DecompParams,
                            q: np.ndarray, c: Optional[np.ndarray] = None,
                            edl: Optional[np.ndarray] = None) -> float:
    """Objective value for a candidate (q, tonic); tonic given as coefficients or samples."""
    K, T, _, _, _ = build_problem(y, fs, params)
    tonic = T @ c if c is not None else edl
    r = K @ q + tonic - y
    pen_c = float(c @ c) if c is not None else 0.0
    return float(0.5 * r @ r + params.alpha * q.sum() + 0.5 * params.gamma * pen_c)


def write_decomposed_csv(path, dec: DecomposedTrace, t0: float = 0.0) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "edl", "edr", "driver", "residual"])
        t = t0 + np.arange(len(dec)) / dec.fs
        for row in zip(t, dec.edl, dec.edr, dec.driver, dec.residual):
            w.writerow([repr(float(v)) for v in row])


def read_decomposed_csv(path) -> tuple[DecomposedTrace, float]:
    """Read a decomposition dump; returns the trace and its start time."""
    cols = {"t_s": [], "edl": [], "edr": [], "driver": [], "residual": []}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(cols) - set(reader.fieldnames):
            raise DataError(f"{path}: expected header t_s,edl,edr,driver,residual")
        for i, row in enumerate(reader, start=1):
            try:
                for k in cols:
                    cols[k].append(float(row[k]))
            except (TypeError, ValueError):
                raise DataError(f"{path}: malformed row {i}") from None
    t = np.asarray(cols["t_s"])
    if len(t) < 2:
        raise DataError(f"{path}: too few rows")
    fs = 1.0 / np.median(np.diff(t))
    dec = DecomposedTrace(
        edl=np.asarray(cols["edl"]), edr=np.asarray(cols["edr"]),
        driver=np.asarray(cols["driver"]), residual=np.asarray(cols["residual"]), fs=fs,
    )
    return dec, float(t[0])
