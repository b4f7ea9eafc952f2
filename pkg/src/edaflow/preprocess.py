"""Artifact removal: second-order Butterworth high-pass + centered moving average."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import filtfilt, lfilter, lfilter_zi

from .signal_io import RawTrace


@dataclass(frozen=True)
class FilterParams:
    fc_hz: float = 0.05
    ma_width_s: float = 1.0
    zero_phase: bool = False
    skip_highpass: bool = False

    def __post_init__(self):
        if self.fc_hz <= 0:
            raise ValueError(f"cutoff must be positive, got {self.fc_hz}")
        if self.ma_width_s <= 0:
            raise ValueError(f"moving-average width must be positive, got {self.ma_width_s}")


def design_highpass(fc_hz: float, fs: float):
    """Biquad coefficients (b, a) of a second-order Butterworth high-pass.

    Bilinear transform of s^2 / (s^2 + sqrt(2)*wc*s + wc^2) with cutoff
    prewarping, so the digital -3 dB point lands exactly at fc_hz.
    """
    if not 0 < fc_hz < fs / 2:
        raise ValueError(f"cutoff {fc_hz} Hz must lie in (0, fs/2) for fs={fs} Hz")
    c = math.tan(math.pi * fc_hz / fs)
    s2 = math.sqrt(2.0)
    norm = 1.0 / (1.0 + s2 * c + c * c)
    b = np.array([norm, -2.0 * norm, norm])
    a = np.array([1.0, 2.0 * (c * c - 1.0) * norm, (1.0 - s2 * c + c * c) * norm])
    return b, a


def highpass_magnitude(fc_hz: float, fs: float, f_hz) -> np.ndarray:
    """Closed-form |H(e^{j 2 pi f / fs})| of the designed filter."""
    b, a = design_highpass(fc_hz, fs)
    z = np.exp(-1j * 2.0 * np.pi * np.atleast_1d(np.asarray(f_hz, dtype=float)) / fs)
    num = b[0] + b[1] * z + b[2] * z**2
    den = a[0] + a[1] * z + a[2] * z**2
    return np.abs(num / den)


def highpass_filter(trace: RawTrace, params: FilterParams) -> RawTrace:
    """Single forward pass by default; forward-backward when zero_phase is set."""
    if len(trace.samples) == 0:
        raise ValueError("empty trace")
    b, a = design_highpass(params.fc_hz, trace.fs)
    x = trace.samples
    if params.zero_phase:
        padlen = min(len(x) - 1, 3 * (max(len(a), len(b)) - 1))
        y = filtfilt(b, a, x, padlen=padlen)
    else:
        # start from the constant-input steady state so a DC level produces
        # zero output immediately instead of a long start-up transient
        zi = lfilter_zi(b, a) * x[0]
        y, _ = lfilter(b, a, x, zi=zi)
    return replace(trace, samples=y)


def moving_average(trace: RawTrace, params: FilterParams) -> RawTrace:
    """Centered box average of odd width; the window truncates at the edges."""
    if len(trace.samples) == 0:
        raise ValueError("empty trace")
    w = int(round(params.ma_width_s * trace.fs))
    if w % 2 == 0:
        w += 1
    w = max(w, 1)
    x = trace.samples
    kernel = np.ones(w)
    num = np.convolve(x, kernel, mode="same")
    den = np.convolve(np.ones_like(x), kernel, mode="same")
    return replace(trace, samples=num / den)


def preprocess(trace: RawTrace, params: FilterParams = FilterParams()) -> RawTrace:
    """High-pass (unless skipped) followed by the moving average."""
    out = trace if params.skip_highpass else highpass_filter(trace, params)
    return moving_average(out, params)
