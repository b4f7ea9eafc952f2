"""Synthetic EDA generator with known driver/tonic/label ground truth.

Risk is encoded as the SCR event rate: High segments fire sudomotor events
faster than Low segments. Serves as the test oracle for the full pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .decompose import DecompParams, bateman_kernel, decompose
from .features import FeatureMatrix, WindowSpec, build_feature_matrix
from .preprocess import FilterParams, preprocess
from .signal_io import LabelInterval, LabelTrack, RawTrace, RiskLabel


@dataclass(frozen=True)
class SynthParams:
    duration_s: float = 1200.0
    fs: float = 4.0
    tonic_base_us: float = 2.0
    drift_amps_us: tuple = (0.2, 0.1)       # amplitudes <= 0.3 uS
    drift_periods_s: tuple = (300.0, 523.0)  # periods >= 200 s
    scr_rate_low_hz: float = 0.02
    scr_rate_high_hz: float = 0.15
    scr_amp_median_us: float = 0.3
    scr_amp_sigma_log: float = 0.5
    noise_sigma_us: float = 0.01
    segment_s: float = 120.0
    seed: int = 0

    def __post_init__(self):
        if not self.scr_rate_high_hz >= self.scr_rate_low_hz >= 0:
            raise ValueError("need scr_rate_high >= scr_rate_low >= 0")
        if max(self.scr_rate_low_hz, self.scr_rate_high_hz) >= self.fs:
            raise ValueError("SCR rates must be below the sampling rate")
        if self.duration_s < 2 * self.segment_s:
            raise ValueError("duration must cover at least two label segments")


@dataclass(frozen=True)
class SynthTruth:
    trace: RawTrace
    driver_truth: np.ndarray
    tonic_truth: np.ndarray
    noise: np.ndarray
    track: LabelTrack

    def phasic_truth(self, decomp_params: DecompParams = DecompParams()) -> np.ndarray:
        kern = bateman_kernel(decomp_params, self.trace.fs, 10.0 * decomp_params.tau0_s)
        return np.convolve(self.driver_truth, kern)[: len(self.driver_truth)]


def _segments(params: SynthParams):
    """Alternating (start_s, end_s, label) segments, Low first."""
    out = []
    k = 0
    while k * params.segment_s < params.duration_s:
        start = k * params.segment_s
        end = min(start + params.segment_s, params.duration_s)
        out.append((start, end, RiskLabel.LOW if k % 2 == 0 else RiskLabel.HIGH))
        k += 1
    return out


def synth_trace(params: SynthParams = SynthParams(),
                decomp_params: DecompParams = DecompParams()) -> SynthTruth:
    """Generate one trace: tonic + Bateman-convolved Poisson driver + noise."""
    rng = np.random.default_rng(params.seed)
    n = int(round(params.duration_s * params.fs))
    t = np.arange(n) / params.fs

    tonic = np.full(n, params.tonic_base_us)
    for amp, period in zip(params.drift_amps_us, params.drift_periods_s):
        tonic = tonic + amp * np.sin(2 * np.pi * t / period + rng.uniform(0, 2 * np.pi))

    driver = np.zeros(n)
    mu_log = np.log(params.scr_amp_median_us)
    for start, end, label in _segments(params):
        rate = params.scr_rate_high_hz if label is RiskLabel.HIGH else params.scr_rate_low_hz
        count = rng.poisson(rate * (end - start))
        times = rng.uniform(start, end, size=count)
        amps = rng.lognormal(mu_log, params.scr_amp_sigma_log, size=count)
        for ti, ai in zip(times, amps):
            idx = min(int(round(ti * params.fs)), n - 1)
            driver[idx] += ai

    kern = bateman_kernel(decomp_params, params.fs, 10.0 * decomp_params.tau0_s)
    phasic = np.convolve(driver, kern)[:n]
    noise = rng.normal(0.0, params.noise_sigma_us, n) if params.noise_sigma_us > 0 else np.zeros(n)

    track = LabelTrack(tuple(LabelInterval(s, e, lab) for s, e, lab in _segments(params)))
    trace = RawTrace(samples=tonic + phasic + noise, fs=params.fs)
    return SynthTruth(trace=trace, driver_truth=driver, tonic_truth=tonic,
                      noise=noise, track=track)


def synth_dataset(params: SynthParams = SynthParams(),
                  filter_params: FilterParams = FilterParams(),
                  decomp_params: DecompParams = DecompParams(),
                  window_spec: WindowSpec = WindowSpec(),
                  backend: Optional[str] = None) -> FeatureMatrix:
    """Full pipeline on a synthetic trace, labeled by the ground-truth track."""
    truth = synth_trace(params, decomp_params)
    clean = preprocess(truth.trace, filter_params)
    dec = decompose(clean, decomp_params, backend=backend)
    return build_feature_matrix(dec, truth.track, window_spec)
