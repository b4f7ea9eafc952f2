"""Sliding-window segmentation and the 11 time/frequency-domain features."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .decompose import DecomposedTrace
from .errors import DataError
from .signal_io import LabelTrack, RiskLabel, label_window, parse_risk_label

FEATURE_NAMES = (
    "edr_std", "edr_median", "edr_integral", "edr_nap", "edr_nrms",
    "edl_mean", "edl_std", "edl_median",
    "bp1", "bp2", "bp3",
)

BANDS = ((0.1, 0.2), (0.2, 0.3), (0.3, 0.4))

_trapezoid = getattr(np, "trapezoid", np.trapz)  # numpy < 2.0 compatibility


@dataclass(frozen=True)
class WindowSpec:
    window_s: float = 10.0
    stride_s: float = 1.0

    def __post_init__(self):
        if not self.window_s > self.stride_s > 0:
            raise ValueError(
                f"need window > stride > 0, got {self.window_s}, {self.stride_s}"
            )


class TimeDomainFeatures(NamedTuple):
    edr_std: float
    edr_median: float
    edr_integral: float
    edr_nap: float
    edr_nrms: float
    edl_mean: float
    edl_std: float
    edl_median: float


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray  # the 11 features, FEATURE_NAMES order
    window_start_s: float
    label: Optional[RiskLabel]


@dataclass(frozen=True)
class FeatureMatrix:
    """Labeled feature rows; values has one column per FEATURE_NAMES entry."""

    values: np.ndarray        # (n_rows, 11)
    labels: np.ndarray        # int array of RiskLabel values
    window_starts: np.ndarray  # seconds

    feature_names = FEATURE_NAMES

    def __len__(self) -> int:
        return len(self.labels)

    def row(self, i: int) -> FeatureVector:
        return FeatureVector(self.values[i], float(self.window_starts[i]),
                             RiskLabel(int(self.labels[i])))

    def subset(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        return FeatureMatrix(self.values[idx], self.labels[idx], self.window_starts[idx])

    def class_counts(self) -> dict:
        return {lab: int(np.sum(self.labels == lab)) for lab in (RiskLabel.LOW, RiskLabel.HIGH)}


def segment_windows(n_samples: int, fs: float, spec: WindowSpec) -> list:
    """Half-open sample ranges of every full window; empty list if too short."""
    win = int(round(spec.window_s * fs))
    step = int(round(spec.stride_s * fs))
    if win <= 0 or step <= 0:
        raise ValueError("window and stride must be at least one sample")
    if n_samples < win:
        return []
    n_win = (n_samples - win) // step + 1
    return [(k * step, k * step + win) for k in range(n_win)]


def time_domain_features(edr_win, edl_win, fs: float) -> TimeDomainFeatures:
    """Eight time-domain features; population std, trapezoidal integral."""
    edr = np.asarray(edr_win, dtype=float)
    edl = np.asarray(edl_win, dtype=float)
    if len(edr) != len(edl) or len(edr) < 2:
        raise ValueError("windows must have equal length >= 2")
    rng = edr.max() - edr.min()
    if rng > 0:
        norm = (edr - edr.min()) / rng
        nap = float(np.mean(norm**2))
    else:
        nap = 0.0
    return TimeDomainFeatures(
        edr_std=float(np.std(edr)),
        edr_median=float(np.median(edr)),
        edr_integral=float(_trapezoid(edr, dx=1.0 / fs)),
        edr_nap=nap,
        edr_nrms=float(np.sqrt(nap)),
        edl_mean=float(np.mean(edl)),
        edl_std=float(np.std(edl)),
        edl_median=float(np.median(edl)),
    )


def band_power(edr_win, fs: float, band) -> float:
    """One-sided periodogram power in [lo, hi), DC and Nyquist excluded."""
    lo, hi = band
    if not (0 < lo < hi <= fs / 2):
        raise ValueError(f"band {band} must lie inside (0, fs/2] with lo < hi")
    x = np.asarray(edr_win, dtype=float)
    n = len(x)
    if n < 2:
        raise ValueError("window too short for a spectrum")
    spec = np.fft.rfft(x - x.mean())
    k = np.arange(len(spec))
    interior = (k > 0) & (k < n / 2)
    power = (2.0 / n**2) * np.abs(spec) ** 2
    freqs = k * fs / n
    sel = interior & (freqs >= lo) & (freqs < hi)
    return float(power[sel].sum())


def feature_row(edr_win, edl_win, fs: float) -> np.ndarray:
    td = time_domain_features(edr_win, edl_win, fs)
    bps = [band_power(edr_win, fs, b) for b in BANDS]
    return np.array(list(td) + bps)


def build_feature_matrix(dec: DecomposedTrace, track: LabelTrack,
                         spec: WindowSpec = WindowSpec(), t0: float = 0.0) -> FeatureMatrix:
    """Compute features per window, attach consensus labels, drop unlabeled windows."""
    rows, labels, starts = [], [], []
    for lo, hi in segment_windows(len(dec), dec.fs, spec):
        start_s = t0 + lo / dec.fs
        end_s = t0 + hi / dec.fs
        lab = label_window(track, start_s, end_s)
        if lab is None:
            continue
        rows.append(feature_row(dec.edr[lo:hi], dec.edl[lo:hi], dec.fs))
        labels.append(int(lab))
        starts.append(start_s)
    values = np.asarray(rows) if rows else np.empty((0, len(FEATURE_NAMES)))
    return FeatureMatrix(values=values, labels=np.asarray(labels, dtype=int),
                         window_starts=np.asarray(starts, dtype=float))


def write_feature_csv(path, fm: FeatureMatrix) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["window_start_s", "label", *FEATURE_NAMES])
        for i in range(len(fm)):
            w.writerow([repr(float(fm.window_starts[i])), str(RiskLabel(int(fm.labels[i])))]
                       + [repr(float(v)) for v in fm.values[i]])


def read_feature_csv(path) -> FeatureMatrix:
    rows, labels, starts = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = {"window_start_s", "label", *FEATURE_NAMES}
        if reader.fieldnames is None or expected - set(reader.fieldnames):
            raise DataError(f"{path}: missing feature columns in header")
        for i, row in enumerate(reader, start=1):
            try:
                starts.append(float(row["window_start_s"]))
                labels.append(int(parse_risk_label(row["label"])))
                rows.append([float(row[name]) for name in FEATURE_NAMES])
            except (TypeError, ValueError):
                raise DataError(f"{path}: malformed row {i}") from None
    values = np.asarray(rows) if rows else np.empty((0, len(FEATURE_NAMES)))
    return FeatureMatrix(values=values, labels=np.asarray(labels, dtype=int),
                         window_starts=np.asarray(starts, dtype=float))
