"""Trace and label-file parsing, annotator consensus, and window labeling.

Trace CSV format: header ``t_s,eda_uS``, UTF-8, ``.`` decimal separator.
Label CSV format: header ``start_s,end_s,label`` with lowercase ``low``/``high``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional, Sequence

import numpy as np

from .errors import DataError

# Relative tolerance on sample spacing uniformity.
SPACING_RTOL = 1e-4


class RiskLabel(IntEnum):
    LOW = 0
    HIGH = 1

    def __str__(self) -> str:
        return self.name.lower()


def parse_risk_label(text: str) -> RiskLabel:
    t = text.strip().lower()
    if t == "low":
        return RiskLabel.LOW
    if t == "high":
        return RiskLabel.HIGH
    raise DataError(f"malformed label {text!r} (expected 'low' or 'high')")


@dataclass(frozen=True)
class RawTrace:
    """Uniformly sampled EDA signal in microsiemens."""

    samples: np.ndarray
    fs: float
    t0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if self.fs <= 0:
            raise ValueError(f"sampling rate must be positive, got {self.fs}")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.fs

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.samples)) / self.fs


@dataclass(frozen=True)
class LabelInterval:
    start_s: float
    end_s: float
    label: RiskLabel

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise DataError(
                f"interval start must precede end, got [{self.start_s}, {self.end_s}]"
            )


@dataclass(frozen=True)
class LabelTrack:
    """Sorted, non-overlapping label intervals; gaps are unlabeled time."""

    intervals: tuple = field(default_factory=tuple)

    def __post_init__(self):
        iv = tuple(self.intervals)
        for a, b in zip(iv, iv[1:]):
            if b.start_s < a.end_s:
                raise DataError(
                    f"overlapping intervals at {b.start_s} s (previous ends {a.end_s} s)"
                )
        object.__setattr__(self, "intervals", iv)

    @property
    def total_labeled_s(self) -> float:
        return sum(iv.end_s - iv.start_s for iv in self.intervals)


def parse_trace(path, fs_override: Optional[float] = None) -> RawTrace:
    """Read a trace CSV; infer fs from the median sample spacing unless overridden.

    Rows are numbered from 1 over data rows (the header is row 0).
    """
    t, v = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        if [h.strip() for h in header[:2]] != ["t_s", "eda_uS"]:
            raise DataError(f"{path}: expected header 't_s,eda_uS', got {header}")
        for i, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                ti, vi = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                raise DataError(f"{path}: malformed row {i}: {row}") from None
            if not math.isfinite(ti) or not math.isfinite(vi):
                raise DataError(f"{path}: non-finite value at row {i}")
            t.append(ti)
            v.append(vi)
    if not t:
        raise DataError(f"{path}: no data rows")
    t = np.asarray(t)
    if len(t) > 1:
        dt = np.diff(t)
        bad = np.nonzero(dt <= 0)[0]
        if bad.size:
            raise DataError(f"{path}: non-monotonic timestamps at row {bad[0] + 2}")
        # Lower median so one outlier spacing cannot shift the reference.
        ref = np.sort(dt)[(len(dt) - 1) // 2]
        off = np.nonzero(np.abs(dt - ref) > SPACING_RTOL * ref)[0]
        if off.size:
            raise DataError(f"{path}: non-uniform spacing at row {off[0] + 2}")
        fs = fs_override if fs_override is not None else 1.0 / ref
    else:
        if fs_override is None:
            raise DataError(f"{path}: cannot infer fs from a single row")
        fs = fs_override
    return RawTrace(samples=np.asarray(v), fs=fs, t0=float(t[0]))


def parse_label_file(path) -> LabelTrack:
    """Read one annotator's label CSV into a track."""
    intervals = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        if [h.strip() for h in header[:3]] != ["start_s", "end_s", "label"]:
            raise DataError(f"{path}: expected header 'start_s,end_s,label', got {header}")
        for i, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                s, e = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                raise DataError(f"{path}: malformed row {i}: {row}") from None
            if not (s < e):
                raise DataError(f"{path}: start >= end at row {i}")
            intervals.append(LabelInterval(s, e, parse_risk_label(row[2])))
    intervals.sort(key=lambda iv: iv.start_s)
    try:
        return LabelTrack(tuple(intervals))
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def _label_at(track: LabelTrack, t: float) -> Optional[RiskLabel]:
    for iv in track.intervals:
        if iv.start_s <= t < iv.end_s:
            return iv.label
    return None


def consensus_track(a: LabelTrack, b: LabelTrack) -> LabelTrack:
    """Keep only time where both tracks assign the same label; merge abutting pieces.

    Disagreement and singly-labeled time are dropped (excluded from analysis).
    """
    bounds = sorted(
        {x for iv in a.intervals for x in (iv.start_s, iv.end_s)}
        | {x for iv in b.intervals for x in (iv.start_s, iv.end_s)}
    )
    pieces = []
    for lo, hi in zip(bounds, bounds[1:]):
        la = _label_at(a, lo)
        lb = _label_at(b, lo)
        if la is not None and la is lb:
            if pieces and pieces[-1][1] == lo and pieces[-1][2] is la:
                pieces[-1] = (pieces[-1][0], hi, la)
            else:
                pieces.append((lo, hi, la))
    return LabelTrack(tuple(LabelInterval(s, e, l) for s, e, l in pieces))


def parse_label_track(path_a, path_b) -> LabelTrack:
    """Parse two annotators' files and return their consensus track."""
    return consensus_track(parse_label_file(path_a), parse_label_file(path_b))


def label_window(track: LabelTrack, start_s: float, end_s: float) -> Optional[RiskLabel]:
    """Label of [start_s, end_s) iff it lies entirely inside one labeled interval."""
    if not start_s < end_s:
        raise ValueError(f"window start must precede end, got [{start_s}, {end_s})")
    for iv in track.intervals:
        if iv.start_s <= start_s and end_s <= iv.end_s:
            return iv.label
    return None


def write_trace_csv(path, trace: RawTrace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "eda_uS"])
        for t, v in zip(trace.times(), trace.samples):
            w.writerow([repr(float(t)), repr(float(v))])


def write_label_csv(path, track: LabelTrack) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["start_s", "end_s", "label"])
        for iv in track.intervals:
            w.writerow([repr(float(iv.start_s)), repr(float(iv.end_s)), str(iv.label)])
