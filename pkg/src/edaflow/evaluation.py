"""Undersample -> stratified 80/20 split -> train -> test, repeated and averaged."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import classify
from .errors import DataError
from .features import FeatureMatrix
from .signal_io import RiskLabel

BLOCK_S = 30.0  # contiguous-window block size for the leakage-aware split mode


@dataclass(frozen=True)
class ProtocolParams:
    train_fraction: float = 0.8
    repeats: int = 20
    seed: int = 0
    split_mode: str = "window"  # "window" (classic) or "block" (leakage-aware)

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError(f"train_fraction must be in (0,1), got {self.train_fraction}")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if self.split_mode not in ("window", "block"):
            raise ValueError(f"unknown split_mode {self.split_mode!r}")


@dataclass(frozen=True)
class ConfusionMatrix:
    """High = positive class; rows are predictions, columns truth."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)


@dataclass
class EvalReport:
    matrices: List[ConfusionMatrix]
    pooled: ConfusionMatrix
    accuracies: np.ndarray
    precisions: np.ndarray  # may contain nan where undefined
    recalls: np.ndarray

    @property
    def accuracy_mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def accuracy_std(self) -> float:
        return float(np.std(self.accuracies))

    @property
    def precision_mean(self) -> float:
        return float(np.nanmean(self.precisions))

    @property
    def recall_mean(self) -> float:
        return float(np.nanmean(self.recalls))


def undersample(data: FeatureMatrix, rng_seed: int) -> FeatureMatrix:
    """Sample the majority class down to the minority count, keeping row order."""
    y = data.labels
    idx_hi = np.nonzero(y == int(RiskLabel.HIGH))[0]
    idx_lo = np.nonzero(y == int(RiskLabel.LOW))[0]
    if len(idx_hi) == 0 or len(idx_lo) == 0:
        raise DataError("undersampling requires both classes present")
    rng = np.random.default_rng(rng_seed)
    target = min(len(idx_hi), len(idx_lo))
    keep = []
    for idx in (idx_hi, idx_lo):
        if len(idx) > target:
            idx = rng.choice(idx, size=target, replace=False)
        keep.append(idx)
    kept = np.sort(np.concatenate(keep))
    return data.subset(kept)


def split_train_test(data: FeatureMatrix, params: ProtocolParams, rng_seed: int):
    """Stratified random split; block mode keeps 30 s window runs on one side."""
    rng = np.random.default_rng(rng_seed)
    y = data.labels
    n = len(y)
    if params.split_mode == "block":
        blocks = np.floor(data.window_starts / BLOCK_S).astype(int)
        uniq = np.unique(blocks)
        order = rng.permutation(uniq)
        train_mask = np.zeros(n, dtype=bool)
        assigned = 0
        for b in order:
            in_b = blocks == b
            if assigned < params.train_fraction * n:
                train_mask |= in_b
                assigned += int(in_b.sum())
        train_idx = np.nonzero(train_mask)[0]
        test_idx = np.nonzero(~train_mask)[0]
    else:
        train_parts, test_parts = [], []
        for lab in (int(RiskLabel.LOW), int(RiskLabel.HIGH)):
            idx = np.nonzero(y == lab)[0]
            if len(idx) < 2:
                raise DataError(f"class {RiskLabel(lab)} has fewer than 2 rows")
            perm = rng.permutation(idx)
            n_train = int(np.floor(params.train_fraction * len(idx)))
            train_parts.append(perm[:n_train])
            test_parts.append(perm[n_train:])
        train_idx = np.sort(np.concatenate(train_parts))
        test_idx = np.sort(np.concatenate(test_parts))
    return data.subset(train_idx), data.subset(test_idx)


def confusion_matrix(predicted: Sequence, truth: Sequence) -> ConfusionMatrix:
    pred = np.asarray([int(p) for p in predicted])
    true = np.asarray([int(t) for t in truth])
    if len(pred) != len(true) or len(pred) == 0:
        raise ValueError("predicted and truth must have equal non-zero length")
    hi = int(RiskLabel.HIGH)
    return ConfusionMatrix(
        tp=int(np.sum((pred == hi) & (true == hi))),
        fp=int(np.sum((pred == hi) & (true != hi))),
        fn=int(np.sum((pred != hi) & (true == hi))),
        tn=int(np.sum((pred != hi) & (true != hi))),
    )


def metrics_from_confusion(m: ConfusionMatrix):
    """(accuracy, precision, recall); a metric with zero denominator is None."""
    accuracy = (m.tp + m.tn) / m.total if m.total > 0 else None
    precision = m.tp / (m.tp + m.fp) if (m.tp + m.fp) > 0 else None
    recall = m.tp / (m.tp + m.fn) if (m.tp + m.fn) > 0 else None
    return accuracy, precision, recall


def run_protocol(data: FeatureMatrix, spec: classify.AlgoSpec,
                 params: ProtocolParams = ProtocolParams(),
                 trainer: Optional[Callable] = None,
                 predictor: Optional[Callable] = None) -> EvalReport:
    """Repeat undersample/split/train/test with derived seeds and pool the counts."""
    counts = data.class_counts()
    if min(counts.values()) < 10:
        raise DataError(f"need at least 10 rows per class, got {counts}")
    trainer = trainer or classify.train
    predictor = predictor or classify.predict_batch
    matrices, accs, precs, recs = [], [], [], []
    for i in range(params.repeats):
        seed_i = params.seed + i
        try:
            balanced = undersample(data, seed_i)
            train_set, test_set = split_train_test(balanced, params, seed_i)
            spec_i = classify.AlgoSpec(**{**spec.__dict__, "seed": spec.seed + i})
            model = trainer(train_set, spec_i)
            pred = predictor(model, test_set.values)
            m = confusion_matrix(pred, test_set.labels)
        except Exception as exc:
            raise type(exc)(f"repeat {i}: {exc}") from exc
        matrices.append(m)
        a, p, r = metrics_from_confusion(m)
        accs.append(np.nan if a is None else a)
        precs.append(np.nan if p is None else p)
        recs.append(np.nan if r is None else r)
    pooled = matrices[0]
    for m in matrices[1:]:
        pooled = pooled + m
    return EvalReport(matrices=matrices, pooled=pooled,
                      accuracies=np.asarray(accs), precisions=np.asarray(precs),
                      recalls=np.asarray(recs))


def render_report_text(report: EvalReport, header_lines: Sequence[str] = ()) -> str:
    out = io.StringIO()
    for line in header_lines:
        out.write(f"# {line}\n")
    out.write(f"repeats = {len(report.matrices)}\n")
    out.write(f"accuracy_mean = {report.accuracy_mean:.6f}\n")
    out.write(f"accuracy_std = {report.accuracy_std:.6f}\n")
    out.write(f"precision_mean = {report.precision_mean:.6f}\n")
    out.write(f"recall_mean = {report.recall_mean:.6f}\n")
    out.write(f"pooled = tp={report.pooled.tp} fp={report.pooled.fp} "
              f"fn={report.pooled.fn} tn={report.pooled.tn}\n")
    out.write("repeat,tp,fp,fn,tn,accuracy,precision,recall\n")
    for i, m in enumerate(report.matrices):
        a, p, r = metrics_from_confusion(m)
        fmt = lambda v: "undefined" if v is None else f"{v:.6f}"
        out.write(f"{i},{m.tp},{m.fp},{m.fn},{m.tn},{fmt(a)},{fmt(p)},{fmt(r)}\n")
    return out.getvalue()


def write_report_csv(path, report: EvalReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["repeat", "tp", "fp", "fn", "tn", "accuracy", "precision", "recall"])
        for i, m in enumerate(report.matrices):
            a, p, r = metrics_from_confusion(m)
            w.writerow([i, m.tp, m.fp, m.fn, m.tn]
                       + ["" if v is None else repr(v) for v in (a, p, r)])
