"""Tolerance-window matching of detections to true change points, and the
recall / precision / F-beta / detection-delay metrics built on it."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

from mocpd.core import SAMPLES_PER_DAY


@dataclass
class Matching:
    pairs: list[tuple[int, int]]
    false_positives: list[int]
    false_negatives: list[int]


def match_detections(truth: Sequence[int], detections: Sequence[int], tolerance: int) -> Matching:
    """Greedy one-to-one matching in time order.

    Each true change point t takes the earliest unmatched detection d with
    t <= d <= t + tolerance. Alarms raised before a change never match it.
    """
    truth = sorted(int(t) for t in truth)
    dets = sorted(int(d) for d in detections)
    used = [False] * len(dets)
    pairs, missed = [], []
    lo = 0
    for t in truth:
        while lo < len(dets) and (used[lo] or dets[lo] < t):
            lo += 1
        j = lo
        while j < len(dets) and used[j]:
            j += 1
        if j < len(dets) and dets[j] <= t + tolerance:
            used[j] = True
            pairs.append((t, dets[j]))
        else:
            missed.append(t)
    false_pos = [d for d, u in zip(dets, used) if not u]
    return Matching(pairs, false_pos, missed)


def f_beta(precision: float, recall: float, beta: float = 2.0) -> float:
    if beta <= 0:
        raise ValueError("beta must be > 0")
    b2 = beta * beta
    denom = b2 * precision + recall
    if denom == 0:
        return 0.0
    return (1 + b2) * precision * recall / denom


def mean_delay(pairs: Sequence[tuple[int, int]]) -> float:
    if not pairs:
        return 0.0
    return sum(abs(d - t) for t, d in pairs) / len(pairs)


@dataclass
class EvalReport:
    tp: int
    fp: int
    fn: int
    recall: float
    precision: float
    f_beta: float
    mean_delay_samples: float
    beta: float
    tolerance: int
    undefined: list[str] = field(default_factory=list)
    per_sequence: list[EvalReport] = field(default_factory=list)
    averaging: str = "micro"

    @property
    def mean_delay_days(self) -> float:
        return self.mean_delay_samples / SAMPLES_PER_DAY

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mean_delay_days"] = self.mean_delay_days
        out["per_sequence"] = [seq.to_dict() for seq in self.per_sequence]
        return out


def report_from_counts(
    tp: int, fp: int, fn: int, delays: Sequence[int], beta: float, tolerance: int
) -> EvalReport:
    undefined = []
    if tp + fn == 0:
        undefined.append("recall")
    if tp + fp == 0:
        undefined.append("precision")
    if not delays:
        undefined.append("mean_delay")
    recall = tp / (tp + fn) if tp + fn else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    return EvalReport(
        tp=tp,
        fp=fp,
        fn=fn,
        recall=recall,
        precision=precision,
        f_beta=f_beta(precision, recall, beta),
        mean_delay_samples=sum(delays) / len(delays) if delays else 0.0,
        beta=beta,
        tolerance=tolerance,
        undefined=undefined,
        averaging="single",
    )


def evaluate_sequence(
    truth: Sequence[int], detections: Sequence[int], tolerance: int, beta: float = 2.0
) -> EvalReport:
    match = match_detections(truth, detections, tolerance)
    delays = [abs(d - t) for t, d in match.pairs]
    return report_from_counts(
        len(match.pairs), len(match.false_positives), len(match.false_negatives),
        delays, beta, tolerance,
    )


def evaluate_corpus(sequences, tolerance: int, beta: float = 2.0) -> EvalReport:
    """Micro-averaged report over ``(truth_cps, detection_indices)`` pairs.

    ``truth_cps`` may also be a LabeledSeries (its ``cps`` are used).
    """
    per_seq = []
    tp = fp = fn = 0
    delays: list[int] = []
    for truth, dets in sequences:
        cps = getattr(truth, "cps", truth)
        match = match_detections(cps, dets, tolerance)
        seq_delays = [abs(d - t) for t, d in match.pairs]
        per_seq.append(report_from_counts(
            len(match.pairs), len(match.false_positives), len(match.false_negatives),
            seq_delays, beta, tolerance,
        ))
        tp += len(match.pairs)
        fp += len(match.false_positives)
        fn += len(match.false_negatives)
        delays.extend(seq_delays)
    report = report_from_counts(tp, fp, fn, delays, beta, tolerance)
    report.per_sequence = per_seq
    report.averaging = "micro"
    return report
