"""Streaming change-point detectors.

``MOCPDDetector`` keeps a bounded memory of representative windows with an
adaptive threshold; ``NewmaDetector`` is a memory-free two-EWMA baseline.
Both consume one ``SeriesPoint`` per call and return a ``Detection`` or None.

Detection indices are decision times: the index of the newest sample in
the window that triggered the alarm.
"""

from __future__ import annotations

import enum
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from mocpd.core import Detection, DetectorConfig, Memory, SeriesPoint, Window, validate_config
from mocpd.dissimilarity import Measure, make_measure
from mocpd.memory import centroid, compute_threshold, run_update_phase
from mocpd.preprocess import SsaFilter, SsaParams


class Phase(enum.Enum):
    INITIALISING = "initialising"
    DETECTING = "detecting"
    COLLECTING = "collecting"


class StreamOrderError(ValueError):
    """Raised when a point arrives with an unexpected index."""


class StreamDetector(Protocol):
    detections: list[Detection]
    trace: list[tuple[int, float, float]]
    decision_ns: list[int]

    def step(self, point: SeriesPoint) -> Detection | None: ...


class MOCPDDetector:
    """Memory-based online change-point detector.

    Windows of ``cfg.w`` preprocessed values are formed every ``cfg.r``
    samples (window starts lie on the grid 0, r, 2r, ...). The first
    ``cfg.n`` windows seed the memory; afterwards each window is scored
    against the memory centroid and either buffered or reported as a change.
    A full buffer triggers an update phase; a change empties memory and
    buffer and starts a collection of ``cfg.n`` fresh windows.
    """

    def __init__(self, cfg: DetectorConfig, ssa_params: SsaParams | None = None):
        self.cfg = validate_config(cfg)
        self.rng = np.random.default_rng(cfg.seed)
        self.measure: Measure = make_measure(cfg.measure, cfg.mmd_bandwidth)
        self.ssa = SsaFilter(ssa_params) if cfg.ssa else None

        self.phase = Phase.INITIALISING
        self.memory = Memory()
        self.buffer: list[Window] = []
        self.pending: deque[float] = deque(maxlen=cfg.w)
        self.cursor = 0
        self.detections: list[Detection] = []
        self.trace: list[tuple[int, float, float]] = []
        self.decision_ns: list[int] = []
        self.n_updates = 0

    @property
    def collect_remaining(self) -> int:
        if self.phase is Phase.DETECTING:
            return 0
        return self.cfg.n - len(self.memory)

    def step(self, point: SeriesPoint) -> Detection | None:
        if point.index != self.cursor:
            raise StreamOrderError(f"expected index {self.cursor}, got {point.index}")
        self.cursor += 1
        value = point.value
        if not math.isfinite(value):
            raise ValueError(f"non-finite value at index {point.index}")
        if self.ssa is not None:
            value, _ = self.ssa.filter_point(value)
        self.pending.append(value)

        cfg = self.cfg
        if len(self.pending) < cfg.w:
            return None
        start = point.index - cfg.w + 1
        if start % cfg.r:
            return None
        window = Window(start, np.fromiter(self.pending, dtype=float, count=cfg.w))

        if self.phase is not Phase.DETECTING:
            self._collect(window)
            return None
        return self._detect(window, point.index)

    def _collect(self, window: Window) -> None:
        mem = self.memory
        mem.samples.append(window)
        mem.seen_count += 1
        if len(mem) < self.cfg.n:
            return
        mem.centroid = centroid(mem.samples)
        self.measure.fit_distribution(mem.matrix(), self.rng)
        mem.threshold = compute_threshold(
            mem.samples, mem.centroid, self.measure, self.cfg.alpha, self.cfg.p
        )
        self.phase = Phase.DETECTING

    def _detect(self, window: Window, index: int) -> Detection | None:
        mem = self.memory
        t0 = time.perf_counter_ns()
        score = self.measure.score(window.values, mem.centroid)
        changed = score > mem.threshold
        self.decision_ns.append(time.perf_counter_ns() - t0)
        self.trace.append((index, score, mem.threshold))

        if changed:
            det = Detection(index=index, score=score, threshold_at=mem.threshold, window_start=window.start)
            self.detections.append(det)
            self.memory = Memory()
            self.buffer.clear()
            self.phase = Phase.COLLECTING
            return det

        self.buffer.append(window)
        if len(self.buffer) > self.cfg.b:
            self.memory = run_update_phase(mem, self.buffer, self.cfg, self.measure, self.rng)
            self.buffer.clear()
            self.n_updates += 1
        return None


class NewmaDetector:
    """Two exponentially weighted means with different forgetting factors.

    The statistic ``|z_fast - z_slow|`` is compared with the mean plus ``c``
    standard deviations of its last ``history`` values. After an alarm both
    averages restart from the current value and the history is cleared.
    """

    def __init__(
        self,
        lam_fast: float = 0.2,
        lam_slow: float = 0.02,
        c: float = 4.0,
        history: int = 500,
        min_history: int = 50,
        ssa: bool = False,
        ssa_params: SsaParams | None = None,
    ):
        if not (0 < lam_fast < 1 and 0 < lam_slow < 1):
            raise ValueError("forgetting factors must lie in (0, 1)")
        if lam_fast <= lam_slow:
            raise ValueError("lam_fast must exceed lam_slow")
        self.lam_fast = lam_fast
        self.lam_slow = lam_slow
        self.c = c
        self.min_history = min_history
        self.stats: deque[float] = deque(maxlen=history)
        self.ssa = SsaFilter(ssa_params) if ssa else None
        self.z_fast: float | None = None
        self.z_slow: float | None = None
        self.cursor = 0
        self.detections: list[Detection] = []
        self.trace: list[tuple[int, float, float]] = []
        self.decision_ns: list[int] = []

    @property
    def statistic(self) -> float:
        if self.z_fast is None:
            return 0.0
        return abs(self.z_fast - self.z_slow)

    def update(self, x: float) -> float:
        if self.z_fast is None:
            self.z_fast = self.z_slow = x
        else:
            self.z_fast = (1.0 - self.lam_fast) * self.z_fast + self.lam_fast * x
            self.z_slow = (1.0 - self.lam_slow) * self.z_slow + self.lam_slow * x
        return self.statistic

    def step(self, point: SeriesPoint) -> Detection | None:
        if point.index != self.cursor:
            raise StreamOrderError(f"expected index {self.cursor}, got {point.index}")
        self.cursor += 1
        x = point.value
        if self.ssa is not None:
            x, _ = self.ssa.filter_point(x)

        t0 = time.perf_counter_ns()
        stat = self.update(x)
        det = None
        if len(self.stats) >= self.min_history:
            hist = np.fromiter(self.stats, dtype=float, count=len(self.stats))
            threshold = float(hist.mean() + self.c * hist.std())
            if stat > threshold:
                det = Detection(index=point.index, score=stat, threshold_at=threshold)
            self.decision_ns.append(time.perf_counter_ns() - t0)
            self.trace.append((point.index, stat, threshold))

        if det is None:
            self.stats.append(stat)
        else:
            self.detections.append(det)
            self.z_fast = self.z_slow = x
            self.stats.clear()
        return det


@dataclass
class StreamResult:
    detections: list[Detection] = field(default_factory=list)
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    decision_ns: list[int] = field(default_factory=list)
    step_ns: list[int] = field(default_factory=list)

    @property
    def indices(self) -> list[int]:
        return [d.index for d in self.detections]


def as_points(values: Iterable[float], first_index: int = 0) -> list[SeriesPoint]:
    return [SeriesPoint(first_index + i, float(v)) for i, v in enumerate(values)]


def run_stream(
    cfg: DetectorConfig,
    points: Sequence[SeriesPoint],
    detector: StreamDetector | None = None,
    time_steps: bool = False,
) -> StreamResult:
    """Feed ``points`` through a detector (MOCPD built from ``cfg`` by default)."""
    det = detector if detector is not None else MOCPDDetector(cfg)
    step_ns: list[int] = []
    if time_steps:
        clock = time.perf_counter_ns
        for point in points:
            t0 = clock()
            det.step(point)
            step_ns.append(clock() - t0)
    else:
        for point in points:
            det.step(point)
    return StreamResult(
        detections=list(det.detections),
        trace=list(det.trace),
        decision_ns=list(det.decision_ns),
        step_ns=step_ns,
    )


def detect_values(cfg: DetectorConfig, values: Iterable[float]) -> StreamResult:
    """Convenience wrapper: run MOCPD over a plain array indexed from 0."""
    return run_stream(cfg, as_points(values))
