"""Memory lifecycle: centroid, adaptive threshold and resampling schemes."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from mocpd.core import DetectorConfig, Memory, Window

ScoreFn = Callable[[np.ndarray, np.ndarray], float]


def centroid(samples: Sequence[Window]) -> np.ndarray:
    """Element-wise mean of the windows."""
    if len(samples) == 0:
        raise ValueError("centroid of an empty memory")
    stacked = np.stack([np.asarray(getattr(s, "values", s), dtype=float) for s in samples])
    return stacked.mean(axis=0)


def threshold_scores(samples: Sequence[Window], center: np.ndarray, measure: ScoreFn) -> np.ndarray:
    return np.array([measure(getattr(s, "values", s), center) for s in samples], dtype=float)


def compute_threshold(
    samples: Sequence[Window],
    center: np.ndarray,
    measure: ScoreFn,
    alpha: float,
    p: float,
) -> float:
    """alpha times the p-quantile of the memory's own scores against ``center``.

    The quantile interpolates linearly between order statistics at
    position (len - 1) * p.
    """
    if len(samples) < 2:
        raise ValueError("threshold needs at least 2 memory samples")
    scores = threshold_scores(samples, center, measure)
    return float(alpha * np.quantile(scores, p, method="linear"))


def update_random(
    memory_samples: Sequence[Window],
    buffer: Sequence[Window],
    m: int,
    rng: np.random.Generator,
) -> list[Window]:
    """Uniform m-subset of memory and buffer combined, without replacement."""
    pool = list(memory_samples) + list(buffer)
    if len(pool) <= m:
        return pool
    keep = np.sort(rng.choice(len(pool), size=m, replace=False))
    return [pool[i] for i in keep]


def offer_reservoir(
    memory: Memory, windows: Sequence[Window], m: int, rng: np.random.Generator
) -> Memory:
    """Offer windows to the reservoir one at a time, in order (in place).

    While fewer than m are held, every offer is kept. After that the i-th
    offer overall (i = seen_count after the offer) replaces a uniformly
    chosen slot with probability m / i. Slots for one batch are drawn in a
    single RNG call.
    """
    windows = list(windows)
    room = max(0, m - len(memory.samples))
    memory.samples.extend(windows[:room])
    memory.seen_count += min(room, len(windows))
    rest = windows[room:]
    if not rest:
        return memory
    positions = memory.seen_count + 1 + np.arange(len(rest))
    slots = rng.integers(0, positions)
    for window, slot in zip(rest, slots.tolist()):
        if slot < m:
            memory.samples[slot] = window
    memory.seen_count += len(rest)
    return memory


def update_reservoir(
    memory: Memory, new_window: Window, m: int, rng: np.random.Generator
) -> Memory:
    """Offer a single window to the reservoir; returns ``memory``."""
    return offer_reservoir(memory, [new_window], m, rng)


def update_prototype(
    memory_samples: Sequence[Window], buffer: Sequence[Window], m: int
) -> list[Window]:
    """Keep the m windows closest (Euclidean) to the mean of the union.

    Ties go to the earlier start index.
    """
    pool = list(memory_samples) + list(buffer)
    if not pool:
        raise ValueError("prototype update on an empty pool")
    if len(pool) <= m:
        return pool
    stacked = np.stack([w.values for w in pool])
    dist = np.linalg.norm(stacked - stacked.mean(axis=0), axis=1)
    starts = np.array([w.start for w in pool])
    order = np.lexsort((starts, dist))
    return [pool[i] for i in order[:m]]


def resample(
    memory: Memory,
    buffer: Sequence[Window],
    scheme: str,
    m: int,
    rng: np.random.Generator,
) -> tuple[list[Window], int]:
    """New sample list and seen-count after merging ``buffer`` into ``memory``."""
    if scheme == "random":
        return update_random(memory.samples, buffer, m, rng), memory.seen_count + len(buffer)
    if scheme == "prototype":
        return update_prototype(memory.samples, buffer, m), memory.seen_count + len(buffer)
    if scheme == "reservoir":
        res = Memory(samples=list(memory.samples), seen_count=memory.seen_count)
        offer_reservoir(res, buffer, m, rng)
        return res.samples, res.seen_count
    raise ValueError(f"unknown scheme {scheme!r}")


def run_update_phase(
    memory: Memory,
    buffer: Sequence[Window],
    cfg: DetectorConfig,
    measure,
    rng: np.random.Generator,
) -> Memory:
    """Refresh the threshold, then resample, then recompute the centroid.

    The threshold is computed from the memory as it was *before* the buffer
    is merged in, so it lags the data by one update.
    """
    threshold = compute_threshold(memory.samples, memory.centroid, measure, cfg.alpha, cfg.p)
    samples, seen = resample(memory, buffer, cfg.scheme, cfg.m, rng)
    new_center = centroid(samples)
    refresh = getattr(measure, "refresh", None)
    if refresh is not None:
        refresh(np.stack([w.values for w in samples]), rng)
    return Memory(samples=samples, centroid=new_center, threshold=threshold, seen_count=seen)
