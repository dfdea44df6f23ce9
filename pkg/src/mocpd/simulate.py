"""Data generators: fuel-variance streams with injected leaks, and the
jumping-mean / Gaussian-mixture change-point benchmarks.

Leak volumes are in gallons per 30-minute interval; synthetic base variance
is produced in the same unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mocpd.core import SAMPLES_PER_DAY

SAMPLES_PER_MONTH = 30 * SAMPLES_PER_DAY
MIN_LEAK_START = 2 * SAMPLES_PER_MONTH
MIN_LEAK_SPAN = 3 * SAMPLES_PER_MONTH
LEAK_RATES = (0.05, 0.1, 0.2)


@dataclass
class LabeledSeries:
    values: np.ndarray
    cps: list[int]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        self.cps = [int(c) for c in self.cps]
        if any(b <= a for a, b in zip(self.cps, self.cps[1:])):
            raise ValueError("change points must be strictly increasing")
        if self.cps and (self.cps[0] < 0 or self.cps[-1] >= len(self.values)):
            raise ValueError("change point outside the series")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class LeakScenario:
    avg_rate: float
    drawn_rate: float
    start_idx: int
    stop_idx: int
    h_series: np.ndarray
    h_max: np.ndarray

    def __post_init__(self) -> None:
        if not 0.7 * self.avg_rate - 1e-12 <= self.drawn_rate <= 1.3 * self.avg_rate + 1e-12:
            raise ValueError("drawn_rate outside +-30% of avg_rate")
        if self.start_idx < MIN_LEAK_START:
            raise ValueError(f"leak must start at or after sample {MIN_LEAK_START}")
        if self.stop_idx < self.start_idx + MIN_LEAK_SPAN:
            raise ValueError(f"leak must last at least {MIN_LEAK_SPAN} samples")
        self.h_series = np.asarray(self.h_series, dtype=float)
        self.h_max = np.asarray(self.h_max, dtype=float)
        if self.h_max.shape != self.h_series.shape:
            raise ValueError("h_max must be given per sample, like h_series")


def fuel_variance(open_vol, close_vol, sales, delivery):
    """Measured closing volume minus the theoretical closing volume."""
    return close_vol - (open_vol - sales + delivery)


def sample_leak_rate(avg: float, rng: np.random.Generator) -> float:
    if avg <= 0:
        raise ValueError("average leak rate must be > 0")
    return float(rng.uniform(0.7 * avg, 1.3 * avg))


def leak_volume_per_interval(lr, h, h_max):
    """Volume lost in one 30-minute interval for a bottom-of-tank leak."""
    h = np.asarray(h, dtype=float)
    h_max = np.asarray(h_max, dtype=float)
    if np.any(h_max <= 0):
        raise ValueError("h_max must be > 0")
    if np.any(h < 0) or np.any(h > h_max * (1 + 1e-12)):
        raise ValueError("product level must lie in [0, h_max]")
    out = 0.5 * lr * np.sqrt(h / h_max)
    return float(out) if out.ndim == 0 else out


def monthly_max(h_series: np.ndarray) -> np.ndarray:
    """Per-sample maximum of the level over its 30-day month."""
    h_series = np.asarray(h_series, dtype=float)
    out = np.empty_like(h_series)
    for lo in range(0, len(h_series), SAMPLES_PER_MONTH):
        chunk = h_series[lo : lo + SAMPLES_PER_MONTH]
        out[lo : lo + SAMPLES_PER_MONTH] = chunk.max()
    return out


def tank_levels(
    length: int,
    rng: np.random.Generator,
    capacity: float = 1.0,
    refill_at: float = 0.25,
    drain_days: tuple[float, float] = (4.0, 9.0),
) -> np.ndarray:
    """Sawtooth product level: steady sales drain the tank, a delivery refills it."""
    levels = np.empty(length)
    level = capacity
    per_step = _drain_rate(rng, capacity, refill_at, drain_days)
    for i in range(length):
        levels[i] = level
        level -= per_step
        if level < refill_at * capacity:
            level = capacity
            per_step = _drain_rate(rng, capacity, refill_at, drain_days)
    return levels


def _drain_rate(rng, capacity, refill_at, drain_days) -> float:
    days = rng.uniform(*drain_days)
    return capacity * (1.0 - refill_at) / (days * SAMPLES_PER_DAY)


def base_variance(
    length: int,
    rng: np.random.Generator,
    sigma: float,
    trend_amplitude: float = 0.0,
    trend_period: int = 60 * SAMPLES_PER_DAY,
) -> np.ndarray:
    """Gaussian fuel-variance noise with an optional slow sinusoidal trend."""
    noise = rng.normal(0.0, sigma, size=length)
    if trend_amplitude:
        phase = rng.uniform(0, 2 * math.pi)
        noise += trend_amplitude * np.sin(2 * math.pi * np.arange(length) / trend_period + phase)
    return noise


def make_leak_scenario(
    length: int,
    avg_rate: float,
    rng: np.random.Generator,
    tail: int = 20 * SAMPLES_PER_DAY,
) -> LeakScenario:
    """Random leak window: starts after two months, lasts at least three,
    and is repaired at least ``tail`` samples before the end."""
    latest_start = length - tail - MIN_LEAK_SPAN
    if latest_start < MIN_LEAK_START:
        raise ValueError(f"series of {length} samples too short for a leak scenario")
    start = int(rng.integers(MIN_LEAK_START, latest_start + 1))
    stop = int(rng.integers(start + MIN_LEAK_SPAN, length - tail + 1))
    levels = tank_levels(length, rng)
    return LeakScenario(
        avg_rate=avg_rate,
        drawn_rate=sample_leak_rate(avg_rate, rng),
        start_idx=start,
        stop_idx=stop,
        h_series=levels,
        h_max=monthly_max(levels),
    )


def inject_leak(base: np.ndarray, scenario: LeakScenario) -> LabeledSeries:
    """Subtract the leaked volume inside [start_idx, stop_idx).

    Both leak onset and repair are labelled as change points.
    """
    base = np.asarray(base, dtype=float)
    s, e = scenario.start_idx, scenario.stop_idx
    if len(scenario.h_series) != len(base):
        raise ValueError("scenario levels and base series differ in length")
    if not 0 <= s < e < len(base):
        raise ValueError(f"leak span [{s}, {e}) does not fit a series of {len(base)}")
    out = base.copy()
    out[s:e] -= leak_volume_per_interval(
        scenario.drawn_rate, scenario.h_series[s:e], scenario.h_max[s:e]
    )
    return LabeledSeries(out, [s, e])


def expected_leak_shift(avg_rate: float, levels: np.ndarray, h_max: np.ndarray) -> float:
    """Mean per-interval leak volume at the average rate for these levels."""
    return float(np.mean(leak_volume_per_interval(avg_rate, levels, h_max)))


def gen_fuel_leak(
    length: int = 20_000,
    avg_rate: float = 0.2,
    sigma: float = 0.05,
    seed: int = 0,
    trend_amplitude: float = 0.0,
) -> tuple[LabeledSeries, LeakScenario]:
    rng = np.random.default_rng(seed)
    scenario = make_leak_scenario(length, avg_rate, rng)
    base = base_variance(length, rng, sigma, trend_amplitude)
    return inject_leak(base, scenario), scenario


def gen_jumping_mean(
    num_segments: int = 49,
    seg_len: int = 500,
    rng: np.random.Generator | None = None,
    noise_std: float = 1.5,
) -> LabeledSeries:
    """AR(2) x_i = 0.6 x_{i-1} - 0.5 x_{i-2} + eps_i with a noise mean that
    jumps at every segment boundary: mu_1 = 0, mu_N = mu_{N-1} + N / 16."""
    rng = rng if rng is not None else np.random.default_rng(0)
    total = num_segments * seg_len
    mu = np.empty(num_segments)
    mu[0] = 0.0
    for seg in range(2, num_segments + 1):
        mu[seg - 1] = mu[seg - 2] + seg / 16.0
    eps = rng.normal(0.0, noise_std, size=total) + np.repeat(mu, seg_len)
    x = np.zeros(total)
    prev1 = prev2 = 0.0
    for i in range(total):
        x[i] = 0.6 * prev1 - 0.5 * prev2 + eps[i]
        prev2, prev1 = prev1, x[i]
    return LabeledSeries(x, [seg_len * k for k in range(1, num_segments)])


GM_A = ((0.5, -1.0, 0.5), (0.5, 1.0, 0.5))
GM_B = ((0.8, -1.0, 1.0), (0.2, 1.0, 0.1))


def sample_mixture(components, size: int, rng: np.random.Generator) -> np.ndarray:
    weights = np.array([c[0] for c in components])
    means = np.array([c[1] for c in components])
    stds = np.array([c[2] for c in components])
    which = rng.choice(len(components), size=size, p=weights)
    return rng.normal(means[which], stds[which])


def gen_gaussian_mixture(
    num_segments: int = 49,
    seg_len: int = 500,
    rng: np.random.Generator | None = None,
) -> LabeledSeries:
    """Segments alternate between two Gaussian mixtures, starting with GM_A."""
    rng = rng if rng is not None else np.random.default_rng(0)
    parts = [
        sample_mixture(GM_A if seg % 2 == 0 else GM_B, seg_len, rng)
        for seg in range(num_segments)
    ]
    return LabeledSeries(np.concatenate(parts), [seg_len * k for k in range(1, num_segments)])
