"""Shared domain types and the detector configuration contract."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

MEASURES = ("mean", "mmd", "vae")
SCHEMES = ("random", "reservoir", "prototype")

# 30-minute sampling: 48 samples per day.
SAMPLES_PER_DAY = 48


class ConfigError(ValueError):
    """Raised when a DetectorConfig violates one or more invariants.

    ``problems`` holds one ``(field, message)`` pair per violated invariant.
    """

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = list(problems)
        super().__init__("; ".join(f"{name}: {msg}" for name, msg in self.problems))

    @property
    def fields(self) -> list[str]:
        return [name for name, _ in self.problems]


@dataclass(frozen=True, slots=True)
class SeriesPoint:
    index: int
    value: float

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"index must be non-negative, got {self.index}")
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite value at index {self.index}: {self.value}")


@dataclass(frozen=True, slots=True, eq=False)
class Window:
    """``len(values)`` consecutive stream values beginning at ``start``."""

    start: int
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("window values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"window starting at {self.start} holds non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Window):
            return NotImplemented
        return self.start == other.start and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.start, self.values.tobytes()))


@dataclass(slots=True)
class Memory:
    """The stored distribution: representative windows, centroid and threshold."""

    samples: list[Window] = field(default_factory=list)
    centroid: np.ndarray | None = None
    threshold: float = 0.0
    seen_count: int = 0

    def __len__(self) -> int:
        return len(self.samples)

    def matrix(self) -> np.ndarray:
        return np.stack([s.values for s in self.samples])

    def is_consistent(self) -> bool:
        if not self.samples:
            return self.centroid is None
        return self.centroid is not None and np.allclose(
            self.centroid, self.matrix().mean(axis=0), rtol=1e-12, atol=1e-12
        )


@dataclass(frozen=True, slots=True)
class Detection:
    index: int
    score: float
    threshold_at: float
    window_start: int | None = None


@dataclass(frozen=True)
class DetectorConfig:
    """Parameters of the memory-based detector.

    Defaults follow the fuel-leak setting: stride 10, quantile 0.975, scale 4,
    75 memory windows, random resampling, window size 100. ``n`` and ``b``
    are window counts (50 windows = 500 raw samples of collection, 15 windows
    = an update every 150 raw samples at stride 10).
    """

    w: int = 100
    m: int = 75
    n: int = 50
    b: int = 15
    r: int = 10
    alpha: float = 4.0
    p: float = 0.975
    measure: str = "mmd"
    scheme: str = "random"
    seed: int = 0
    tolerance: int = 10 * SAMPLES_PER_DAY
    mmd_bandwidth: float | None = None
    ssa: bool = True

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> DetectorConfig:
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError([(name, "unknown config key") for name in unknown])
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> DetectorConfig:
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> DetectorConfig:
        return cls.from_json(Path(path).read_text())

    def with_overrides(self, **overrides: Any) -> DetectorConfig:
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def config_problems(cfg: DetectorConfig) -> list[tuple[str, str]]:
    problems: list[tuple[str, str]] = []

    def is_int(value: Any) -> bool:
        return isinstance(value, (int, np.integer)) and not isinstance(value, bool)

    for name in ("w", "m", "n", "b", "r", "seed", "tolerance"):
        if not is_int(getattr(cfg, name)):
            problems.append((name, f"{name} must be an integer"))
    if problems:
        return problems

    if cfg.w < 2:
        problems.append(("w", "w too small (need w >= 2)"))
    if cfg.m < 2:
        problems.append(("m", "m too small (need m >= 2)"))
    if cfg.n < 2:
        problems.append(("n", "n too small (need n >= 2 to form a threshold)"))
    if cfg.n > cfg.m:
        problems.append(("n", "n exceeds m"))
    if cfg.b < 1:
        problems.append(("b", "b must be >= 1"))
    if cfg.r < 1:
        problems.append(("r", "r must be >= 1"))
    if not (math.isfinite(cfg.alpha) and cfg.alpha > 0):
        problems.append(("alpha", "alpha must be finite and > 0"))
    if not (0.0 < cfg.p < 1.0):
        problems.append(("p", "p must lie in (0, 1)"))
    if cfg.measure not in MEASURES:
        problems.append(("measure", f"measure must be one of {MEASURES}"))
    if cfg.scheme not in SCHEMES:
        problems.append(("scheme", f"scheme must be one of {SCHEMES}"))
    if cfg.tolerance < 0:
        problems.append(("tolerance", "tolerance must be >= 0"))
    if cfg.seed < 0:
        problems.append(("seed", "seed must be >= 0"))
    if cfg.mmd_bandwidth is not None and not (
        math.isfinite(cfg.mmd_bandwidth) and cfg.mmd_bandwidth > 0
    ):
        problems.append(("mmd_bandwidth", "mmd_bandwidth must be finite and > 0"))
    return problems


def validate_config(cfg: DetectorConfig) -> DetectorConfig:
    """Return ``cfg`` unchanged if valid, else raise ConfigError."""
    problems = config_problems(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg
