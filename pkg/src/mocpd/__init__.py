"""Memory-based online change-point detection."""

__version__ = "0.1.0"

from mocpd.core import (
    ConfigError,
    Detection,
    DetectorConfig,
    Memory,
    SeriesPoint,
    Window,
    validate_config,
)
from mocpd.detector import MOCPDDetector, NewmaDetector, Phase, detect_values, run_stream

__all__ = [
    "ConfigError",
    "Detection",
    "DetectorConfig",
    "MOCPDDetector",
    "Memory",
    "NewmaDetector",
    "Phase",
    "SeriesPoint",
    "Window",
    "detect_values",
    "run_stream",
    "validate_config",
]
