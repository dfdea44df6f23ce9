"""Dissimilarity measures between a window and the memory centroid.

Every measure maps ``(window, centroid)`` to a non-negative score that is
exactly zero when the two are identical. The ``Measure`` classes wrap the
pure scoring functions with the state a detector needs (kernel bandwidth,
a trained encoder) and the hooks that refresh that state.
"""

from __future__ import annotations

import math

import numpy as np

from mocpd import vae as vae_mod

BANDWIDTH_FLOOR = 1e-6
BANDWIDTH_POOL = 200


def _pair(window, centroid) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(getattr(window, "values", window), dtype=float)
    b = np.asarray(centroid, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: window {a.shape} vs centroid {b.shape}")
    return a, b


def mean_score(window, centroid) -> float:
    """Squared difference of the two arithmetic means."""
    a, b = _pair(window, centroid)
    return float((a.mean() - b.mean()) ** 2)


def rbf_kernel_mean(x: np.ndarray, y: np.ndarray, bandwidth: float) -> float:
    """Mean of exp(-(x_i - y_j)^2 / (2 bandwidth^2)) over all pairs."""
    diff = x[:, None] - y[None, :]
    return float(np.exp(diff * diff * (-0.5 / (bandwidth * bandwidth))).mean())


def mmd_squared(window, centroid, bandwidth: float) -> float:
    """Biased (V-statistic) MMD^2 with an RBF kernel, without clamping."""
    a, b = _pair(window, centroid)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite input to MMD")
    if not (math.isfinite(bandwidth) and bandwidth > 0):
        raise ValueError(f"bandwidth must be finite and > 0, got {bandwidth}")
    return (
        rbf_kernel_mean(a, a, bandwidth)
        - 2.0 * rbf_kernel_mean(a, b, bandwidth)
        + rbf_kernel_mean(b, b, bandwidth)
    )


def mmd_score(window, centroid, bandwidth: float) -> float:
    """Each vector's entries are treated as 1-D samples; result clamped at 0."""
    return max(0.0, mmd_squared(window, centroid, bandwidth))


def median_bandwidth(samples, rng: np.random.Generator | None = None) -> float:
    """Median heuristic over the pooled scalar values of ``samples``.

    At most 200 scalars are used; larger pools are subsampled with ``rng``.
    """
    pooled = np.concatenate(
        [np.asarray(getattr(s, "values", s), dtype=float).ravel() for s in samples]
    )
    if pooled.size > BANDWIDTH_POOL:
        if rng is None:
            rng = np.random.default_rng(0)
        pooled = rng.choice(pooled, size=BANDWIDTH_POOL, replace=False)
    if pooled.size < 2:
        return BANDWIDTH_FLOOR
    i, j = np.triu_indices(pooled.size, k=1)
    sigma = float(np.median(np.abs(pooled[i] - pooled[j])))
    return max(sigma, BANDWIDTH_FLOOR)


class Measure:
    """Base class; subclasses implement ``score``.

    ``fit_distribution`` runs whenever a distribution is (re)established at
    the end of initialisation or collection; ``refresh`` runs at the end of
    every update phase.
    """

    name = "base"

    def fit_distribution(self, samples: np.ndarray, rng: np.random.Generator) -> None:
        pass

    def refresh(self, samples: np.ndarray, rng: np.random.Generator) -> None:
        pass

    def score(self, window: np.ndarray, centroid: np.ndarray) -> float:
        raise NotImplementedError

    def __call__(self, window, centroid) -> float:
        return self.score(window, centroid)


class MeanMeasure(Measure):
    name = "mean"

    def score(self, window, centroid) -> float:
        return mean_score(window, centroid)


class MMDMeasure(Measure):
    """RBF-kernel MMD^2. With ``bandwidth=None`` the median heuristic is
    re-estimated from memory on every fit and refresh."""

    name = "mmd"

    def __init__(self, bandwidth: float | None = None):
        if bandwidth is not None and not (math.isfinite(bandwidth) and bandwidth > 0):
            raise ValueError("fixed MMD bandwidth must be finite and > 0")
        self.fixed = bandwidth
        self.bandwidth = bandwidth if bandwidth is not None else 1.0
        self._cache_key: tuple[bytes, float] | None = None
        self._cache_value = 0.0

    def fit_distribution(self, samples, rng) -> None:
        self.refresh(samples, rng)

    def refresh(self, samples, rng) -> None:
        if self.fixed is None:
            self.bandwidth = median_bandwidth(samples, rng)

    def _centroid_term(self, centroid: np.ndarray) -> float:
        # The centroid only changes at phase boundaries; cache its kernel mean.
        centroid = np.asarray(centroid, dtype=float)
        key = (centroid.tobytes(), self.bandwidth)
        if key != self._cache_key:
            self._cache_value = rbf_kernel_mean(centroid, centroid, self.bandwidth)
            self._cache_key = key
        return self._cache_value

    def score(self, window, centroid) -> float:
        a, b = _pair(window, centroid)
        h = self.bandwidth
        value = (
            rbf_kernel_mean(a, a, h)
            - 2.0 * rbf_kernel_mean(a, b, h)
            + self._centroid_term(centroid)
        )
        return max(0.0, value)


class VAEMeasure(Measure):
    """Squared distance between encoder means; retrained on each new distribution."""

    name = "vae"

    def __init__(self, latent_dim: int = 2, epochs: int = 100, lr: float = 0.01):
        self.latent_dim = latent_dim
        self.epochs = epochs
        self.lr = lr
        self.model: vae_mod.VaeModel | None = None
        self._cache_key: bytes | None = None
        self._cache_value: np.ndarray | None = None

    def fit_distribution(self, samples, rng) -> None:
        samples = np.asarray(samples, dtype=float)
        seed = int(rng.integers(2**63 - 1))
        model = vae_mod.init_model(samples.shape[1], self.latent_dim, seed=seed)
        self.model = vae_mod.vae_train(
            model, samples, epochs=self.epochs, lr=self.lr, seed=seed
        )
        self._cache_key = None

    def score(self, window, centroid) -> float:
        if self.model is None:
            raise vae_mod.UntrainedModelError("VAE measure used before training")
        a, b = _pair(window, centroid)
        key = b.tobytes()
        if self._cache_key != key:
            self._cache_value = vae_mod.encode_mean(self.model, b)
            self._cache_key = key
        diff = vae_mod.encode_mean(self.model, a) - self._cache_value
        return float(diff @ diff)


def make_measure(name: str, mmd_bandwidth: float | None = None) -> Measure:
    if name == "mean":
        return MeanMeasure()
    if name == "mmd":
        return MMDMeasure(mmd_bandwidth)
    if name == "vae":
        return VAEMeasure()
    raise ValueError(f"unknown measure {name!r}")
