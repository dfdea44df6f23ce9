"""Online outlier removal with singular spectrum analysis.

Each incoming value is compared with its rank-truncated SSA reconstruction.
Values whose residual exceeds ``k`` rolling standard deviations are replaced
by the mean of the last ten cleaned values.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

IMPUTE_SPAN = 10
# Residuals needed before the rolling std is trusted.
MIN_RESIDUALS = 20


def trajectory_matrix(series: np.ndarray, embed_len: int) -> np.ndarray:
    """L x (N - L + 1) Hankel matrix whose columns are lagged windows."""
    series = np.asarray(series, dtype=float)
    k = len(series) - embed_len + 1
    return np.lib.stride_tricks.sliding_window_view(series, embed_len)[:k].T.copy()


def diagonal_average(matrix: np.ndarray) -> np.ndarray:
    """Average the anti-diagonals of an L x K matrix into a length L+K-1 series."""
    rows, cols = matrix.shape
    ii, jj = np.indices((rows, cols))
    diag = (ii + jj).ravel()
    sums = np.bincount(diag, weights=matrix.ravel(), minlength=rows + cols - 1)
    counts = np.bincount(diag, minlength=rows + cols - 1)
    return sums / counts


def _numeric_rank(singular_values: np.ndarray, shape: tuple[int, int]) -> int:
    if singular_values.size == 0 or singular_values[0] == 0.0:
        return 0
    tol = singular_values[0] * max(shape) * np.finfo(float).eps
    return int(np.count_nonzero(singular_values > tol))


def ssa_reconstruct(history: np.ndarray, embed_len: int, rank: int) -> np.ndarray:
    """Rank-truncated SSA reconstruction of ``history``.

    ``rank`` is clamped to the numeric rank of the trajectory matrix.
    """
    history = np.asarray(history, dtype=float)
    if history.ndim != 1:
        raise ValueError("history must be one-dimensional")
    if not np.all(np.isfinite(history)):
        raise ValueError("history contains non-finite values")
    if embed_len < 2:
        raise ValueError("embed_len must be >= 2")
    if len(history) < 2 * embed_len:
        raise ValueError(
            f"history of length {len(history)} too short for embed_len {embed_len}"
        )
    if rank < 1:
        raise ValueError("rank must be >= 1")

    traj = trajectory_matrix(history, embed_len)
    u, s, vt = np.linalg.svd(traj, full_matrices=False)
    keep = min(rank, _numeric_rank(s, traj.shape))
    if keep == 0:
        return np.zeros_like(history)
    approx = (u[:, :keep] * s[:keep]) @ vt[:keep]
    return diagonal_average(approx)


@dataclass
class SsaParams:
    history_len: int = 100
    embed_len: int = 20
    rank: int = 3
    k: float = 3.0

    def __post_init__(self) -> None:
        if not 2 <= self.embed_len <= self.history_len // 2:
            raise ValueError("need 2 <= embed_len <= history_len / 2")
        if not 1 <= self.rank <= self.embed_len:
            raise ValueError("need 1 <= rank <= embed_len")
        if not self.k > 0:
            raise ValueError("k must be > 0")


class _Ring:
    """Fixed-capacity float buffer exposing its contents as a contiguous view."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._buf = np.zeros(2 * capacity)
        self._end = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def append(self, value: float) -> None:
        if self._end == len(self._buf):
            keep = self.capacity - 1
            self._buf[:keep] = self._buf[self._end - keep : self._end]
            self._end = keep
        self._buf[self._end] = value
        self._end += 1
        self._size = min(self._size + 1, self.capacity)

    def view(self) -> np.ndarray:
        return self._buf[self._end - self._size : self._end]


class SsaFilter:
    """Streaming SSA outlier filter for one series.

    The signal subspace is estimated from the previous ``history_len`` raw
    values; the newest lagged vector (ending in ``x``) is projected onto it
    and the last coordinate of that projection is the reconstruction of
    ``x``. Keeping ``x`` out of the subspace estimate stops a large spike
    from becoming its own leading component.
    """

    def __init__(self, params: SsaParams | None = None):
        self.params = params or SsaParams()
        p = self.params
        self.history = _Ring(p.history_len)
        self.residuals = _Ring(p.history_len)
        self.recent: deque[float] = deque(maxlen=IMPUTE_SPAN)
        self.n_flagged = 0
        k = p.history_len - p.embed_len + 1
        self._hankel_idx = np.arange(p.embed_len)[:, None] + np.arange(k)[None, :]

    @property
    def warm(self) -> bool:
        return len(self.history) == self.params.history_len

    def predict(self, x: float) -> float:
        """Reconstruction of ``x`` from the current history (history must be full)."""
        p = self.params
        hist = self.history.view()
        traj = hist[self._hankel_idx]
        evals, evecs = np.linalg.eigh(traj @ traj.T)
        # eigh is ascending; singular values are sqrt of eigenvalues
        svals = np.sqrt(np.clip(evals[::-1], 0.0, None))
        keep = min(p.rank, _numeric_rank(svals, traj.shape))
        if keep == 0:
            return 0.0
        basis = evecs[:, ::-1][:, :keep]
        lagged = np.append(hist[len(hist) - p.embed_len + 1 :], x)
        return float(basis[-1] @ (basis.T @ lagged))

    def filter_point(self, x: float) -> tuple[float, bool]:
        if not math.isfinite(x):
            raise ValueError(f"non-finite input {x}")
        p = self.params
        cleaned, flagged = x, False

        if self.warm:
            residual = x - self.predict(x)
            if len(self.residuals) >= MIN_RESIDUALS:
                spread = float(self.residuals.view().std())
                scale = max(1.0, float(np.abs(self.history.view()).max()))
                spread = max(spread, 1e-9 * scale)
                if abs(residual) > p.k * spread and self.recent:
                    cleaned = sum(self.recent) / len(self.recent)
                    flagged = True
            self.residuals.append(residual)

        self.history.append(x)
        self.recent.append(cleaned)
        if flagged:
            self.n_flagged += 1
        return cleaned, flagged


def filter_series(values: np.ndarray, params: SsaParams | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Run a fresh SsaFilter over ``values``; returns (cleaned, flagged mask)."""
    filt = SsaFilter(params)
    out = np.empty(len(values))
    mask = np.zeros(len(values), dtype=bool)
    for i, v in enumerate(values):
        out[i], mask[i] = filt.filter_point(float(v))
    return out, mask
