"""Weighted nearest-neighbor class-probability estimates over a scale grid.

For each neighbor count n_k in the grid, the estimator forms kernel weights
w_i = K(||X_i - x|| / h_k) over the n_k nearest neighbors of x, where the
bandwidth h_k is the distance to the n_k-th neighbor, and estimates each
class probability by the weighted one-vs-all label fraction. Estimates are
truncated away from 0 and 1 so downstream divergence tests stay finite;
truncation never changes which class attains the maximum.

A single neighbor query at the largest scale serves every smaller scale
(sorted neighbor lists have the prefix property), which keeps per-point
cost at one scan plus one sort.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .kernels import Kernel, kernel_evaluate
from .neighbors import NeighborIndex, NeighborList


@dataclass(frozen=True)
class ScaleGrid:
    """Increasing neighbor counts n_1 < ... < n_K with ratio diagnostics.

    ``u0_effective`` is half the smallest consecutive-count ratio
    min_k(n_{k-1}/n_k)/2 (1/2 for a single-scale grid, where no ratio
    constrains anything). ``ratio_ok`` records whether the spacing
    condition "each scale more than doubles" holds, i.e. whether
    max_k(n_{k-1}/n_k) < 1/2. The geometric default grid grows by 1.25x
    and therefore reports ratio_ok=False; it is kept because it is the
    spacing the reference experiments use.
    """

    counts: tuple[int, ...]
    u0_effective: float
    ratio_ok: bool

    @classmethod
    def from_counts(cls, counts) -> "ScaleGrid":
        cts = tuple(int(c) for c in counts)
        if not cts:
            raise ValueError("grid must contain at least one neighbor count")
        if cts[0] < 1:
            raise ValueError("neighbor counts must be positive")
        if any(b <= a for a, b in zip(cts, cts[1:])):
            raise ValueError("neighbor counts must be strictly increasing")
        if len(cts) == 1:
            return cls(cts, 0.5, True)
        ratios = np.array(cts[:-1], dtype=np.float64) / np.array(cts[1:], dtype=np.float64)
        return cls(cts, float(ratios.min() / 2.0), bool(ratios.max() < 0.5))

    @property
    def k_scales(self) -> int:
        return len(self.counts)


def geometric_grid(
    n: int, base: int = 3, growth: float = 1.25, max_count: int | None = None
) -> ScaleGrid:
    """Default grid: floor(base * growth^k) for k = 0, 1, ... while <= max.

    ``max_count`` defaults to n // 2. Duplicate counts produced by the
    floor are removed.
    """
    if max_count is None:
        max_count = n // 2
    if base < 1 or growth <= 1.0:
        raise ValueError("base must be >= 1 and growth > 1")
    if base > max_count:
        raise ValueError(f"grid base {base} exceeds the cap {max_count}")
    counts: list[int] = []
    k = 0
    while True:
        c = int(np.floor(base * growth**k))
        if c > max_count:
            break
        if not counts or c > counts[-1]:
            counts.append(c)
        k += 1
    return ScaleGrid.from_counts(counts)


@dataclass(frozen=True)
class ScaleEstimates:
    """Per-class, per-scale estimates at one query point.

    ``eta_tilde[m, k]`` is the raw weighted fraction of class m among the
    n_k nearest neighbors; ``theta_tilde`` is its truncation to
    [1/(2M), 1-1/(2M)]. ``masses[k]`` is the total kernel weight N_k
    (equal to n_k exactly for the rectangular kernel) and
    ``bandwidths[k]`` the distance to the n_k-th neighbor.
    """

    theta_tilde: np.ndarray
    eta_tilde: np.ndarray
    masses: np.ndarray
    bandwidths: np.ndarray

    @property
    def m_classes(self) -> int:
        return self.theta_tilde.shape[0]

    @property
    def k_scales(self) -> int:
        return self.theta_tilde.shape[1]


def truncate_phi(t: float, m_classes: int):
    """Clamp a probability to [1/(2M), 1 - 1/(2M)].

    1-Lipschitz, and argmax-preserving on probability vectors. Accepts an
    ndarray as well; entries must lie in [0, 1].
    """
    if m_classes < 2:
        raise ValueError("m_classes must be at least 2")
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
        raise ValueError("truncation input must lie in [0, 1]")
    lo = 1.0 / (2.0 * m_classes)
    out = np.clip(arr, lo, 1.0 - lo)
    if np.ndim(t) == 0:
        return float(out)
    return out


def scale_weights(neighbors: NeighborList, n_k: int, kernel: Kernel) -> np.ndarray:
    """Kernel weights for the n_k nearest entries of a neighbor list.

    The bandwidth is the n_k-th neighbor's distance, so the farthest
    counted neighbor has relative distance exactly 1 and weight >= 1/2.
    When the bandwidth is zero (at least n_k duplicates of the query
    point) every covered weight is 1, the continuity limit of K(0).
    """
    if n_k < 1 or n_k > len(neighbors):
        raise ValueError(f"n_k={n_k} out of range 1..{len(neighbors)}")
    dist = neighbors.distances[:n_k]
    h = dist[n_k - 1]
    if h == 0.0:
        return np.ones(n_k, dtype=np.float64)
    return kernel_evaluate(kernel, dist / h)


def estimate_stack(
    x: np.ndarray,
    dataset: LabeledDataset,
    grid: ScaleGrid,
    kernel: Kernel,
    index: NeighborIndex,
    exclude: int | None = None,
) -> ScaleEstimates:
    """Compute the full per-class, per-scale estimate stack at one point."""
    neighbors = index.query(x, grid.counts[-1], exclude=exclude)
    idx = neighbors.indices[None, :]
    dist = neighbors.distances[None, :]
    theta, eta, masses, bandwidths = _stack_from_neighbors(
        idx, dist, dataset.labels, dataset.m_classes, grid, kernel
    )
    return ScaleEstimates(
        theta_tilde=theta[0], eta_tilde=eta[0], masses=masses[0], bandwidths=bandwidths[0]
    )


def _stack_from_neighbors(
    nb_idx: np.ndarray,
    nb_dist: np.ndarray,
    labels: np.ndarray,
    m_classes: int,
    grid: ScaleGrid,
    kernel: Kernel,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized estimate stacks for a batch of neighbor lists.

    ``nb_idx``/``nb_dist`` are (b, n_K) arrays from a batched neighbor
    query. Returns theta (b, M, K), eta (b, M, K), masses (b, K) and
    bandwidths (b, K).
    """
    b = nb_idx.shape[0]
    k_scales = grid.k_scales
    lo = 1.0 / (2.0 * m_classes)

    eta = np.empty((b, m_classes, k_scales), dtype=np.float64)
    masses = np.empty((b, k_scales), dtype=np.float64)
    bandwidths = np.empty((b, k_scales), dtype=np.float64)
    nb_labels = labels[nb_idx]

    for ki, n_k in enumerate(grid.counts):
        dist = nb_dist[:, :n_k]
        h = dist[:, n_k - 1]
        bandwidths[:, ki] = h
        safe_h = np.where(h > 0.0, h, 1.0)
        w = kernel_evaluate(kernel, dist / safe_h[:, None])
        w[h == 0.0] = 1.0
        n_w = w.sum(axis=1)
        masses[:, ki] = n_w
        labs = nb_labels[:, :n_k]
        for m in range(m_classes):
            eta[:, m, ki] = (w * (labs == m)).sum(axis=1) / n_w

    theta = np.clip(eta, lo, 1.0 - lo)
    return theta, eta, masses, bandwidths
