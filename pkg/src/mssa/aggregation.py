"""KL-gated stagewise aggregation of per-scale estimates and prediction.

Each class is aggregated independently across scales, from the smallest
neighbor count to the largest. The running aggregate starts at the
smallest scale's estimate; at every further scale k the candidate estimate
is accepted only if the scaled Bernoulli Kullback-Leibler divergence
T_k = N_k * KL(candidate, running aggregate) stays below the critical
value z_k. Acceptance replaces the aggregate, rejection freezes it, so the
final value always lies between the smallest and largest per-scale
estimates. The predicted label is the argmax of the aggregates, ties
resolved toward the smallest class index.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .estimator import ScaleEstimates, ScaleGrid, _stack_from_neighbors
from .kernels import Kernel
from .neighbors import NeighborIndex, build_index


@dataclass(frozen=True)
class CriticalValues:
    """Thresholds z_1..z_K gating aggregation.

    The first entry is never read by the stage loop (stages start at the
    second scale); it is stored anyway so z_k aligns with scale k.
    """

    z: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.z, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("z must be a non-empty vector")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("critical values must be finite and non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "z", arr)

    @property
    def k_scales(self) -> int:
        return self.z.shape[0]

    def scaled(self, c: float) -> "CriticalValues":
        return CriticalValues(self.z * c)


@dataclass(frozen=True)
class AggregationTrace:
    """Per-point diagnostics: final aggregates, acceptance flags, statistics.

    ``gamma[m, k-1]`` is 1 when stage k accepted class m's candidate and
    ``test_stats[m, k-1]`` holds the corresponding T_k.
    """

    theta_hat: np.ndarray
    gamma: np.ndarray
    test_stats: np.ndarray

    def to_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat.tolist(),
            "gamma": self.gamma.tolist(),
            "test_stats": self.test_stats.tolist(),
        }


def bernoulli_kl(a: float, b: float) -> float:
    """Kullback-Leibler divergence between Bernoulli(a) and Bernoulli(b).

    Both arguments must lie strictly inside (0, 1); truncated estimates
    always do. Zero iff a == b.
    """
    if not (0.0 < a < 1.0 and 0.0 < b < 1.0):
        raise ValueError("bernoulli_kl arguments must lie strictly in (0, 1)")
    return a * math.log(a / b) + (1.0 - a) * math.log((1.0 - a) / (1.0 - b))


def _bernoulli_kl_arr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # same formula as bernoulli_kl, elementwise on truncated arrays
    return a * np.log(a / b) + (1.0 - a) * np.log((1.0 - a) / (1.0 - b))


def aggregate_point(estimates: ScaleEstimates, z: CriticalValues) -> AggregationTrace:
    """Run the stagewise aggregation for one point's estimate stack."""
    if z.k_scales != estimates.k_scales:
        raise ValueError(
            f"critical values have K={z.k_scales}, estimates have K={estimates.k_scales}"
        )
    theta_hat, gamma, stats = _aggregate_batch(
        estimates.theta_tilde[None], estimates.masses[None], z.z
    )
    return AggregationTrace(theta_hat=theta_hat[0], gamma=gamma[0], test_stats=stats[0])


def _aggregate_batch(
    theta: np.ndarray, masses: np.ndarray, z: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized aggregation: theta (b, M, K), masses (b, K) -> theta_hat (b, M)."""
    b, m_classes, k_scales = theta.shape
    current = theta[:, :, 0].copy()
    gamma = np.empty((b, m_classes, k_scales - 1), dtype=np.int8)
    stats = np.empty((b, m_classes, k_scales - 1), dtype=np.float64)
    for k in range(1, k_scales):
        cand = theta[:, :, k]
        t_k = masses[:, k][:, None] * _bernoulli_kl_arr(cand, current)
        accept = t_k <= z[k]
        gamma[:, :, k - 1] = accept
        stats[:, :, k - 1] = t_k
        current = np.where(accept, cand, current)
    return current, gamma, stats


def predict_label(trace: AggregationTrace) -> int:
    """Argmax of the aggregated estimates, ties to the smallest class index."""
    return int(np.argmax(trace.theta_hat))


def predict_batch(
    points: np.ndarray,
    dataset: LabeledDataset,
    grid: ScaleGrid,
    kernel: Kernel,
    z: CriticalValues,
    loo: bool = False,
    index: NeighborIndex | None = None,
    collect_traces: bool = False,
    workers: int = 1,
) -> tuple[np.ndarray, list[AggregationTrace] | None]:
    """Predict labels for a batch of points.

    With ``loo=True`` the points must be the training features themselves;
    each query then excludes its own training index. Results match mapping
    the single-point path over the batch, in order, for any worker count.

    Returns the predicted labels and, when ``collect_traces`` is set, one
    AggregationTrace per point.
    """
    if z.k_scales != grid.k_scales:
        raise ValueError("critical values and grid disagree on K")
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    if index is None:
        index = build_index(dataset)
    if loo:
        if pts.shape[0] != dataset.n or not np.array_equal(pts, dataset.features):
            raise ValueError("loo=True requires the training points themselves")
        max_k = dataset.n - 1
    else:
        max_k = dataset.n
    if grid.counts[-1] > max_k:
        raise ValueError(
            f"grid needs {grid.counts[-1]} neighbors, only {max_k} available"
        )

    b = pts.shape[0]
    labels_out = np.empty(b, dtype=np.int64)
    traces_out: list[AggregationTrace] | None = [None] * b if collect_traces else None

    def run_chunk(lo: int, hi: int) -> None:
        excl = np.arange(lo, hi, dtype=np.int64) if loo else None
        nb_idx, nb_dist = index.query_batch(pts[lo:hi], grid.counts[-1], excl)
        theta, _, masses, _ = _stack_from_neighbors(
            nb_idx, nb_dist, dataset.labels, dataset.m_classes, grid, kernel
        )
        theta_hat, gamma, stats = _aggregate_batch(theta, masses, z.z)
        labels_out[lo:hi] = np.argmax(theta_hat, axis=1)
        if traces_out is not None:
            for j in range(hi - lo):
                traces_out[lo + j] = AggregationTrace(
                    theta_hat=theta_hat[j], gamma=gamma[j], test_stats=stats[j]
                )

    chunk = max(1, min(4096, -(-b // max(1, workers))))
    spans = [(lo, min(lo + chunk, b)) for lo in range(0, b, chunk)]
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda s: run_chunk(*s), spans))
    else:
        for lo, hi in spans:
            run_chunk(lo, hi)
    return labels_out, traces_out
