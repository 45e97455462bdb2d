"""Error metrics, leave-one-out cross-validation, fixed-scale sweeps, and
the high-probability pointwise error bound for a single weighted
nearest-neighbor estimate.

Leave-one-out predictions reuse the training index and exclude each point
at query time instead of rebuilding the index n times; the results are
identical and the cost drops by a factor of n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggregation import CriticalValues, predict_batch
from .data import LabeledDataset
from .estimator import ScaleGrid, _stack_from_neighbors
from .kernels import Kernel
from .neighbors import build_index


@dataclass(frozen=True)
class EvalReport:
    """Misclassification rate with its binomial standard error."""

    error_rate: float
    std_error: float
    n_evaluated: int
    per_point: tuple[tuple[int, int], ...] | None = None

    def to_dict(self) -> dict:
        return {
            "error_rate": self.error_rate,
            "std_error": self.std_error,
            "n": self.n_evaluated,
        }


def _report(true_labels: np.ndarray, predicted: np.ndarray, keep_pairs: bool) -> EvalReport:
    n = true_labels.shape[0]
    errors = int(np.sum(true_labels != predicted))
    rate = errors / n
    pairs = None
    if keep_pairs:
        pairs = tuple((int(t), int(p)) for t, p in zip(true_labels, predicted))
    return EvalReport(
        error_rate=rate,
        std_error=float(np.sqrt(rate * (1.0 - rate) / n)),
        n_evaluated=n,
        per_point=pairs,
    )


def loo_error(
    dataset: LabeledDataset,
    grid: ScaleGrid,
    kernel: Kernel,
    z: CriticalValues,
    keep_pairs: bool = False,
    workers: int = 1,
) -> EvalReport:
    """Leave-one-out error of the aggregated classifier on a dataset."""
    if dataset.n < grid.counts[-1] + 1:
        raise ValueError(
            f"leave-one-out with grid max {grid.counts[-1]} needs at least "
            f"{grid.counts[-1] + 1} points, dataset has {dataset.n}"
        )
    predicted, _ = predict_batch(
        dataset.features, dataset, grid, kernel, z, loo=True, workers=workers
    )
    return _report(dataset.labels, predicted, keep_pairs)


def holdout_error(
    train: LabeledDataset,
    test: LabeledDataset,
    grid: ScaleGrid,
    kernel: Kernel,
    z: CriticalValues,
    keep_pairs: bool = False,
    workers: int = 1,
) -> EvalReport:
    """Test-set error of the aggregated classifier trained on ``train``.

    The two datasets must share dimension and label encoding (same class
    count and, when both carry names, the same names in the same order).
    """
    if train.d != test.d:
        raise ValueError(f"dimension mismatch: train d={train.d}, test d={test.d}")
    if train.m_classes != test.m_classes:
        raise ValueError("label spaces differ between train and test")
    if (
        train.class_names is not None
        and test.class_names is not None
        and train.class_names != test.class_names
    ):
        raise ValueError("label encodings differ between train and test")
    predicted, _ = predict_batch(
        test.features, train, grid, kernel, z, loo=False, workers=workers
    )
    return _report(test.labels, predicted, keep_pairs)


def knn_sweep(
    dataset: LabeledDataset,
    grid: ScaleGrid,
    kernel: Kernel,
    workers: int = 1,
) -> list[EvalReport]:
    """Leave-one-out error of the plain weighted k-NN plug-in classifier at
    every scale of the grid.

    Entry k equals ``loo_error`` with the singleton grid [n_k]; all scales
    share one neighbor query per point, so the sweep costs no more than a
    single evaluation at the largest scale.
    """
    if dataset.n < grid.counts[-1] + 1:
        raise ValueError("grid too large for leave-one-out on this dataset")
    index = build_index(dataset)
    n = dataset.n
    predicted = np.empty((n, grid.k_scales), dtype=np.int64)

    def run_chunk(lo: int, hi: int) -> None:
        excl = np.arange(lo, hi, dtype=np.int64)
        nb_idx, nb_dist = index.query_batch(
            dataset.features[lo:hi], grid.counts[-1], excl
        )
        theta, _, _, _ = _stack_from_neighbors(
            nb_idx, nb_dist, dataset.labels, dataset.m_classes, grid, kernel
        )
        predicted[lo:hi] = np.argmax(theta, axis=1)

    chunk = max(1, min(4096, -(-n // max(1, workers))))
    spans = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
    if workers > 1 and len(spans) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda s: run_chunk(*s), spans))
    else:
        for lo, hi in spans:
            run_chunk(lo, hi)
    mistakes = (predicted != dataset.labels[:, None]).sum(axis=0)

    reports = []
    for k in range(grid.k_scales):
        rate = mistakes[k] / n
        reports.append(
            EvalReport(
                error_rate=float(rate),
                std_error=float(np.sqrt(rate * (1.0 - rate) / n)),
                n_evaluated=n,
            )
        )
    return reports


@dataclass(frozen=True)
class KnnErrorBound:
    """The pointwise high-probability bound with its validity diagnostic.

    ``value`` bounds |eta_m(x) - estimate| with probability 1 - delta when
    the implied neighborhood radius stays inside the minimal-mass regime.
    ``radius`` is that implied radius; ``in_validity_regime`` is None when
    no radius cap r0 was supplied.
    """

    value: float
    radius: float
    in_validity_regime: bool | None


def knn_error_bound(
    k: int,
    n: int,
    delta: float,
    holder_const: float,
    holder_alpha: float,
    kappa: float,
    density_at_x: float,
    d: int,
    r0: float | None = None,
) -> KnnErrorBound:
    """High-probability error bound for one weighted k-NN class-probability
    estimate at a point of known density.

    The bound is

        L * ((2k + 4 log(2/delta)) / (n kappa p))^(alpha/d)
          + sqrt(log(4/delta) / k)

    with L the smoothness constant, alpha the smoothness exponent, kappa
    the minimal-mass constant and p the density at the point. The implied
    neighborhood radius ((2k + 4 log(1/delta)) / (n kappa p))^(1/d) must
    stay below the minimal-mass range r0 for the bound to apply; when r0
    is given, the returned flag records that check. Increasing n shrinks
    the bound; delta -> 0 blows it up.
    """
    if min(k, n) < 1 or not 0.0 < delta < 1.0:
        raise ValueError("k, n must be positive and delta in (0, 1)")
    if min(holder_const, holder_alpha, kappa, density_at_x) <= 0.0 or d < 1:
        raise ValueError("bound parameters must be positive")
    mass = n * kappa * density_at_x
    bias = holder_const * ((2.0 * k + 4.0 * np.log(2.0 / delta)) / mass) ** (
        holder_alpha / d
    )
    noise = float(np.sqrt(np.log(4.0 / delta) / k))
    radius = float(((2.0 * k + 4.0 * np.log(1.0 / delta)) / mass) ** (1.0 / d))
    in_regime = None if r0 is None else bool(radius <= r0)
    return KnnErrorBound(value=float(bias + noise), radius=radius, in_validity_regime=in_regime)
