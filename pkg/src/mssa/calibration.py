"""Critical-value selection: the closed-form theoretical values and the
Monte-Carlo propagation procedure with cross-validated scaling.

Propagation calibrates the thresholds so that, under pure-noise labels
(independent Bernoulli(1/2) draws on the real feature set), the stagewise
tests accept every stage with probability at least 1 - delta. Each stage's
preliminary threshold is the empirical (1 - delta/K) quantile of the test
statistic among the replicates that survived all earlier stages, so the
per-stage rejection rate is at most delta/K conditionally and at most
delta overall. The calibration runs at a single point (the coordinate-wise
median of the training features by default): the theoretical threshold
formula does not depend on the test point, so one point suffices.

The final thresholds are c times the preliminary ones, with c picked by
leave-one-out cross-validation over a small grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggregation import CriticalValues, _bernoulli_kl_arr
from .data import LabeledDataset
from .errors import CalibrationError
from .estimator import ScaleGrid, truncate_phi
from .evaluation import EvalReport, loo_error
from .kernels import Kernel, kernel_evaluate
from .neighbors import NeighborIndex


@dataclass(frozen=True)
class CalibrationConfig:
    """Knobs of the Monte-Carlo propagation calibration.

    ``delta`` is the tolerated overall rejection rate under pure noise;
    ``n_mc`` the number of replicate label sets; ``c_grid`` the candidate
    scale factors tried by cross validation; ``seed`` drives every
    replicate's label stream.
    """

    delta: float = 0.1
    n_mc: int = 1000
    c_grid: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0)
    seed: int = 0
    min_survivors: int = 20

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.n_mc < 100:
            raise ValueError("n_mc must be at least 100")
        if not self.c_grid or min(self.c_grid) <= 0:
            raise ValueError("c_grid must be non-empty and positive")


def theoretical_critical_values(
    m_classes: int, grid: ScaleGrid, delta: float
) -> CriticalValues:
    """Closed-form thresholds (8 M^2 / u0) * log(12 K M / delta), one per
    scale (the formula does not depend on the scale index)."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if m_classes < 2:
        raise ValueError("m_classes must be at least 2")
    k_scales = grid.k_scales
    value = (8.0 * m_classes**2 / grid.u0_effective) * np.log(
        12.0 * k_scales * m_classes / delta
    )
    return CriticalValues(np.full(k_scales, value))


def _replicate_labels(seed: int, replicate: int, n: int) -> np.ndarray:
    """Bernoulli(1/2) labels for one replicate, from its own derived stream."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, replicate]))
    return rng.integers(0, 2, size=n)


def _noise_statistics(
    features: np.ndarray,
    x: np.ndarray,
    grid: ScaleGrid,
    kernel: Kernel,
    n_mc: int,
    seed: int,
) -> np.ndarray:
    """Test statistics of every replicate on the all-accept path.

    Returns an (n_mc, K-1) matrix whose column k-2 holds
    T_k = N_k * KL(theta_k, theta_{k-1}) for the binary (two-class
    truncation) pure-noise estimates at the calibration point. Replicates
    that keep passing the tests carry exactly these statistics, because
    each accepted stage replaces the aggregate by the stage estimate.
    """
    index = NeighborIndex(features)
    neighbors = index.query(np.asarray(x, dtype=np.float64), grid.counts[-1])
    k_scales = grid.k_scales

    # per-scale kernel weights over the shared neighbor list
    weights = np.zeros((k_scales, grid.counts[-1]), dtype=np.float64)
    masses = np.empty(k_scales, dtype=np.float64)
    for ki, n_k in enumerate(grid.counts):
        dist = neighbors.distances[:n_k]
        h = dist[n_k - 1]
        w = np.ones(n_k) if h == 0.0 else kernel_evaluate(kernel, dist / h)
        weights[ki, :n_k] = w
        masses[ki] = w.sum()

    labels = np.empty((n_mc, grid.counts[-1]), dtype=np.float64)
    n = features.shape[0]
    for r in range(n_mc):
        labels[r] = _replicate_labels(seed, r, n)[neighbors.indices]

    eta = labels @ weights.T / masses  # (n_mc, K)
    theta = truncate_phi(eta, 2)
    stats = masses[1:] * _bernoulli_kl_arr(theta[:, 1:], theta[:, :-1])
    return stats


def _stage_quantile(values: np.ndarray, level: float) -> float:
    """Upper empirical quantile: order statistic ceil(level * s) of s values."""
    s = values.shape[0]
    rank = int(np.ceil(level * s))
    rank = min(max(rank, 1), s)
    return float(np.sort(values)[rank - 1])


def propagation_calibrate(
    dataset_features: np.ndarray,
    x: np.ndarray,
    grid: ScaleGrid,
    kernel: Kernel,
    config: CalibrationConfig,
) -> CriticalValues:
    """Preliminary critical values from the pure-noise propagation runs.

    Stage thresholds are fixed sequentially: the threshold at scale k is
    the empirical (1 - delta/K) quantile of T_k among replicates whose
    statistics stayed below the already-fixed thresholds at every earlier
    scale. The first entry of the returned vector is a placeholder zero
    (no test runs at the smallest scale).

    Raises CalibrationError when fewer than ``min_survivors`` replicates
    reach some stage, and ValueError when n_mc is too small for the
    requested quantile level (n_mc * delta / K < 1).
    """
    features = np.ascontiguousarray(dataset_features, dtype=np.float64)
    k_scales = grid.k_scales
    z = np.zeros(k_scales, dtype=np.float64)
    if k_scales == 1:
        return CriticalValues(z)
    if config.n_mc * config.delta / k_scales < 1.0:
        raise ValueError(
            f"n_mc={config.n_mc} cannot resolve the 1 - delta/K quantile "
            f"(need at least {int(np.ceil(k_scales / config.delta))} replicates)"
        )

    stats = _noise_statistics(
        features, x, grid, kernel, config.n_mc, config.seed
    )
    level = 1.0 - config.delta / k_scales
    alive = np.ones(config.n_mc, dtype=bool)
    for k in range(1, k_scales):
        t_k = stats[alive, k - 1]
        if t_k.shape[0] < config.min_survivors:
            raise CalibrationError(
                f"only {t_k.shape[0]} replicates survive to stage {k + 1}; "
                "quantile unreliable",
                stage=k + 1,
            )
        z[k] = _stage_quantile(t_k, level)
        alive[alive] = t_k <= z[k]
    return CriticalValues(z)


@dataclass(frozen=True)
class ScaleFactorSelection:
    """Chosen multiplier, the scaled thresholds, and the error that won."""

    c: float
    z: CriticalValues
    loo_report: EvalReport


def select_scale_factor(
    dataset: LabeledDataset,
    grid: ScaleGrid,
    kernel: Kernel,
    z_tilde: CriticalValues,
    config: CalibrationConfig,
    workers: int = 1,
) -> ScaleFactorSelection:
    """Pick the threshold multiplier by leave-one-out cross-validation.

    Every candidate c in the grid is evaluated with thresholds c * z_tilde;
    the smallest candidate attaining the minimal error wins.
    """
    best: ScaleFactorSelection | None = None
    for c in sorted(config.c_grid):
        report = loo_error(dataset, grid, kernel, z_tilde.scaled(c), workers=workers)
        if best is None or report.error_rate < best.loo_report.error_rate:
            best = ScaleFactorSelection(c=c, z=z_tilde.scaled(c), loo_report=report)
    assert best is not None
    return best


def default_calibration_point(features: np.ndarray) -> np.ndarray:
    """Coordinate-wise median of the training features."""
    return np.median(np.asarray(features, dtype=np.float64), axis=0)


def calibrate(
    dataset: LabeledDataset,
    grid: ScaleGrid,
    kernel: Kernel,
    config: CalibrationConfig,
    workers: int = 1,
) -> tuple[CriticalValues, ScaleFactorSelection]:
    """Full calibration: propagation at the median point, then c selection.

    Returns the preliminary thresholds and the cross-validated selection.
    """
    point = default_calibration_point(dataset.features)
    z_tilde = propagation_calibrate(dataset.features, point, grid, kernel, config)
    selection = select_scale_factor(dataset, grid, kernel, z_tilde, config, workers=workers)
    return z_tilde, selection
