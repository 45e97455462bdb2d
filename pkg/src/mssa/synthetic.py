"""Gaussian-mixture generators, the exact Bayes rule, and Bayes-risk
estimation for the built-in synthetic experiments.

Each class density is a sub-mixture of isotropic Gaussians. The Bayes rule
maximizes prior times class density; it is evaluated in log space with
log-sum-exp over sub-components so that points far from every mean do not
underflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .data import LabeledDataset
from .estimator import ScaleGrid
from .kernels import Kernel


@dataclass(frozen=True)
class GaussianMixtureModel:
    """Class-conditional densities p_m(x) as isotropic Gaussian sub-mixtures.

    ``components[m]`` is a tuple of (weight, mean, variance) triplets whose
    weights sum to 1; the covariance of each component is variance * I.
    """

    priors: tuple[float, ...]
    components: tuple[tuple[tuple[float, tuple[float, ...], float], ...], ...]

    def __post_init__(self):
        if len(self.priors) != len(self.components):
            raise ValueError("one component list per class is required")
        if len(self.priors) < 2:
            raise ValueError("at least two classes are required")
        if abs(sum(self.priors) - 1.0) > 1e-12 or min(self.priors) < 0:
            raise ValueError("priors must be non-negative and sum to 1")
        d = len(self.components[0][0][1])
        for comps in self.components:
            if abs(sum(w for w, _, _ in comps) - 1.0) > 1e-12:
                raise ValueError("sub-mixture weights must sum to 1")
            for w, mean, var in comps:
                if w < 0 or var <= 0 or len(mean) != d:
                    raise ValueError("invalid mixture component")

    @property
    def m_classes(self) -> int:
        return len(self.priors)

    @property
    def d(self) -> int:
        return len(self.components[0][0][1])


def _class_log_density(model: GaussianMixtureModel, x: np.ndarray, m: int) -> np.ndarray:
    """log p_m for a batch of points, stable via log-sum-exp."""
    d = model.d
    parts = []
    for w, mean, var in model.components[m]:
        sq = np.sum((x - np.asarray(mean)) ** 2, axis=1)
        parts.append(np.log(w) - 0.5 * d * np.log(2.0 * np.pi * var) - sq / (2.0 * var))
    return logsumexp(np.stack(parts, axis=0), axis=0)


def log_posterior_scores(model: GaussianMixtureModel, points: np.ndarray) -> np.ndarray:
    """Matrix of log(pi_m) + log p_m(x) per point and class."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    scores = np.empty((pts.shape[0], model.m_classes), dtype=np.float64)
    for m in range(model.m_classes):
        scores[:, m] = np.log(model.priors[m]) + _class_log_density(model, pts, m)
    return scores


def class_posteriors(model: GaussianMixtureModel, points: np.ndarray) -> np.ndarray:
    """Conditional class probabilities P(Y = m | X = x) per point."""
    scores = log_posterior_scores(model, points)
    scores -= logsumexp(scores, axis=1, keepdims=True)
    return np.exp(scores)


def bayes_label(model: GaussianMixtureModel, x: np.ndarray) -> int:
    """The optimal label at x: argmax of prior times class density."""
    pt = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(pt)):
        raise ValueError("point must be finite")
    return int(np.argmax(log_posterior_scores(model, pt)[0]))


def bayes_label_batch(model: GaussianMixtureModel, points: np.ndarray) -> np.ndarray:
    return np.argmax(log_posterior_scores(model, points), axis=1)


def sample_mixture(model: GaussianMixtureModel, n: int, seed: int) -> LabeledDataset:
    """Draw n labeled points: label from the priors, then the class's
    sub-mixture component, then an isotropic Gaussian. Deterministic given
    the seed."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    labels = rng.choice(model.m_classes, size=n, p=np.asarray(model.priors))
    features = np.empty((n, model.d), dtype=np.float64)
    noise = rng.standard_normal((n, model.d))
    comp_u = rng.random(n)
    for i in range(n):
        comps = model.components[labels[i]]
        acc, pick = 0.0, len(comps) - 1
        for j, (w, _, _) in enumerate(comps):
            acc += w
            if comp_u[i] < acc:
                pick = j
                break
        _, mean, var = comps[pick]
        features[i] = np.asarray(mean) + np.sqrt(var) * noise[i]
    return LabeledDataset(features=features, labels=labels, m_classes=model.m_classes)


def bayes_risk(
    model: GaussianMixtureModel, n_mc: int, seed: int
) -> tuple[float, float]:
    """Monte-Carlo estimate of the optimal misclassification rate.

    Returns the error fraction of the exact Bayes rule over ``n_mc`` fresh
    draws and its binomial standard error sqrt(r(1-r)/n_mc).
    """
    if n_mc < 1000:
        raise ValueError("n_mc must be at least 1000")
    sample = sample_mixture(model, n_mc, seed)
    predicted = bayes_label_batch(model, sample.features)
    risk = float(np.mean(predicted != sample.labels))
    return risk, float(np.sqrt(risk * (1.0 - risk) / n_mc))


@dataclass(frozen=True)
class Experiment:
    model: GaussianMixtureModel
    grid: ScaleGrid
    kernel: Kernel


def _floor_grid(max_exponent: int) -> ScaleGrid:
    raw = [int(np.floor(3 * 1.25**k)) for k in range(max_exponent + 1)]
    deduped = sorted(set(raw))
    return ScaleGrid.from_counts(deduped)


_ROOT3_2 = float(np.sqrt(3.0) / 2.0)

_EXPERIMENTS = {
    1: Experiment(
        model=GaussianMixtureModel(
            priors=(1 / 3, 1 / 3, 1 / 3),
            components=(
                ((1.0, (0.0, -1.0), 0.5),),
                ((1.0, (_ROOT3_2, 0.0), 0.5),),
                ((1.0, (-_ROOT3_2, 0.0), 0.5),),
            ),
        ),
        grid=_floor_grid(11),
        kernel=Kernel.RECTANGULAR,
    ),
    2: Experiment(
        model=GaussianMixtureModel(
            priors=(0.25, 0.25, 0.25, 0.25),
            components=(
                ((1.0, (-1.0, -1.0), 0.7),),
                ((1.0, (1.0, -1.0), 0.7),),
                ((1.0, (-1.0, 1.0), 0.7),),
                ((1.0, (1.0, 1.0), 0.7),),
            ),
        ),
        grid=_floor_grid(15),
        kernel=Kernel.RECTANGULAR,
    ),
    3: Experiment(
        model=GaussianMixtureModel(
            priors=(1 / 3, 1 / 3, 1 / 3),
            components=(
                ((0.5, (-1.0, 0.0), 0.5), (0.5, (1.0, 0.0), 0.5)),
                ((0.5, (0.5, _ROOT3_2), 0.5), (0.5, (-0.5, -_ROOT3_2), 0.5)),
                ((0.5, (-0.5, _ROOT3_2), 0.5), (0.5, (0.5, -_ROOT3_2), 0.5)),
            ),
        ),
        grid=_floor_grid(14),
        kernel=Kernel.RECTANGULAR,
    ),
}


def builtin_experiment(experiment_id: int) -> Experiment:
    """The three built-in synthetic mixture experiments.

    Experiment 1: three classes on a triangle, variance 0.5, 500-point
    design with grid floor(3 * 1.25^k) for k up to 11. Experiment 2: four
    classes on square corners, variance 0.7, k up to 15. Experiment 3:
    three classes of two-component mixtures, variance 0.5, k up to 14.
    Duplicate counts from the floor are removed, so the grids start 3, 4,
    5, ... All use the rectangular kernel.
    """
    try:
        return _EXPERIMENTS[experiment_id]
    except KeyError:
        raise ValueError(f"experiment id must be 1, 2 or 3, got {experiment_id!r}") from None
