"""Localization kernels used to weight neighbors by relative distance.

All built-in kernels are supported on [0, 1]: they equal 1 at t = 0, stay
at or above 1/2 at t = 1, vanish for t > 1 and are non-increasing. These
four properties are what the estimator relies on (they guarantee that the
farthest counted neighbor still carries weight >= 1/2, so effective masses
stay comparable to raw neighbor counts).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Kernel(enum.Enum):
    """The three built-in localization kernels."""

    RECTANGULAR = "rect"
    EPANECHNIKOV_LIKE = "epan"
    GAUSSIAN_LIKE = "gauss"

    @classmethod
    def from_name(cls, name: str) -> "Kernel":
        for kernel in cls:
            if kernel.value == name:
                return kernel
        raise ValueError(f"unknown kernel {name!r}; expected one of rect|epan|gauss")


def kernel_evaluate(kernel: Kernel, t):
    """Evaluate a kernel at non-negative relative distance(s) ``t``.

    Accepts a scalar or an ndarray; returns the same shape. Values:
    rectangular is the indicator of [0, 1]; the Epanechnikov-like kernel is
    (1 - t^2/2) on [0, 1]; the Gaussian-like kernel is exp(-t^2/2) on [0, 1].
    All are zero for t > 1.

    Raises ValueError for negative or non-finite inputs.
    """
    arr = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("kernel argument must be finite and non-negative")
    inside = arr <= 1.0
    if kernel is Kernel.RECTANGULAR:
        out = inside.astype(np.float64)
    elif kernel is Kernel.EPANECHNIKOV_LIKE:
        out = np.where(inside, 1.0 - 0.5 * arr * arr, 0.0)
    elif kernel is Kernel.GAUSSIAN_LIKE:
        out = np.where(inside, np.exp(-0.5 * arr * arr), 0.0)
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unhandled kernel {kernel}")
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class KernelCheck:
    """One validated kernel condition."""

    name: str
    passed: bool
    worst_violation: float


@dataclass(frozen=True)
class KernelValidationReport:
    checks: tuple[KernelCheck, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def kernel_validate(kernel: Kernel, grid_size: int) -> KernelValidationReport:
    """Numerically check the four kernel conditions on a grid over [0, 1.5].

    The conditions: non-increasing, value 1 at zero, value >= 1/2 at one,
    and zero beyond one. Violations are reported with their worst observed
    magnitude rather than raised, so a report is always produced.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    ts = np.linspace(0.0, 1.5, grid_size)
    vals = kernel_evaluate(kernel, ts)

    increases = np.diff(vals)
    worst_increase = float(max(0.0, increases.max(initial=0.0)))

    at_zero = float(kernel_evaluate(kernel, 0.0))
    at_one = float(kernel_evaluate(kernel, 1.0))
    beyond = vals[ts > 1.0]
    worst_beyond = float(np.abs(beyond).max(initial=0.0))

    checks = (
        KernelCheck("non_increasing", worst_increase == 0.0, worst_increase),
        KernelCheck("unit_at_zero", at_zero == 1.0, abs(at_zero - 1.0)),
        KernelCheck("at_least_half_at_one", at_one >= 0.5, max(0.0, 0.5 - at_one)),
        KernelCheck("zero_beyond_one", worst_beyond == 0.0, worst_beyond),
    )
    return KernelValidationReport(checks)
