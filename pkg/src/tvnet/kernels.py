"""Kernel weights, smoothed covariance, and reflection boundary correction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .panel import CovarianceSnapshot, TimeSeriesPanel

FAMILIES = ("uniform", "triangular", "epanechnikov")


@dataclass(frozen=True)
class KernelSpec:
    """A compactly supported symmetric kernel with bandwidth b in (0, 1)."""

    family: str
    bandwidth: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"kernel family {self.family!r} not one of {FAMILIES}")
        if not 0.0 < self.bandwidth < 1.0:
            raise ValueError(f"bandwidth {self.bandwidth} outside (0, 1)")


def kernel_eval(spec: KernelSpec, u) -> np.ndarray:
    """K(u): uniform 1/2, triangular (1-|u|)+, epanechnikov 0.75(1-u^2)+, all on [-1, 1]."""
    u = np.abs(np.asarray(u, dtype=float))
    inside = u <= 1.0
    if spec.family == "uniform":
        vals = 0.5 * inside
    elif spec.family == "triangular":
        vals = (1.0 - u) * inside
    else:
        vals = 0.75 * (1.0 - u * u) * inside
    return vals if vals.ndim else float(vals)


@dataclass(frozen=True)
class WeightVector:
    """Normalized kernel weights over the sampling grid, centered at t."""

    weights: np.ndarray
    t: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        if (w < 0).any():
            raise ValueError("negative kernel weight")
        object.__setattr__(self, "weights", w)


def _check_bandwidth(n: int, b: float) -> None:
    if not (1.0 / n < b < 0.5):
        raise ValueError(f"bandwidth {b} outside (1/n, 1/2) for n = {n}")


def kernel_weights(n: int, t: float, spec: KernelSpec) -> WeightVector:
    """w(t, i) = K_b(t_i, t) / sum_i' K_b(t_i', t) on the grid t_i = i/n."""
    _check_bandwidth(n, spec.bandwidth)
    ts = np.arange(1, n + 1) / n
    raw = kernel_eval(spec, (ts - t) / spec.bandwidth) / spec.bandwidth
    total = raw.sum()
    if total <= 0.0:
        raise ValueError(
            f"no grid point within bandwidth of t = {t} (b = {spec.bandwidth}, n = {n})"
        )
    return WeightVector(raw / total, t=t)


def _weighted_outer(X: np.ndarray, w: np.ndarray) -> np.ndarray:
    m = (X * w[:, None]).T @ X
    return (m + m.T) / 2.0


def smoothed_covariance(panel: TimeSeriesPanel, t: float, spec: KernelSpec) -> CovarianceSnapshot:
    """Kernel-weighted second moment Sigma_hat(t) = sum_i w(t, t_i) X_i X_i^T."""
    w = kernel_weights(panel.n, t, spec).weights
    return CovarianceSnapshot(
        _weighted_outer(panel.data, w), t=t, source="smoothed",
        bandwidth=spec.bandwidth, family=spec.family,
    )


def reflected_covariance(panel: TimeSeriesPanel, t: float, spec: KernelSpec,
                         changepoints) -> CovarianceSnapshot:
    """Smoothed covariance with samples mirrored about the nearest change point.

    ``changepoints`` are detected 1-based indices s_hat * n. A sample i enters
    as itself when (i - s)(round(t n) - s) >= 0 (same side as the evaluation
    time, with equality keeping the original), otherwise as its mirror image
    x_{2s - i}; mirrored indices are clamped to [1, n]. The caller decides when
    reflection applies; about a point farther than b from t it is a no-op.
    """
    cps = [int(c) for c in changepoints]
    if not cps:
        raise ValueError("reflected_covariance needs at least one change point")
    n = panel.n
    _check_bandwidth(n, spec.bandwidth)
    t_idx = int(round(t * n))
    s = min(cps, key=lambda c: (abs(c - t_idx), c))
    idx = np.arange(1, n + 1)
    same_side = (idx - s) * (t_idx - s) >= 0
    mirrored = np.clip(2 * s - idx, 1, n)
    rows = np.where(same_side, idx, mirrored) - 1
    w = kernel_weights(n, t, spec).weights
    return CovarianceSnapshot(
        _weighted_outer(panel.data[rows], w), t=t, source="reflected",
        bandwidth=spec.bandwidth, family=spec.family,
    )
