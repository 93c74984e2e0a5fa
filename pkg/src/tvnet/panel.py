"""Core data containers: observation panels and covariance snapshots.

Index conventions used across the package: sample/time indices i are 1-based
with sampling grid t_i = i/n (so CSV row i holds the observation at t_i);
matrix coordinates (rows/columns of covariance, precision and adjacency
matrices) are 0-based numpy indices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SYM_TOL = 1e-12


@dataclass(frozen=True)
class TimeSeriesPanel:
    """n x p observation matrix sampled on the uniform grid t_i = i/n."""

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(np.asarray(self.data, dtype=float))
        if data.ndim != 2:
            raise ValueError(f"panel must be 2-D, got shape {data.shape}")
        if data.shape[0] < 2 or data.shape[1] < 2:
            raise ValueError(f"panel needs n >= 2 and p >= 2, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("panel contains non-finite entries")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    def times(self) -> np.ndarray:
        """The sampling grid t_i = i/n, i = 1..n."""
        return np.arange(1, self.n + 1) / self.n

    def row(self, i: int) -> np.ndarray:
        """Observation X_i for a 1-based time index."""
        if not 1 <= i <= self.n:
            raise IndexError(f"time index {i} outside 1..{self.n}")
        return self.data[i - 1]

    def to_csv(self, path) -> None:
        """Headerless CSV, row i = observation at t_i; round-trips exactly."""
        np.savetxt(path, self.data, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "TimeSeriesPanel":
        return cls(np.loadtxt(path, delimiter=",", ndmin=2))


@dataclass(frozen=True)
class CovarianceSnapshot:
    """A p x p symmetric covariance estimate (or truth) tagged with its time.

    ``source`` is one of {"true", "smoothed", "reflected"}; ``bandwidth`` and
    ``family`` record the kernel used for the smoothed/reflected variants.
    """

    matrix: np.ndarray
    t: float
    source: str
    bandwidth: float | None = None
    family: str | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"covariance must be square, got {m.shape}")
        asym = np.abs(m - m.T).max() if m.size else 0.0
        if asym > SYM_TOL:
            raise ValueError(f"covariance asymmetric by {asym:.3e} (> {SYM_TOL})")
        if self.source not in ("true", "smoothed", "reflected"):
            raise ValueError(f"unknown source {self.source!r}")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t = {self.t} outside [0, 1]")
        object.__setattr__(self, "matrix", m)

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    def export(self, csv_path, sidecar_path=None) -> None:
        """p x p CSV plus a JSON sidecar {t, b, family, source}."""
        np.savetxt(csv_path, self.matrix, delimiter=",", fmt="%.17g")
        if sidecar_path is not None:
            meta = {
                "t": self.t,
                "b": self.bandwidth,
                "family": self.family,
                "source": self.source,
            }
            Path(sidecar_path).write_text(
                json.dumps(meta, sort_keys=True, indent=2) + "\n"
            )
