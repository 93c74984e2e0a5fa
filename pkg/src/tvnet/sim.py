"""Piecewise locally stationary panel simulator with exact ground truth.

The generating model is a vector moving average X_i = sum_m A_m(i) eps_{i-m}
with lag-decaying block-diagonal coefficients, a rank-one covariance jump
switched on between two change points, and a slow random walk of the lag-1
coefficients (two entries soft-thresholded and two incremented per step).
Innovations are standardized Student-t.

Everything is a pure function of (design); the design itself is a pure
function of its seed, so panels, covariances and graphs replay exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .clime import GraphEstimate
from .panel import CovarianceSnapshot, TimeSeriesPanel

SOFT_THRESHOLD = 0.05
INCREMENT = 0.03
EDITS_PER_STEP = 2
JUMP_COORDS = 20
COND_LIMIT = 1e12


class IllConditionedError(RuntimeError):
    """True covariance too ill-conditioned to invert reliably."""


def standardized_t_innovations(df, rows, cols, seed):
    """i.i.d. Student-t(df) draws scaled to unit variance.

    ``seed`` may be an int or a numpy Generator. df must exceed 2, otherwise
    the variance is infinite and no scaling exists.
    """
    if df <= 2:
        raise ValueError(f"df must exceed 2 for finite variance, got {df}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    scale = np.sqrt((df - 2.0) / df)
    return rng.standard_t(df, size=(rows, cols)) * scale


def _soft(v, thr):
    return np.sign(v) * max(abs(v) - thr, 0.0)


@dataclass(frozen=True)
class SimDesign:
    """Full specification of the generative model.

    The coefficient sequence is held implicitly: ``blocks[m-1]`` are the base
    5x5 diagonal blocks of B_m (m = 1..lag_cap), ``alpha`` the jump vector,
    and ``ev_thresh``/``ev_incr`` the per-step edit log of B_1 (block, row,
    col positions; -1 marks an unused slot). A_m(i) = (1+m)^-beta B_m(i),
    and A_0(i) = alpha alpha^T exactly on [change_points[0], change_points[1])
    in 1-based time indices.
    """

    n: int
    p: int
    delta0: float
    seed: int
    lag_cap: int
    beta: float
    block_size: int
    df: int
    change_points: tuple
    alpha: np.ndarray
    blocks: np.ndarray
    ev_thresh: np.ndarray
    ev_incr: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "blocks", "ev_thresh", "ev_incr"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "change_points", tuple(int(c) for c in self.change_points))
        cp1, cp2 = self.change_points
        if not (2 <= cp1 < cp2 <= self.n + 1):
            raise ValueError(f"change points {self.change_points} outside 2..{self.n + 1}")

    @property
    def n_blocks(self) -> int:
        return self.p // self.block_size

    def lag_decay(self, m: int) -> float:
        return (1.0 + m) ** (-self.beta)

    def b1_blocks_at(self, i: int) -> np.ndarray:
        """Blocks of B_1(i) obtained by replaying the edit log up to step i."""
        if not 1 <= i <= self.n:
            raise IndexError(f"time index {i} outside 1..{self.n}")
        b1 = self.blocks[0].copy()
        for step in range(i - 1):
            self._apply_step(b1, step)
        return b1

    def _apply_step(self, b1: np.ndarray, step: int) -> None:
        for b, r, c in self.ev_thresh[step]:
            if b >= 0:
                b1[b, r, c] = _soft(b1[b, r, c], SOFT_THRESHOLD)
        for b, r, c in self.ev_incr[step]:
            if b >= 0:
                b1[b, r, c] += INCREMENT

    def jump_active(self, i: int) -> bool:
        return self.change_points[0] <= i < self.change_points[1]

    def a0_matrix(self, i: int) -> np.ndarray:
        """A_0(i): zero before/after the jump interval, alpha alpha^T inside."""
        if not 1 <= i <= self.n:
            raise IndexError(f"time index {i} outside 1..{self.n}")
        if self.jump_active(i):
            return np.outer(self.alpha, self.alpha)
        return np.zeros((self.p, self.p))

    @cached_property
    def _jump_gram(self) -> np.ndarray:
        # A_0 A_0^T with A_0 = alpha alpha^T, i.e. (alpha^T alpha) alpha alpha^T
        return float(self.alpha @ self.alpha) * np.outer(self.alpha, self.alpha)

    def jump_matrix(self, which: int) -> np.ndarray:
        """Covariance discontinuity Sigma(t) - Sigma(t-) at change point 1 or 2."""
        if which not in (1, 2):
            raise ValueError("change point number must be 1 or 2")
        return self._jump_gram if which == 1 else -self._jump_gram

    @cached_property
    def _tail_gram_blocks(self) -> np.ndarray:
        # sum_{m>=2} (1+m)^{-2 beta} B_m B_m^T, blockwise (B_m constant in i)
        ms = np.arange(2, self.lag_cap + 1)
        w = (1.0 + ms) ** (-2.0 * self.beta)
        tail = self.blocks[1:]
        return np.einsum("m,mbij,mbkj->bik", w, tail, tail, optimize=True)

    def _dense_from_blocks(self, gram_blocks: np.ndarray) -> np.ndarray:
        bs = self.block_size
        out = np.zeros((self.p, self.p))
        for b in range(self.n_blocks):
            out[b * bs:(b + 1) * bs, b * bs:(b + 1) * bs] = gram_blocks[b]
        return out

    def to_json(self, path=None) -> str:
        """Replayable JSON: constructor parameters plus derived fields.

        Blocks and the edit log regenerate bit-identically from the seed, so
        only the scalars, alpha and change points are stored.
        """
        doc = {
            "n": self.n,
            "p": self.p,
            "delta0": self.delta0,
            "seed": self.seed,
            "lag_cap": self.lag_cap,
            "beta": self.beta,
            "block_size": self.block_size,
            "df": self.df,
            "change_points": list(self.change_points),
            "alpha": self.alpha.tolist(),
        }
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, path) -> "SimDesign":
        doc = json.loads(Path(path).read_text())
        design = build_sim_design(
            doc["n"], doc["p"], doc["delta0"], doc["seed"],
            lag_cap=doc["lag_cap"], beta=doc["beta"],
            block_size=doc["block_size"], df=doc["df"],
            change_points=tuple(doc["change_points"]),
        )
        if not np.array_equal(design.alpha, np.asarray(doc["alpha"], dtype=float)):
            raise ValueError("stored alpha does not match the seed-regenerated design")
        return design


def build_sim_design(n, p, delta0, seed, *, lag_cap=100, beta=1.0, block_size=5,
                     df=8, change_points=None) -> SimDesign:
    """Draw the base blocks and the B_1 edit log for the generative model.

    Change points default to round(0.3 n) and round(0.65 n). The design and
    the panel innovations use independent streams spawned from the one seed.
    """
    if p % block_size != 0 or p <= 0:
        raise ValueError(f"p = {p} must be a positive multiple of block_size = {block_size}")
    if p < JUMP_COORDS:
        raise ValueError(f"p = {p} smaller than the {JUMP_COORDS}-coordinate jump support")
    if n < 100:
        raise ValueError(f"n = {n} too small; change points would collide with boundaries")
    if delta0 <= 0:
        raise ValueError(f"delta0 must be positive, got {delta0}")

    if change_points is None:
        change_points = (int(0.30 * n + 0.5), int(0.65 * n + 0.5))

    design_ss, _ = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(design_ss)

    nb = p // block_size
    blocks = rng.standard_normal((lag_cap, nb, block_size, block_size))

    alpha = np.zeros(p)
    alpha[:JUMP_COORDS] = delta0

    # Replay the B_1 random walk once to record the edit log: at each step two
    # currently nonzero entries are soft-thresholded (fewer if the support is
    # short), then two positions from the full block support are incremented.
    b1 = blocks[0].copy()
    flat = b1.reshape(-1)
    total = flat.size
    ev_thresh = np.full((n - 1, EDITS_PER_STEP, 3), -1, dtype=np.int64)
    ev_incr = np.full((n - 1, EDITS_PER_STEP, 3), -1, dtype=np.int64)
    shape = b1.shape
    for step in range(n - 1):
        support = np.flatnonzero(flat)
        k = min(EDITS_PER_STEP, support.size)
        if k:
            chosen = rng.choice(support, size=k, replace=False)
            for slot, idx in enumerate(chosen):
                pos = np.unravel_index(idx, shape)
                ev_thresh[step, slot] = pos
                flat[idx] = _soft(flat[idx], SOFT_THRESHOLD)
        chosen = rng.choice(total, size=EDITS_PER_STEP, replace=False)
        for slot, idx in enumerate(chosen):
            pos = np.unravel_index(idx, shape)
            ev_incr[step, slot] = pos
            flat[idx] += INCREMENT

    return SimDesign(
        n=n, p=p, delta0=float(delta0), seed=int(seed), lag_cap=lag_cap,
        beta=float(beta), block_size=block_size, df=df,
        change_points=change_points, alpha=alpha, blocks=blocks,
        ev_thresh=ev_thresh, ev_incr=ev_incr,
    )


def simulate_panel(design: SimDesign) -> TimeSeriesPanel:
    """Generate the n x p panel. Burn-in innovations make X_1 a full lag window."""
    n, p, M = design.n, design.p, design.lag_cap
    nb, bs = design.n_blocks, design.block_size
    _, panel_ss = np.random.SeedSequence(design.seed).spawn(2)
    rng = np.random.default_rng(panel_ss)
    eps = standardized_t_innovations(design.df, n + M, p, rng)

    X = np.zeros((n, p))

    # m >= 2: constant block-diagonal coefficients, one shifted product per lag
    eps_b = eps.reshape(n + M, nb, bs)
    acc = np.zeros((n, nb, bs))
    for m in range(2, M + 1):
        sh = eps_b[M - m:M - m + n]
        acc += design.lag_decay(m) * np.einsum(
            "bij,nbj->nbi", design.blocks[m - 1], sh, optimize=True
        )
    X += acc.reshape(n, p)

    # m = 1: evolving blocks, sequential replay
    b1 = design.blocks[0].copy()
    d1 = design.lag_decay(1)
    for i in range(1, n + 1):
        if i >= 2:
            design._apply_step(b1, i - 2)
        v = eps_b[i + M - 2]
        X[i - 1] += d1 * np.einsum("bij,bj->bi", b1, v).reshape(p)

    # m = 0: rank-one jump, active on [cp1, cp2)
    cp1, cp2 = design.change_points
    lo, hi = cp1, min(cp2 - 1, n)
    if lo <= hi:
        seg = eps[lo + M - 1:hi + M]
        X[lo - 1:hi] += np.outer(seg @ design.alpha, design.alpha)

    return TimeSeriesPanel(X)


def true_covariance(design: SimDesign, i: int) -> CovarianceSnapshot:
    """Exact Sigma(t_i) = sum_m A_m(i) A_m(i)^T (innovations have unit variance)."""
    if not 1 <= i <= design.n:
        raise IndexError(f"time index {i} outside 1..{design.n}")
    d1 = design.lag_decay(1)
    b1 = design.b1_blocks_at(i)
    gram = design._tail_gram_blocks + d1 * d1 * np.einsum("bij,bkj->bik", b1, b1)
    sigma = design._dense_from_blocks(gram)
    if design.jump_active(i):
        sigma = sigma + design._jump_gram
    sigma = (sigma + sigma.T) / 2.0
    return CovarianceSnapshot(sigma, t=i / design.n, source="true")


def graph_from_covariance(sigma: np.ndarray, t: float, u: float) -> GraphEstimate:
    """Invert a covariance and threshold strictly: adjacency 1{|omega_jk| > u}."""
    sigma = np.asarray(sigma, dtype=float)
    cond = np.linalg.cond(sigma)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedError(
            f"covariance at t = {t} has condition number {cond:.3e} > {COND_LIMIT:.0e}"
        )
    omega = np.linalg.inv(sigma)
    omega = (omega + omega.T) / 2.0
    return GraphEstimate(adjacency=np.abs(omega) > u, t=t, u=float(u))


def true_graph(design: SimDesign, i: int, u: float) -> GraphEstimate:
    """Significant-edge truth at level u from the exact covariance."""
    return graph_from_covariance(true_covariance(design, i).matrix, i / design.n, u)
