"""Sampling from the non-stationary SBM.

Labels are i.i.d. categorical draws and each cell ``(i, j, u)`` is
``Poisson(delta * rates[c_i, c_j, y_u])``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import InteractionTensor, Mode


@dataclass(frozen=True)
class GenerativeSpec:
    num_nodes: int
    num_bins: int
    rates: np.ndarray
    node_weights: np.ndarray | None = None
    time_weights: np.ndarray | None = None
    delta: float = 1.0
    seed: int = 0
    mode: Mode = Mode.DIRECTED

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=np.float64)
        if rates.ndim != 3 or rates.shape[0] != rates.shape[1]:
            raise ValueError(f"rates must have shape (K, K, D), got {rates.shape}")
        if not np.all(rates > 0):
            raise ValueError("all rates must be > 0")
        K, _, D = rates.shape
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "node_weights", _simplex(self.node_weights, K, "node_weights"))
        object.__setattr__(self, "time_weights", _simplex(self.time_weights, D, "time_weights"))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.num_nodes < 1 or self.num_bins < 1:
            raise ValueError("num_nodes and num_bins must be >= 1")

    @property
    def K(self) -> int:
        return self.rates.shape[0]

    @property
    def D(self) -> int:
        return self.rates.shape[2]


def _simplex(weights, n: int, name: str) -> np.ndarray:
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"{name} must have length {n}")
    if np.any(w < 0) or not np.isclose(w.sum(), 1.0, atol=1e-9):
        raise ValueError(f"{name} must be a probability vector")
    return w


def additive_rates(s1, s2, s3) -> np.ndarray:
    """``rates[k, g, l] = s1[k] + s2[g] + s3[l]``.

    ``s1`` and ``s2`` both index node clusters and must have the same length.
    """
    s1, s2, s3 = (np.asarray(s, dtype=np.float64).ravel() for s in (s1, s2, s3))
    if s1.size != s2.size:
        raise ValueError(f"s1 and s2 index node clusters; lengths {s1.size} != {s2.size}")
    if min(s1.size, s3.size) == 0:
        raise ValueError("empty rate component")
    grid = s1[:, None, None] + s2[None, :, None] + s3[None, None, :]
    if not np.all(grid > 0):
        raise ValueError("additive rates must all be > 0")
    return grid


def sample_partition(n: int, weights, seed=None) -> np.ndarray:
    """Raw i.i.d. categorical labels; clusters may come out empty."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights = np.asarray(weights, dtype=np.float64)
    return rng.choice(weights.size, size=n, p=weights / weights.sum())


def simulate_tensor(spec: GenerativeSpec, c, y, seed=None) -> InteractionTensor:
    c, y = np.asarray(c, dtype=np.int64), np.asarray(y, dtype=np.int64)
    if c.shape != (spec.num_nodes,) or y.shape != (spec.num_bins,):
        raise ValueError("label vectors do not match num_nodes / num_bins")
    if c.max() >= spec.K or y.max() >= spec.D or c.min() < 0 or y.min() < 0:
        raise ValueError("labels out of range of the rate grid")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(
        spec.seed if seed is None else seed)
    means = spec.delta * spec.rates[c[:, None, None], c[None, :, None], y[None, None, :]]
    counts = rng.poisson(means)
    if spec.mode is Mode.UNDIRECTED:
        counts *= np.triu(np.ones((spec.num_nodes,) * 2, dtype=np.int64), k=1)[:, :, None]
    return InteractionTensor.from_dense(counts, spec.mode)


def simulate(spec: GenerativeSpec, c=None, y=None):
    """Draw labels (unless given) and a tensor from ``spec``.

    Returns ``(tensor, c, y)``.  Child streams of ``spec.seed`` drive the
    node labels, time labels and counts separately, so passing fixed labels
    does not change the count stream.
    """
    node_ss, time_ss, count_ss = np.random.SeedSequence(spec.seed).spawn(3)
    if c is None:
        c = sample_partition(spec.num_nodes, spec.node_weights, np.random.default_rng(node_ss))
    if y is None:
        y = sample_partition(spec.num_bins, spec.time_weights, np.random.default_rng(time_ss))
    tensor = simulate_tensor(spec, c, y, np.random.default_rng(count_ss))
    return tensor, np.asarray(c), np.asarray(y)
