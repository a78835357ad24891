"""Exact integrated classification likelihood and its incremental updates.

With Gamma(a, b) rate priors and symmetric Dirichlet label priors the
parameters integrate out in closed form.  Per block (k, g, d):

    a ln b - lnG(a) + S ln(delta) + lnG(S + a) - (S + a) ln(delta R + b)

summed over blocks, minus the sum of ln(N!) over tensor entries, gives the
emission term.  The label term is the Dirichlet-multinomial marginal of both
label vectors.  All sums go through :func:`math.fsum`, so values do not depend
on accumulation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .tensor import (
    BlockStats,
    EmptyClusterError,
    Hyperparameters,
    InteractionTensor,
    Mode,
    as_labels,
    bin_profile,
    compute_block_stats,
    merged_stats,
    node_profile,
    stats_after_node_move,
    stats_after_time_move,
)

__all__ = [
    "IclValue",
    "RateEstimate",
    "State",
    "block_terms",
    "delta_icl_merge",
    "delta_icl_node_move",
    "delta_icl_time_move",
    "icl",
    "log_emission",
    "log_label_prior",
    "posterior_rates",
    "time_cluster_mean_rates",
]


@dataclass(frozen=True)
class IclValue:
    total: float
    emission_term: float
    label_term: float


@dataclass(frozen=True)
class RateEstimate:
    """Posterior mean rates ``(S + a) / (delta R + b)``, shape (K, K, D).

    In undirected mode the lower triangle mirrors the upper one.
    """

    rates: np.ndarray


def block_terms(S, R, h: Hyperparameters) -> np.ndarray:
    """Per-block log marginal of the Poisson counts, without the ln(N!) part."""
    S = np.asarray(S, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    return (h.a * math.log(h.b) - math.lgamma(h.a) + S * math.log(h.delta)
            + gammaln(S + h.a) - (S + h.a) * np.log(h.delta * R + h.b))


def log_emission(stats: BlockStats, h: Hyperparameters) -> float:
    terms = block_terms(stats.S, stats.R, h)[stats.mask]
    return math.fsum(np.append(terms, -stats.log_fact_const))


def _dirichlet_part(sizes, conc: float) -> list[float]:
    sizes = np.asarray(sizes, dtype=np.float64)
    K = sizes.size
    n = sizes.sum()
    return [math.lgamma(conc * K), -K * math.lgamma(conc), -math.lgamma(n + conc * K),
            *gammaln(sizes + conc)]


def log_label_prior(node_sizes, time_sizes, h: Hyperparameters, N: int | None = None,
                    U: int | None = None) -> float:
    node_sizes = np.asarray(node_sizes)
    time_sizes = np.asarray(time_sizes)
    if np.any(node_sizes <= 0) or np.any(time_sizes <= 0):
        raise ValueError("cluster sizes must be positive")
    if N is not None and node_sizes.sum() != N:
        raise ValueError(f"node sizes sum to {node_sizes.sum()}, expected {N}")
    if U is not None and time_sizes.sum() != U:
        raise ValueError(f"time sizes sum to {time_sizes.sum()}, expected {U}")
    return math.fsum(_dirichlet_part(node_sizes, h.alpha) + _dirichlet_part(time_sizes, h.gamma))


def icl_from_stats(stats: BlockStats, h: Hyperparameters) -> IclValue:
    emission = log_emission(stats, h)
    label = log_label_prior(stats.node_sizes, stats.time_sizes, h)
    return IclValue(emission + label, emission, label)


def icl(tensor: InteractionTensor, c, y, h: Hyperparameters = Hyperparameters()) -> IclValue:
    """Exact ICL of the partition pair ``(c, y)``."""
    return icl_from_stats(compute_block_stats(tensor, c, y), h)


def posterior_rates(stats: BlockStats, h: Hyperparameters) -> RateEstimate:
    rates = (stats.S + h.a) / (h.delta * stats.R + h.b)
    if stats.mode is Mode.UNDIRECTED:
        upper = np.triu(np.ones((stats.K, stats.K), dtype=bool))[:, :, None]
        rates = np.where(upper, rates, rates.transpose(1, 0, 2))
    return RateEstimate(rates)


def time_cluster_mean_rates(S, R, h: Hyperparameters, mode) -> np.ndarray:
    """Cell-weighted mean posterior rate of each time cluster, shape (D,)."""
    S, R = np.asarray(S), np.asarray(R)
    keep = np.ones(S.shape[:2], dtype=bool)
    if Mode(mode) is Mode.UNDIRECTED:
        keep = np.triu(keep)
    rates = (S + h.a) / (h.delta * R + h.b)
    w = np.where(keep[:, :, None], R, 0)
    return (w * rates).sum(axis=(0, 1)) / np.maximum(w.sum(axis=(0, 1)), 1)


@dataclass
class State:
    """Mutable search state: labels plus their block statistics.

    ``c`` and ``y`` are always compact (clusters ``0..K-1`` all non-empty).
    Mutating methods keep ``stats`` in sync incrementally.
    """

    tensor: InteractionTensor
    h: Hyperparameters
    c: np.ndarray
    y: np.ndarray
    stats: BlockStats = field(init=False)

    def __post_init__(self):
        self.c = np.array(as_labels(self.c), dtype=np.int64)
        self.y = np.array(as_labels(self.y), dtype=np.int64)
        self.stats = compute_block_stats(self.tensor, self.c, self.y)

    @property
    def K(self) -> int:
        return self.stats.K

    @property
    def D(self) -> int:
        return self.stats.D

    def icl(self) -> IclValue:
        return icl_from_stats(self.stats, self.h)

    def move_node(self, i: int, target: int):
        source = int(self.c[i])
        if self.stats.node_sizes[source] == 1:
            self.merge("node", target, source)
            return
        self.stats = stats_after_node_move(self.stats, self.tensor, self.c, self.y, i, target)
        self.c[i] = target

    def move_bin(self, u: int, target: int):
        source = int(self.y[u])
        if self.stats.time_sizes[source] == 1:
            self.merge("time", target, source)
            return
        self.stats = stats_after_time_move(self.stats, self.tensor, self.c, self.y, u, target)
        self.y[u] = target

    def merge(self, axis: str, keep: int, drop: int):
        self.stats = merged_stats(self.stats, axis, keep, drop)
        labels = self.c if axis == "node" else self.y
        labels[labels == drop] = keep
        labels[labels > drop] -= 1


def _lgamma_diff(terms_new, terms_old) -> float:
    return math.fsum(np.concatenate([np.ravel(terms_new), -np.ravel(terms_old)]))


def _node_axis_mask(K: int, D: int, clusters, mode: Mode) -> np.ndarray:
    hit = np.zeros(K, dtype=bool)
    hit[list(clusters)] = True
    aff = hit[:, None] | hit[None, :]
    if mode is Mode.UNDIRECTED:
        aff &= np.triu(np.ones((K, K), dtype=bool))
    return np.broadcast_to(aff[:, :, None], (K, K, D))


def _time_axis_mask(stats: BlockStats, clusters) -> np.ndarray:
    aff = np.zeros(stats.S.shape, dtype=bool)
    aff[:, :, list(clusters)] = True
    return aff & stats.mask


def _emission_delta(old: BlockStats, new: BlockStats, old_aff, new_aff, h) -> float:
    return _lgamma_diff(block_terms(new.S[new_aff], new.R[new_aff], h),
                        block_terms(old.S[old_aff], old.R[old_aff], h))


def _move_label_delta(sizes, source: int, target: int, conc: float) -> float:
    ns, nt = float(sizes[source]), float(sizes[target])
    return math.fsum([math.lgamma(ns - 1 + conc), -math.lgamma(ns + conc),
                      math.lgamma(nt + 1 + conc), -math.lgamma(nt + conc)])


def node_move_delta_from_profile(state: State, i: int, target: int, profile) -> float:
    old = state.stats
    source = int(state.c[i])
    new = stats_after_node_move(old, state.tensor, state.c, state.y, i, target, profile=profile)
    aff = _node_axis_mask(old.K, old.D, (source, target), old.mode)
    return (_emission_delta(old, new, aff, aff, state.h)
            + _move_label_delta(old.node_sizes, source, target, state.h.alpha))


def delta_icl_node_move(state: State, i: int, target: int) -> float:
    """ICL change from moving node ``i`` to cluster ``target``.

    Raises :class:`EmptyClusterError` if ``i`` is alone in its cluster; use
    :func:`delta_icl_merge` for that case.
    """
    if target == state.c[i]:
        return 0.0
    if state.stats.node_sizes[state.c[i]] == 1:
        raise EmptyClusterError(f"node {i} is the only member of cluster {state.c[i]}")
    profile = node_profile(state.tensor, state.c, state.y, i, state.K, state.D)
    return node_move_delta_from_profile(state, i, target, profile)


def time_move_delta_from_profile(state: State, u: int, target: int, profile) -> float:
    old = state.stats
    source = int(state.y[u])
    new = stats_after_time_move(old, state.tensor, state.c, state.y, u, target, profile=profile)
    aff = _time_axis_mask(old, (source, target))
    return (_emission_delta(old, new, aff, aff, state.h)
            + _move_label_delta(old.time_sizes, source, target, state.h.gamma))


def delta_icl_time_move(state: State, u: int, target: int) -> float:
    if target == state.y[u]:
        return 0.0
    if state.stats.time_sizes[state.y[u]] == 1:
        raise EmptyClusterError(f"bin {u} is the only member of time cluster {state.y[u]}")
    profile = bin_profile(state.tensor, state.c, u, state.K)
    return time_move_delta_from_profile(state, u, target, profile)


def _merge_label_delta(sizes, keep: int, drop: int, conc: float) -> float:
    K = sizes.size
    n = float(sizes.sum())
    nk, nd = float(sizes[keep]), float(sizes[drop])
    return math.fsum([
        math.lgamma(conc * (K - 1)), -math.lgamma(conc * K),
        math.lgamma(conc),
        -math.lgamma(n + conc * (K - 1)), math.lgamma(n + conc * K),
        math.lgamma(nk + nd + conc), -math.lgamma(nk + conc), -math.lgamma(nd + conc),
    ])


def delta_icl_merge(state: State, axis: str, keep: int, drop: int) -> float:
    """ICL change from folding cluster ``drop`` into ``keep`` on ``axis``."""
    if keep == drop:
        raise ValueError("cannot merge a cluster with itself")
    old = state.stats
    new = merged_stats(old, axis, keep, drop)
    kept = keep if keep < drop else keep - 1
    if axis == "node":
        old_aff = _node_axis_mask(old.K, old.D, (keep, drop), old.mode)
        new_aff = _node_axis_mask(new.K, new.D, (kept,), new.mode)
        label = _merge_label_delta(old.node_sizes, keep, drop, state.h.alpha)
    else:
        old_aff = _time_axis_mask(old, (keep, drop))
        new_aff = _time_axis_mask(new, (kept,))
        label = _merge_label_delta(old.time_sizes, keep, drop, state.h.gamma)
    return _emission_delta(old, new, old_aff, new_aff, state.h) + label
