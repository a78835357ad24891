"""Greedy ICL maximisation over node labels, time labels and cluster counts.

Each restart starts from a uniform random labelling into ``k_max`` node
clusters and ``d_max`` time clusters, then cycles through

1. a node sweep (best single-label change per node),
2. a time sweep (same for bins),
3. node merges, then
4. time merges,

until a whole cycle accepts nothing.  Moving the last member out of a cluster
is scored as a merge, so K and D can shrink during sweeps too.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .icl import (
    IclValue,
    RateEstimate,
    State,
    delta_icl_merge,
    icl,
    node_move_delta_from_profile,
    posterior_rates,
    time_move_delta_from_profile,
)
from .tensor import (
    Hyperparameters,
    InteractionTensor,
    Partition,
    bin_profile,
    compute_block_stats,
    node_profile,
)

log = logging.getLogger(__name__)

DRIFT_TOLERANCE = 1e-6


class IclDriftError(RuntimeError):
    """Incrementally tracked ICL disagrees with a full recomputation."""


@dataclass(frozen=True)
class SearchConfig:
    k_max: int = 10
    d_max: int = 10
    max_sweeps: int = 100
    improvement_epsilon: float = 1e-10
    num_restarts: int = 5
    seed: int = 0

    def __post_init__(self):
        for name in ("k_max", "d_max", "max_sweeps", "num_restarts"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.improvement_epsilon < 0:
            raise ValueError("improvement_epsilon must be >= 0")


@dataclass(frozen=True)
class TraceEntry:
    sweep: int
    kind: str  # node-move, time-move, node-merge, time-merge
    delta: float
    icl_after: float


@dataclass
class FitResult:
    node_partition: Partition
    time_partition: Partition
    icl: IclValue
    rates: RateEstimate
    trace: list[TraceEntry] = field(default_factory=list)
    restart_id: int = 0
    restart_icls: list[float] = field(default_factory=list)

    @property
    def K(self) -> int:
        return self.node_partition.n_clusters

    @property
    def D(self) -> int:
        return self.time_partition.n_clusters


class SearchState:
    """One restart's single-writer search loop."""

    def __init__(self, state: State, cfg: SearchConfig, rng: np.random.Generator):
        self.state = state
        self.cfg = cfg
        self.rng = rng
        self.current = state.icl().total
        self.sweep = 0
        self.trace: list[TraceEntry] = []

    def _accept(self, kind: str, delta: float):
        self.current += delta
        self.trace.append(TraceEntry(self.sweep, kind, delta, self.current))

    def _best(self, deltas: np.ndarray) -> int | None:
        # argmax returns the lowest index among ties
        best = int(np.argmax(deltas))
        if deltas[best] > self.cfg.improvement_epsilon:
            return best
        return None

    def node_sweep(self) -> bool:
        st = self.state
        improved = False
        for i in self.rng.permutation(st.tensor.num_nodes):
            K = st.K
            if K == 1:
                break
            source = int(st.c[i])
            singleton = st.stats.node_sizes[source] == 1
            profile = None if singleton else node_profile(st.tensor, st.c, st.y, i, K, st.D)
            deltas = np.full(K, -np.inf)
            for t in range(K):
                if t == source:
                    continue
                if singleton:
                    deltas[t] = delta_icl_merge(st, "node", t, source)
                else:
                    deltas[t] = node_move_delta_from_profile(st, i, t, profile)
            t = self._best(deltas)
            if t is not None:
                st.move_node(i, t)
                self._accept("node-merge" if singleton else "node-move", float(deltas[t]))
                improved = True
        return improved

    def time_sweep(self) -> bool:
        st = self.state
        improved = False
        for u in self.rng.permutation(st.tensor.num_bins):
            D = st.D
            if D == 1:
                break
            source = int(st.y[u])
            singleton = st.stats.time_sizes[source] == 1
            profile = None if singleton else bin_profile(st.tensor, st.c, u, st.K)
            deltas = np.full(D, -np.inf)
            for e in range(D):
                if e == source:
                    continue
                if singleton:
                    deltas[e] = delta_icl_merge(st, "time", e, source)
                else:
                    deltas[e] = time_move_delta_from_profile(st, u, e, profile)
            e = self._best(deltas)
            if e is not None:
                st.move_bin(u, e)
                self._accept("time-merge" if singleton else "time-move", float(deltas[e]))
                improved = True
        return improved

    def merge_phase(self, axis: str) -> bool:
        st = self.state
        improved = False
        while True:
            n = st.K if axis == "node" else st.D
            if n < 2:
                return improved
            pairs = [(j, l) for j in range(n) for l in range(j + 1, n)]
            deltas = np.array([delta_icl_merge(st, axis, j, l) for j, l in pairs])
            best = self._best(deltas)
            if best is None:
                return improved
            j, l = pairs[best]
            st.merge(axis, j, l)
            self._accept(f"{axis}-merge", float(deltas[best]))
            improved = True

    def run(self) -> float:
        while self.sweep < self.cfg.max_sweeps:
            improved = self.node_sweep()
            improved |= self.time_sweep()
            improved |= self.merge_phase("node")
            improved |= self.merge_phase("time")
            self.sweep += 1
            if not improved:
                break
        return self.current


def node_sweep(search: SearchState) -> tuple[SearchState, bool]:
    return search, search.node_sweep()


def time_sweep(search: SearchState) -> tuple[SearchState, bool]:
    return search, search.time_sweep()


def merge_phase(search: SearchState, axis: str) -> tuple[SearchState, bool]:
    return search, search.merge_phase(axis)


def random_labels(n: int, n_clusters: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random labels into ``n_clusters`` clusters, none of them empty."""
    labels = rng.integers(n_clusters, size=n)
    sizes = np.bincount(labels, minlength=n_clusters)
    for k in np.flatnonzero(sizes == 0):
        donors = np.flatnonzero(sizes[labels] > 1)
        i = rng.choice(donors)
        sizes[labels[i]] -= 1
        labels[i] = k
        sizes[k] += 1
    return labels


def _run_restart(tensor: InteractionTensor, h: Hyperparameters, cfg: SearchConfig,
                 restart_id: int, seed_seq: np.random.SeedSequence):
    rng = np.random.default_rng(seed_seq)
    k_max = min(cfg.k_max, tensor.num_nodes)
    d_max = min(cfg.d_max, tensor.num_bins)
    c = random_labels(tensor.num_nodes, k_max, rng)
    y = random_labels(tensor.num_bins, d_max, rng)
    search = SearchState(State(tensor, h, c, y), cfg, rng)
    search.run()
    log.debug("restart %d: K=%d D=%d icl=%.6f after %d sweeps", restart_id,
              search.state.K, search.state.D, search.current, search.sweep)
    return restart_id, search.state.c, search.state.y, search.current, search.trace


def _workers() -> int:
    value = os.environ.get("NSSBM_WORKERS", "1")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def greedy_fit(tensor: InteractionTensor, h: Hyperparameters = Hyperparameters(),
               cfg: SearchConfig = SearchConfig(), workers: int | None = None) -> FitResult:
    """Maximise the ICL over ``(c, y, K, D)`` by greedy search with restarts.

    Restarts use independent child seeds of ``cfg.seed`` and may run in
    ``workers`` processes (default: ``$NSSBM_WORKERS`` or 1); the result does
    not depend on the worker count.
    """
    if cfg.k_max > tensor.num_nodes or cfg.d_max > tensor.num_bins:
        log.info("clamping k_max/d_max to tensor size (%d, %d)", tensor.num_nodes, tensor.num_bins)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.num_restarts)
    workers = _workers() if workers is None else workers
    args = [(tensor, h, cfg, r, s) for r, s in enumerate(seeds)]
    if workers > 1 and cfg.num_restarts > 1:
        with ProcessPoolExecutor(max_workers=min(workers, cfg.num_restarts)) as pool:
            runs = list(pool.map(_run_restart, *zip(*args)))
    else:
        runs = [_run_restart(*a) for a in args]

    # ties go to the lowest restart id
    best = max(runs, key=lambda r: (r[3], -r[0]))
    restart_id, c, y, tracked, trace = best
    stats = compute_block_stats(tensor, c, y)
    value = icl(tensor, c, y, h)
    if not math.isclose(value.total, tracked, rel_tol=0.0, abs_tol=DRIFT_TOLERANCE):
        raise IclDriftError(f"tracked ICL {tracked!r} != recomputed {value.total!r}")
    return FitResult(
        node_partition=Partition(c),
        time_partition=Partition(y),
        icl=value,
        rates=posterior_rates(stats, h),
        trace=trace,
        restart_id=restart_id,
        restart_icls=[r[3] for r in runs],
    )
