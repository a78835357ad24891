"""Sparse interaction tensor, partitions and block sufficient statistics.

The tensor stores counts ``N[i, j, u]`` of interactions between nodes ``i`` and
``j`` during time bin ``u``.  Given a node partition ``c`` (K clusters) and a
time partition ``y`` (D clusters), the block statistics are

    S[k, g, d] = sum of N[i, j, u] over c_i = k, c_j = g, y_u = d
    R[k, g, d] = number of (i, j, u) cells in that block

Two conventions are supported.  In directed mode every ordered pair, self
loops included, is a cell.  In undirected mode only unordered pairs ``i < j``
are cells; block counts are folded onto ``k <= g`` so that ``S`` is upper
triangular in its first two axes and ``R[k, k, d] = n_k (n_k - 1) / 2 * m_d``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np
from scipy.special import gammaln


class Mode(str, enum.Enum):
    DIRECTED = "directed"
    UNDIRECTED = "undirected"


class TensorError(ValueError):
    """Raised on out-of-range records or mode violations."""


class EmptyClusterError(ValueError):
    """A move would leave its source cluster empty.

    Callers are expected to evaluate the move as a merge instead.
    """


class EventRecord(NamedTuple):
    source: int
    target: int
    bin: int
    count: int


@dataclass(frozen=True)
class Hyperparameters:
    """Gamma(a, b) prior on block rates, symmetric Dirichlet(alpha) on node
    proportions, Dirichlet(gamma) on time proportions, and bin width delta."""

    a: float = 1.0
    b: float = 1.0
    alpha: float = 1.0
    gamma: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        for name in ("a", "b", "alpha", "gamma", "delta"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"hyperparameter {name} must be > 0, got {value!r}")


class InteractionTensor:
    """Sparse N x N x U count tensor.

    Entries are held as parallel int64 arrays (``source``, ``target``,
    ``bin``, ``count``) with strictly positive counts and unique keys.  Two
    CSR-style indices give the entries incident to a node and the entries of a
    time bin.
    """

    def __init__(self, num_nodes, num_bins, mode, source, target, bins, counts):
        self.num_nodes = int(num_nodes)
        self.num_bins = int(num_bins)
        self.mode = Mode(mode)
        self.source = np.array(source, dtype=np.int64)
        self.target = np.array(target, dtype=np.int64)
        self.bin = np.array(bins, dtype=np.int64)
        self.count = np.array(counts, dtype=np.int64)
        for arr in (self.source, self.target, self.bin, self.count):
            arr.setflags(write=False)
        self.total_count = int(self.count.sum())
        self.log_fact_const = _sum_log_factorials(self.count)
        self._build_indices()

    def _build_indices(self):
        n_entries = self.count.size
        ids = np.arange(n_entries, dtype=np.int64)
        # self loops are listed once for their node
        loops = self.source == self.target
        ends = np.concatenate([self.source, self.target[~loops]])
        owners = np.concatenate([ids, ids[~loops]])
        order = np.argsort(ends, kind="stable")
        self._node_entries = owners[order]
        self._node_ptr = np.zeros(self.num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(ends, minlength=self.num_nodes), out=self._node_ptr[1:])

        order = np.argsort(self.bin, kind="stable")
        self._bin_entries = ids[order]
        self._bin_ptr = np.zeros(self.num_bins + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.bin, minlength=self.num_bins), out=self._bin_ptr[1:])

    @property
    def nnz(self) -> int:
        return int(self.count.size)

    def node_entries(self, i: int) -> np.ndarray:
        """Indices of entries with ``i`` as source or target."""
        return self._node_entries[self._node_ptr[i]:self._node_ptr[i + 1]]

    def bin_entries(self, u: int) -> np.ndarray:
        return self._bin_entries[self._bin_ptr[u]:self._bin_ptr[u + 1]]

    @property
    def entries(self) -> dict[tuple[int, int, int], int]:
        return {
            (int(i), int(j), int(u)): int(n)
            for i, j, u, n in zip(self.source, self.target, self.bin, self.count)
        }

    def records(self) -> list[EventRecord]:
        return [EventRecord(*key, n) for key, n in self.entries.items()]

    def bin_totals(self) -> np.ndarray:
        return np.bincount(self.bin, weights=self.count, minlength=self.num_bins).astype(np.int64)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.num_nodes, self.num_nodes, self.num_bins), dtype=np.int64)
        out[self.source, self.target, self.bin] = self.count
        return out

    @classmethod
    def from_dense(cls, array, mode=Mode.DIRECTED) -> "InteractionTensor":
        array = np.asarray(array)
        if array.ndim != 3 or array.shape[0] != array.shape[1]:
            raise TensorError(f"expected an N x N x U array, got shape {array.shape}")
        if np.any(array < 0):
            raise TensorError("counts must be non-negative")
        mode = Mode(mode)
        if mode is Mode.UNDIRECTED:
            upper = np.triu(np.ones(array.shape[:2], dtype=bool), k=1)[:, :, None]
            if np.any(array[~np.broadcast_to(upper, array.shape)] != 0):
                raise TensorError("undirected dense input must be strictly upper triangular")
        i, j, u = np.nonzero(array)
        return cls(array.shape[0], array.shape[2], mode, i, j, u, array[i, j, u])

    def __repr__(self):
        return (f"InteractionTensor(num_nodes={self.num_nodes}, num_bins={self.num_bins}, "
                f"mode={self.mode.value}, nnz={self.nnz}, total_count={self.total_count})")


def _sum_log_factorials(counts: np.ndarray) -> float:
    if counts.size == 0:
        return 0.0
    values, multiplicity = np.unique(counts, return_counts=True)
    return float(np.dot(multiplicity, gammaln(values + 1.0)))


def build_tensor(records: Iterable, num_nodes: int, num_bins: int,
                 mode=Mode.UNDIRECTED) -> InteractionTensor:
    """Aggregate ``(source, target, bin, count)`` records into a tensor.

    Duplicate keys are summed; in undirected mode keys are first put in
    ``source < target`` order.  Zero-count records are dropped.
    """
    mode = Mode(mode)
    if num_nodes < 1 or num_bins < 1:
        raise TensorError("num_nodes and num_bins must be >= 1")
    acc: dict[tuple[int, int, int], int] = {}
    for rec in records:
        i, j, u, n = (int(v) for v in rec)
        if not (0 <= i < num_nodes and 0 <= j < num_nodes and 0 <= u < num_bins):
            raise TensorError(f"record {tuple(rec)} out of range for "
                              f"N={num_nodes}, U={num_bins}")
        if n < 0:
            raise TensorError(f"record {tuple(rec)} has a negative count")
        if mode is Mode.UNDIRECTED:
            if i == j:
                raise TensorError(f"record {tuple(rec)} is a self loop in undirected mode")
            if i > j:
                i, j = j, i
        if n:
            acc[(i, j, u)] = acc.get((i, j, u), 0) + n
    keys = sorted(acc)
    arr = np.array(keys, dtype=np.int64).reshape(-1, 3)
    counts = np.array([acc[k] for k in keys], dtype=np.int64)
    return InteractionTensor(num_nodes, num_bins, mode, arr[:, 0], arr[:, 1], arr[:, 2], counts)


@dataclass(frozen=True)
class Partition:
    """Compact labelling: values in ``0..n_clusters-1``, every cluster used."""

    labels: np.ndarray
    n_clusters: int = field(init=False)
    sizes: np.ndarray = field(init=False)

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("labels must be a non-empty 1-d vector")
        if labels.min() < 0:
            raise ValueError("labels must be non-negative")
        sizes = np.bincount(labels)
        if np.any(sizes == 0):
            raise ValueError("partition has empty clusters; relabel with Partition.compact")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "n_clusters", int(sizes.size))
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def compact(cls, labels) -> "Partition":
        """Relabel arbitrary labels to ``0..K-1`` in order of first appearance."""
        labels = np.asarray(labels)
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.argsort(np.argsort(first))
        return cls(rank[inverse.ravel()])

    def __len__(self):
        return self.labels.size


NodePartition = Partition
TimePartition = Partition


def as_labels(partition) -> np.ndarray:
    if isinstance(partition, Partition):
        return partition.labels
    labels = np.asarray(partition)
    if labels.ndim != 1 or labels.size == 0 or labels.min() < 0:
        raise ValueError("labels must be a non-empty 1-d vector of non-negative ints")
    if np.any(np.bincount(labels) == 0):
        raise ValueError("partition has empty clusters; relabel with Partition.compact")
    return labels


@dataclass
class BlockStats:
    """Sufficient statistics of a tensor under a (node, time) partition pair.

    ``S`` and ``R`` are int64 arrays of shape (K, K, D).  ``mask`` marks the
    blocks that carry cells (all of them in directed mode, ``k <= g`` in
    undirected mode).
    """

    S: np.ndarray
    R: np.ndarray
    node_sizes: np.ndarray
    time_sizes: np.ndarray
    log_fact_const: float
    mode: Mode

    @property
    def K(self) -> int:
        return int(self.node_sizes.size)

    @property
    def D(self) -> int:
        return int(self.time_sizes.size)

    @property
    def mask(self) -> np.ndarray:
        return block_mask(self.K, self.D, self.mode)

    def copy(self) -> "BlockStats":
        return BlockStats(self.S.copy(), self.R.copy(), self.node_sizes.copy(),
                          self.time_sizes.copy(), self.log_fact_const, self.mode)

    def __eq__(self, other):
        if not isinstance(other, BlockStats):
            return NotImplemented
        return (self.mode == other.mode
                and np.array_equal(self.S, other.S)
                and np.array_equal(self.R, other.R)
                and np.array_equal(self.node_sizes, other.node_sizes)
                and np.array_equal(self.time_sizes, other.time_sizes)
                and self.log_fact_const == other.log_fact_const)


def block_mask(K: int, D: int, mode) -> np.ndarray:
    if Mode(mode) is Mode.DIRECTED:
        return np.ones((K, K, D), dtype=bool)
    return np.broadcast_to(np.triu(np.ones((K, K), dtype=bool))[:, :, None], (K, K, D))


def block_volumes(node_sizes, time_sizes, mode) -> np.ndarray:
    n = np.asarray(node_sizes, dtype=np.int64)
    m = np.asarray(time_sizes, dtype=np.int64)
    pairs = np.outer(n, n)
    if Mode(mode) is Mode.UNDIRECTED:
        pairs = np.triu(pairs, k=1)
        pairs[np.diag_indices_from(pairs)] = n * (n - 1) // 2
    return pairs[:, :, None] * m[None, None, :]


def fold(S: np.ndarray) -> np.ndarray:
    """Fold (K, K, D) ordered block counts onto the upper triangle."""
    upper = np.triu(np.ones(S.shape[:2], dtype=bool), k=1)[:, :, None]
    out = np.where(upper, S + S.transpose(1, 0, 2), 0)
    idx = np.arange(S.shape[0])
    out[idx, idx] = S[idx, idx]
    return out


def _check_dims(tensor: InteractionTensor, c: np.ndarray, y: np.ndarray):
    if c.size != tensor.num_nodes:
        raise ValueError(f"node partition has length {c.size}, tensor has {tensor.num_nodes} nodes")
    if y.size != tensor.num_bins:
        raise ValueError(f"time partition has length {y.size}, tensor has {tensor.num_bins} bins")


def compute_block_stats(tensor: InteractionTensor, c, y) -> BlockStats:
    c, y = as_labels(c), as_labels(y)
    _check_dims(tensor, c, y)
    node_sizes = np.bincount(c)
    time_sizes = np.bincount(y)
    K, D = node_sizes.size, time_sizes.size
    k = c[tensor.source]
    g = c[tensor.target]
    if tensor.mode is Mode.UNDIRECTED:
        k, g = np.minimum(k, g), np.maximum(k, g)
    flat = (k * K + g) * D + y[tensor.bin]
    S = np.bincount(flat, weights=tensor.count, minlength=K * K * D)
    S = np.rint(S).astype(np.int64).reshape(K, K, D)
    R = block_volumes(node_sizes, time_sizes, tensor.mode)
    return BlockStats(S, R, node_sizes, time_sizes, tensor.log_fact_const, tensor.mode)


class NodeProfile(NamedTuple):
    """Counts incident to one node, aggregated by the other end's cluster.

    ``out[g, d]`` and ``inn[g, d]`` exclude self loops, which sit in
    ``loops[d]``.  In undirected mode ``inn`` and ``loops`` are zero and
    ``out`` holds all neighbour counts.
    """

    out: np.ndarray
    inn: np.ndarray
    loops: np.ndarray


def node_profile(tensor: InteractionTensor, c, y, i: int, K: int, D: int) -> NodeProfile:
    idx = tensor.node_entries(i)
    src, dst = tensor.source[idx], tensor.target[idx]
    d = y[tensor.bin[idx]]
    w = tensor.count[idx]
    loop = src == dst
    outgoing = (src == i) & ~loop
    incoming = (dst == i) & ~loop
    if tensor.mode is Mode.UNDIRECTED:
        other = np.where(src == i, dst, src)
        out = _bin2d(c[other] * D + d, w, K, D)
        zeros = np.zeros((K, D), dtype=np.int64)
        return NodeProfile(out, zeros, np.zeros(D, dtype=np.int64))
    out = _bin2d(c[dst[outgoing]] * D + d[outgoing], w[outgoing], K, D)
    inn = _bin2d(c[src[incoming]] * D + d[incoming], w[incoming], K, D)
    loops = np.bincount(d[loop], weights=w[loop], minlength=D)
    return NodeProfile(out, inn, np.rint(loops).astype(np.int64))


def _bin2d(flat, weights, K, D):
    return np.rint(np.bincount(flat, weights=weights, minlength=K * D)).astype(np.int64).reshape(K, D)


def apply_node_profile(S: np.ndarray, profile: NodeProfile, source: int, target: int,
                       mode) -> np.ndarray:
    """Return a copy of ``S`` with the profiled node moved from ``source`` to ``target``."""
    S = S.copy()
    K = S.shape[0]
    if Mode(mode) is Mode.UNDIRECTED:
        others = np.arange(K)
        S[np.minimum(source, others), np.maximum(source, others)] -= profile.out
        S[np.minimum(target, others), np.maximum(target, others)] += profile.out
        return S
    S[source] -= profile.out
    S[target] += profile.out
    S[:, source] -= profile.inn
    S[:, target] += profile.inn
    S[source, source] -= profile.loops
    S[target, target] += profile.loops
    return S


def stats_after_node_move(stats: BlockStats, tensor: InteractionTensor, c, y,
                          node: int, target: int, profile: NodeProfile | None = None) -> BlockStats:
    """Block statistics after moving ``node`` to cluster ``target``.

    Only the counts incident to ``node`` are touched, so the cost is the
    node's degree plus K*D.  Raises :class:`EmptyClusterError` when the node
    is the last member of its cluster.
    """
    c, y = np.asarray(c), np.asarray(y)
    source = int(c[node])
    if target == source:
        raise ValueError("target cluster equals the node's current cluster")
    if not 0 <= target < stats.K:
        raise ValueError(f"target cluster {target} out of range for K={stats.K}")
    if stats.node_sizes[source] == 1:
        raise EmptyClusterError(f"moving node {node} would empty cluster {source}")
    if profile is None:
        profile = node_profile(tensor, c, y, node, stats.K, stats.D)
    node_sizes = stats.node_sizes.copy()
    node_sizes[source] -= 1
    node_sizes[target] += 1
    S = apply_node_profile(stats.S, profile, source, target, stats.mode)
    R = block_volumes(node_sizes, stats.time_sizes, stats.mode)
    return BlockStats(S, R, node_sizes, stats.time_sizes.copy(), stats.log_fact_const, stats.mode)


def bin_profile(tensor: InteractionTensor, c, u: int, K: int) -> np.ndarray:
    """(K, K) block counts of the entries in time bin ``u``."""
    idx = tensor.bin_entries(u)
    k, g = c[tensor.source[idx]], c[tensor.target[idx]]
    if tensor.mode is Mode.UNDIRECTED:
        k, g = np.minimum(k, g), np.maximum(k, g)
    return _bin2d(k * K + g, tensor.count[idx], K, K)


def stats_after_time_move(stats: BlockStats, tensor: InteractionTensor, c, y,
                          bin: int, target: int, profile: np.ndarray | None = None) -> BlockStats:
    c, y = np.asarray(c), np.asarray(y)
    source = int(y[bin])
    if target == source:
        raise ValueError("target cluster equals the bin's current cluster")
    if not 0 <= target < stats.D:
        raise ValueError(f"target cluster {target} out of range for D={stats.D}")
    if stats.time_sizes[source] == 1:
        raise EmptyClusterError(f"moving bin {bin} would empty time cluster {source}")
    if profile is None:
        profile = bin_profile(tensor, c, bin, stats.K)
    time_sizes = stats.time_sizes.copy()
    time_sizes[source] -= 1
    time_sizes[target] += 1
    S = stats.S.copy()
    S[:, :, source] -= profile
    S[:, :, target] += profile
    R = block_volumes(stats.node_sizes, time_sizes, stats.mode)
    return BlockStats(S, R, stats.node_sizes.copy(), time_sizes, stats.log_fact_const, stats.mode)


def merged_stats(stats: BlockStats, axis: str, keep: int, drop: int) -> BlockStats:
    """Block statistics after folding cluster ``drop`` into ``keep`` on ``axis``.

    The returned arrays have the ``drop`` index removed, so cluster indices
    above ``drop`` shift down by one.
    """
    if keep == drop:
        raise ValueError("cannot merge a cluster with itself")
    S = stats.S.copy()
    node_sizes, time_sizes = stats.node_sizes.copy(), stats.time_sizes.copy()
    if axis == "node":
        S[keep] += S[drop]
        S[:, keep] += S[:, drop]
        S = np.delete(np.delete(S, drop, axis=0), drop, axis=1)
        if stats.mode is Mode.UNDIRECTED:
            S = fold(S)
        node_sizes[keep] += node_sizes[drop]
        node_sizes = np.delete(node_sizes, drop)
    elif axis == "time":
        S[:, :, keep] += S[:, :, drop]
        S = np.delete(S, drop, axis=2)
        time_sizes[keep] += time_sizes[drop]
        time_sizes = np.delete(time_sizes, drop)
    else:
        raise ValueError(f"axis must be 'node' or 'time', got {axis!r}")
    R = block_volumes(node_sizes, time_sizes, stats.mode)
    return BlockStats(S, R, node_sizes, time_sizes, stats.log_fact_const, stats.mode)
