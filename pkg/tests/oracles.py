"""Reference computations used as test oracles.

Nothing here imports the statistics or ICL code under test; everything works
from dense count arrays and explicit loops.
"""
import itertools
import math

import numpy as np
from scipy import integrate
from scipy.special import gammaln


def set_partitions(n):
    """All set partitions of ``range(n)`` as restricted-growth label tuples."""
    def grow(prefix, k):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for label in range(k + 1):
            yield from grow(prefix + [label], max(k, label + 1))
    if n == 0:
        yield ()
        return
    yield from grow([0], 1)


def cells_by_block(dense, c, y, directed=True):
    """Map (k, g, d) -> list of cell counts, zeros included."""
    N, _, U = dense.shape
    K, D = max(c) + 1, max(y) + 1
    blocks = {}
    for k in range(K):
        for g in range(K):
            if not directed and g < k:
                continue
            for d in range(D):
                blocks[(k, g, d)] = []
    for i in range(N):
        for j in range(N):
            if not directed and j <= i:
                continue
            for u in range(U):
                k, g = c[i], c[j]
                if not directed:
                    k, g = min(k, g), max(k, g)
                blocks[(k, g, y[u])].append(int(dense[i, j, u]))
    return blocks


def brute_block_sums(dense, c, y, directed=True):
    blocks = cells_by_block(dense, c, y, directed)
    K, D = max(c) + 1, max(y) + 1
    S = np.zeros((K, K, D), dtype=np.int64)
    R = np.zeros((K, K, D), dtype=np.int64)
    for key, cells in blocks.items():
        S[key] = sum(cells)
        R[key] = len(cells)
    return S, R


def log_marginal_quadrature(cells, a, b, delta):
    """ln of integral over lam of prod Poisson(n; delta*lam) * Gamma(lam; a, b).

    Integrates in t = ln(lam) so the integrand is smooth for any a > 0.
    """
    cells = np.asarray(cells, dtype=np.float64)
    S, R = cells.sum(), cells.size

    def log_f(t):
        lam = math.exp(t)
        pois = float(np.sum(cells * math.log(delta * lam) - delta * lam - gammaln(cells + 1)))
        prior = a * math.log(b) - math.lgamma(a) + (a - 1) * t - b * lam
        return pois + prior + t

    # the integrand in t peaks at lam = (S + a) / (delta R + b)
    t_star = math.log((S + a) / (delta * R + b))
    width = 40.0 / math.sqrt(S + a)
    peak = log_f(t_star)
    value, _ = integrate.quad(lambda t: math.exp(log_f(t) - peak),
                              t_star - width, t_star + width,
                              points=[t_star], epsabs=0.0, epsrel=1e-12, limit=500)
    return peak + math.log(value)


def quadrature_log_emission(dense, c, y, a, b, delta, directed=True):
    blocks = cells_by_block(dense, c, y, directed)
    return math.fsum(log_marginal_quadrature(cells, a, b, delta)
                     for cells in blocks.values() if cells)


def dense_icl(dense, c, y, a=1.0, b=1.0, alpha=1.0, gamma=1.0, delta=1.0, directed=True):
    """Closed-form ICL written out directly from block cell lists."""
    total = 0.0
    for cells in cells_by_block(dense, c, y, directed).values():
        if not cells:
            continue
        S, R = sum(cells), len(cells)
        total += (a * math.log(b) - math.lgamma(a) + S * math.log(delta)
                  - sum(math.lgamma(n + 1) for n in cells)
                  + math.lgamma(S + a) - (S + a) * math.log(delta * R + b))
    for labels, conc in ((c, alpha), (y, gamma)):
        sizes = np.bincount(labels)
        K, n = sizes.size, len(labels)
        total += (math.lgamma(conc * K) - K * math.lgamma(conc)
                  + sum(math.lgamma(s + conc) for s in sizes) - math.lgamma(n + conc * K))
    return total


def exhaustive_max_icl(dense, directed=True, **hyper):
    N, _, U = dense.shape
    best = (-math.inf, None, None)
    for c in set_partitions(N):
        for y in set_partitions(U):
            value = dense_icl(dense, c, y, directed=directed, **hyper)
            if value > best[0]:
                best = (value, c, y)
    return best


def random_dense(rng, N, U, directed=True, max_count=5, density=0.5):
    dense = rng.integers(0, max_count + 1, size=(N, N, U))
    dense *= rng.random((N, N, U)) < density
    if not directed:
        dense *= np.triu(np.ones((N, N), dtype=np.int64), k=1)[:, :, None]
    return dense


def random_labels(rng, n, k):
    """Random compact labelling with at most ``k`` clusters."""
    raw = rng.integers(0, k, size=n)
    _, inv = np.unique(raw, return_inverse=True)
    return inv.ravel()


def all_pairs(iterable):
    return list(itertools.combinations(iterable, 2))
