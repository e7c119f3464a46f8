"""Brute-force reference computations used as test oracles.

Everything here is deliberately naive (explicit loops, exhaustive
enumeration) and shares no code with the package.
"""

import itertools
import math


def distances(X):
    n = len(X)
    return [[math.sqrt(sum((a - b) ** 2 for a, b in zip(X[i], X[j]))) for j in range(n)] for i in range(n)]


def _is_spanning_tree(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def min_spanning_tree(n, weights):
    """Exhaustive MST over the allowed edges ``{(i, j): w}`` (``i < j``)."""
    best, best_w = None, math.inf
    for subset in itertools.combinations(sorted(weights), n - 1):
        if _is_spanning_tree(n, subset):
            total = sum(weights[e] for e in subset)
            if total < best_w:
                best, best_w = set(subset), total
    return best, best_w


def knn_edges(d, k):
    n = len(d)
    out = set()
    for i in range(n):
        others = sorted((j for j in range(n) if j != i), key=lambda j: (d[i][j], j))
        for j in others[:k]:
            out.add((min(i, j), max(i, j)))
    return out


def rank_matrix(y):
    n = len(y)
    R = [[None] * n for _ in range(n)]
    for i in range(n):
        others = sorted((j for j in range(n) if j != i), key=lambda j: (abs(y[j] - y[i]), j))
        for r, j in enumerate(others, start=1):
            R[i][j] = (r - 1) / n
    return R


def placements(counts):
    """All label vectors with the given cluster sizes (multinomial placements)."""
    n = sum(counts)

    def rec(free, s):
        if s == len(counts):
            yield {}
            return
        for chosen in itertools.combinations(free, counts[s]):
            rest = [i for i in free if i not in chosen]
            for tail in rec(rest, s + 1):
                tail = dict(tail)
                tail.update({i: s for i in chosen})
                yield tail

    for assign in rec(list(range(n)), 0):
        yield [assign[i] for i in range(n)]


def within_sums(edges, R, labels, n_clusters):
    T = [0.0] * n_clusters
    for i, j in edges:
        if labels[i] == labels[j]:
            T[labels[i]] += R[i][j]
    return T


def enumerate_moments(edges, R, counts):
    """Mean vector and covariance matrix of ``T`` over all placements, plus every ``V``."""
    n_clusters = len(counts)
    samples = [within_sums(edges, R, lab, n_clusters) for lab in placements(counts)]
    m = len(samples)
    mean = [sum(s[a] for s in samples) / m for a in range(n_clusters)]
    cov = [
        [sum((s[a] - mean[a]) * (s[b] - mean[b]) for s in samples) / m for b in range(n_clusters)]
        for a in range(n_clusters)
    ]
    totals = [sum(s) for s in samples]
    return mean, cov, totals


def neighbourhood(edges, focal):
    """``A`` and ``B`` edge sets of ``focal`` by direct search over ordered edges."""
    A = [e for e in edges if set(e) & set(focal)]
    nodes_a = {v for e in A for v in e}
    B = [e for e in edges if set(e) & nodes_a]
    return A, B
