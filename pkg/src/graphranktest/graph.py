"""Similarity graphs on the covariate space.

Graphs are stored as sets of *ordered* pairs: every undirected similarity
edge ``{i, j}`` appears as both ``(i, j)`` and ``(j, i)``. The rank-based
statistics pair ``R_i(j)`` with ``R_j(i)`` edge by edge, so both
orientations are needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.spatial.distance import pdist, squareform


class DisconnectedGraphError(ValueError):
    """Raised when the residual graph cannot yield another spanning tree."""

    def __init__(self, round_index: int, k: int):
        self.round_index = round_index
        self.k = k
        super().__init__(
            f"residual graph is disconnected in round {round_index} of {k}; "
            f"cannot extract {k} edge-disjoint spanning trees"
        )


@dataclass(frozen=True)
class SimilarityGraph:
    """Undirected similarity graph stored as sorted ordered pairs.

    ``edges`` is an ``(2m, 2)`` integer array; row ``(i, j)`` is present
    iff ``(j, i)`` is.
    """

    n: int
    edges: np.ndarray
    kind: str = "custom"
    k: int | None = None
    _adjacency: list = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.edges.setflags(write=False)

    @property
    def tails(self) -> np.ndarray:
        return self.edges[:, 0]

    @property
    def heads(self) -> np.ndarray:
        return self.edges[:, 1]

    @property
    def n_edges(self) -> int:
        """Number of ordered pairs."""
        return len(self.edges)

    @property
    def undirected_edge_count(self) -> int:
        return len(self.edges) // 2

    @property
    def adjacency(self) -> list[np.ndarray]:
        """Out-neighbours of each node (sorted)."""
        if self._adjacency is None:
            splits = np.searchsorted(self.tails, np.arange(1, self.n))
            object.__setattr__(self, "_adjacency", np.split(self.heads, splits))
        return self._adjacency

    def undirected_edges(self) -> np.ndarray:
        """Unordered edges as ``(i, j)`` rows with ``i < j``."""
        return self.edges[self.tails < self.heads]

    def relabel(self, perm) -> "SimilarityGraph":
        """Graph with node ``i`` renamed to ``perm[i]``."""
        perm = np.asarray(perm)
        return from_undirected(self.n, perm[self.undirected_edges()], self.kind, self.k)

    def meta(self) -> dict:
        return {
            "type": self.kind,
            "k": self.k,
            "n_ordered_edges": self.n_edges,
            "n_undirected_edges": self.undirected_edge_count,
        }


def from_undirected(n: int, pairs, kind: str = "custom", k: int | None = None) -> SimilarityGraph:
    """Build a :class:`SimilarityGraph` from unordered node pairs.

    Duplicates (in either orientation) are merged; self-loops are rejected.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) and (pairs.min() < 0 or pairs.max() >= n):
        raise ValueError(f"edge endpoints must lie in 0..{n - 1}")
    if np.any(pairs[:, 0] == pairs[:, 1]):
        raise ValueError("self-loops are not allowed")
    both = np.concatenate([pairs, pairs[:, ::-1]])
    both = np.unique(both, axis=0) if len(both) else both.reshape(0, 2)
    return SimilarityGraph(n=n, edges=np.ascontiguousarray(both), kind=kind, k=k)


def compute_distances(X) -> np.ndarray:
    """Euclidean interpoint distance matrix of the rows of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("X must be a 2-D array (N x p)")
    if X.shape[0] < 2 or X.shape[1] < 1:
        raise ValueError(f"need N >= 2 rows and p >= 1 columns, got shape {X.shape}")
    bad = ~np.isfinite(X).all(axis=1)
    if bad.any():
        raise ValueError(f"non-finite entries in X at row {int(np.flatnonzero(bad)[0])}")
    return squareform(pdist(X))


def check_distance_matrix(d, atol: float = 1e-9) -> np.ndarray:
    """Validate a precomputed distance matrix and return it as float array."""
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {d.shape}")
    if d.shape[0] < 2:
        raise ValueError("distance matrix needs at least 2 observations")
    if not np.isfinite(d).all():
        row = int(np.flatnonzero(~np.isfinite(d).all(axis=1))[0])
        raise ValueError(f"non-finite distance in row {row}")
    if (d < 0).any():
        raise ValueError("distances must be nonnegative")
    if not np.allclose(d, d.T, rtol=0, atol=atol):
        raise ValueError("distance matrix must be symmetric")
    if np.abs(np.diag(d)).max() > atol:
        raise ValueError("distance matrix must have a zero diagonal")
    return d


@numba.njit(cache=True)
def _edge_less(w1, a1, b1, w2, a2, b2):
    # strict total order: weight, then (min index, max index)
    if w1 != w2:
        return w1 < w2
    lo1, hi1 = min(a1, b1), max(a1, b1)
    lo2, hi2 = min(a2, b2), max(a2, b2)
    if lo1 != lo2:
        return lo1 < lo2
    return hi1 < hi2


@numba.njit(cache=True)
def _prim(d, removed):
    """Dense Prim; returns parent array, or parent[0] = -2 if disconnected."""
    n = d.shape[0]
    in_tree = np.zeros(n, dtype=np.bool_)
    key = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    in_tree[0] = True
    for v in range(1, n):
        if not removed[0, v]:
            key[v] = d[0, v]
            parent[v] = 0
    for _ in range(n - 1):
        best = -1
        for v in range(n):
            if in_tree[v] or parent[v] < 0:
                continue
            if best < 0 or _edge_less(key[v], parent[v], v, key[best], parent[best], best):
                best = v
        if best < 0:
            parent[0] = -2
            return parent
        in_tree[best] = True
        for v in range(n):
            if in_tree[v] or removed[best, v]:
                continue
            if parent[v] < 0 or _edge_less(d[best, v], best, v, key[v], parent[v], v):
                key[v] = d[best, v]
                parent[v] = best
    return parent


def minimum_spanning_tree(dm, removed=None) -> np.ndarray:
    """Unique MST under the (weight, min index, max index) order.

    ``removed`` is a boolean mask of forbidden pairs. Returns the tree as an
    ``(n - 1, 2)`` array of unordered pairs ``(i, j)``, ``i < j``, or raises
    :class:`DisconnectedGraphError` (round 1) if no spanning tree exists.
    """
    dm = np.ascontiguousarray(dm, dtype=float)
    n = dm.shape[0]
    if removed is None:
        removed = np.eye(n, dtype=bool)
    parent = _prim(dm, np.ascontiguousarray(removed))
    if parent[0] == -2:
        raise DisconnectedGraphError(1, 1)
    child = np.arange(1, n)
    par = parent[1:]
    return np.column_stack([np.minimum(child, par), np.maximum(child, par)])


def kmst_trees(dm, k: int) -> list[np.ndarray]:
    """The ``k`` successive edge-disjoint minimum spanning trees."""
    dm = np.ascontiguousarray(dm, dtype=float)
    n = dm.shape[0]
    if k < 1:
        raise ValueError("k must be a positive integer")
    if n < 2:
        raise ValueError("need at least 2 nodes")
    if k * (n - 1) > n * (n - 1) // 2:
        raise ValueError(
            f"a {k}-MST on {n} nodes needs {k * (n - 1)} edges but only "
            f"{n * (n - 1) // 2} node pairs exist"
        )
    removed = np.eye(n, dtype=bool)
    trees = []
    for r in range(1, k + 1):
        try:
            tree = minimum_spanning_tree(dm, removed)
        except DisconnectedGraphError:
            raise DisconnectedGraphError(r, k) from None
        removed[tree[:, 0], tree[:, 1]] = True
        removed[tree[:, 1], tree[:, 0]] = True
        trees.append(tree)
    return trees


def build_kmst(dm, k: int = 1) -> SimilarityGraph:
    """k-MST: union of ``k`` greedily extracted edge-disjoint MSTs."""
    trees = kmst_trees(dm, k)
    n = np.shape(dm)[0]
    return from_undirected(n, np.concatenate(trees), kind="kmst", k=k)


def build_knn(dm, k: int) -> SimilarityGraph:
    """Undirected k-nearest-neighbour graph.

    ``{i, j}`` is an edge if either endpoint is among the other's ``k``
    nearest neighbours. Distance ties go to the smaller index.
    """
    dm = np.asarray(dm, dtype=float)
    n = dm.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must satisfy 1 <= k <= n - 1 = {n - 1}, got {k}")
    work = dm.copy()
    np.fill_diagonal(work, -np.inf)
    order = np.argsort(work, axis=1, kind="stable")[:, 1 : k + 1]
    rows = np.repeat(np.arange(n), k)
    pairs = np.column_stack([rows, order.ravel()])
    return from_undirected(n, pairs, kind="knn", k=k)


def build_graph(dm, kind: str = "kmst", k: int = 20) -> SimilarityGraph:
    if kind == "kmst":
        return build_kmst(dm, k)
    if kind == "knn":
        return build_knn(dm, k)
    raise ValueError(f"unknown graph type {kind!r}; expected 'kmst' or 'knn'")
