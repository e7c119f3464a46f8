"""Within-cluster edge-rank statistic and its permutation null.

Under the null, cluster labels are exchangeable: every relabeling that keeps
the cluster sizes ``(n_1, ..., n_I)`` is equally likely, while the graph on
``X`` and the ranks of ``y`` stay fixed. The moments of the statistic under
that distribution have closed forms in a handful of graph/rank aggregates
(:class:`GraphRankSummary`), so the standardized statistic costs
``O(|G| + N)`` once the graph and ranks are built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp
from scipy.stats import norm

from .graph import SimilarityGraph, build_graph, check_distance_matrix, compute_distances
from .ranks import compute_normalized_ranks, has_rank_ties

DEGENERATE_RTOL = 1e-12


class DegenerateVarianceError(ValueError):
    """The permutation variance of the statistic is (numerically) zero."""


class UnsupportedSizeError(ValueError):
    """Closed-form moments need at least four observations."""


@dataclass(frozen=True)
class ClusterAssignment:
    """Cluster membership coded as ``0..I-1``; ``names`` keeps the original labels."""

    codes: np.ndarray
    names: tuple

    @classmethod
    def from_labels(cls, labels) -> "ClusterAssignment":
        labels = np.asarray(labels)
        if labels.ndim != 1 or len(labels) == 0:
            raise ValueError("labels must be a non-empty 1-D sequence")
        names, codes = np.unique(labels, return_inverse=True)
        return cls(codes=codes.astype(np.int64), names=tuple(names.tolist()))

    @property
    def N(self) -> int:
        return len(self.codes)

    @property
    def I(self) -> int:
        return len(self.names)

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.codes, minlength=self.I)

    def index_of(self, name) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(f"unknown cluster id {name!r}") from None


@dataclass(frozen=True)
class GraphRankSummary:
    """Edge-rank aggregates that determine the permutation moments.

    ``weights[e]`` is ``R_i(j)`` for ordered edge ``e = (i, j)``. ``S_bar`` is
    the sum over edges of ``R_i(j) * (Rout[i] + Rin[i] + Rin[j] + Rout[j])``,
    including the edge's own contributions.
    """

    n: int
    R_X: float
    R_X1: float
    R_X2: float
    S_bar: float
    Rout: np.ndarray
    Rin: np.ndarray
    weights: np.ndarray = field(repr=False)


def _edge_weights(graph: SimilarityGraph, R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (graph.n, graph.n):
        raise ValueError(f"rank matrix shape {R.shape} does not match graph on {graph.n} nodes")
    return R[graph.tails, graph.heads]


def summarize(graph: SimilarityGraph, R) -> GraphRankSummary:
    w = _edge_weights(graph, R)
    R = np.asarray(R, dtype=float)
    t, h = graph.tails, graph.heads
    w_rev = R[h, t]
    r_out = np.bincount(t, weights=w, minlength=graph.n)
    r_in = np.bincount(h, weights=w, minlength=graph.n)
    r_bar = r_out[t] + r_in[t] + r_in[h] + r_out[h]
    return GraphRankSummary(
        n=graph.n,
        R_X=float(w.sum()),
        R_X1=float(w @ w),
        R_X2=float(w @ w_rev),
        S_bar=float(w @ r_bar),
        Rout=r_out,
        Rin=r_in,
        weights=w,
    )


def _check_sizes(N: int, *ns: int):
    if N < 4:
        raise UnsupportedSizeError(f"closed-form moments need N >= 4, got N = {N}")
    for n_s in ns:
        if not 1 <= n_s <= N:
            raise ValueError(f"cluster size {n_s} outside 1..{N}")
    if sum(ns) > N:
        raise ValueError(f"cluster sizes {ns} exceed N = {N}")


def moments_ts(summary: GraphRankSummary, N: int, n_s: int) -> tuple[float, float]:
    """Permutation mean and variance of the within-cluster edge-rank of one cluster."""
    _check_sizes(N, n_s)
    RX, S2, Sb = summary.R_X, summary.R_X1 + summary.R_X2, summary.S_bar
    pair = n_s * (n_s - 1) / (N * (N - 1))
    mean = pair * RX
    inner = (
        (N - n_s) / (N - 3) * Sb
        + (n_s - 2 * N + 3) / (N - 3) * S2
        + (n_s - 3) / (N - 3) * RX**2
    )
    var = pair * (S2 + (n_s - 2) / (N - 2) * inner - pair * RX**2)
    return mean, var


def covariance_ts_tt(summary: GraphRankSummary, N: int, n_s: int, n_t: int) -> float:
    """Permutation covariance of the edge-ranks of two distinct clusters."""
    _check_sizes(N, n_s, n_t)
    RX, S2, Sb = summary.R_X, summary.R_X1 + summary.R_X2, summary.S_bar
    pref = n_s * n_t * (n_s - 1) * (n_t - 1) / (N * (N - 1) * (N - 2) * (N - 3))
    return pref * ((4 * N - 6) / (N * (N - 1)) * RX**2 + S2 - Sb)


@dataclass
class MomentTable:
    mean: np.ndarray
    var: np.ndarray
    cov: np.ndarray
    mean_total: float
    var_total: float


def moment_table(summary: GraphRankSummary, counts) -> MomentTable:
    """Per-cluster moments and the mean/variance of their sum."""
    counts = [int(c) for c in counts]
    N = sum(counts)
    n_clusters = len(counts)
    mean = np.empty(n_clusters)
    var = np.empty(n_clusters)
    cov = np.zeros((n_clusters, n_clusters))
    for s, n_s in enumerate(counts):
        mean[s], var[s] = moments_ts(summary, N, n_s)
        cov[s, s] = var[s]
    for s in range(n_clusters):
        for t in range(s + 1, n_clusters):
            cov[s, t] = cov[t, s] = covariance_ts_tt(summary, N, counts[s], counts[t])
    return MomentTable(mean, var, cov, float(mean.sum()), float(cov.sum()))


def within_cluster_edge_ranks(graph: SimilarityGraph, R, clusters: ClusterAssignment) -> np.ndarray:
    """Within-cluster edge-rank for every cluster, in ``clusters.names`` order."""
    if clusters.N != graph.n:
        raise ValueError(f"{clusters.N} labels for a graph on {graph.n} nodes")
    w = _edge_weights(graph, R)
    ct, ch = clusters.codes[graph.tails], clusters.codes[graph.heads]
    same = ct == ch
    return np.bincount(ct[same], weights=w[same], minlength=clusters.I)


def within_cluster_edge_rank(graph: SimilarityGraph, R, clusters: ClusterAssignment, s) -> float:
    """Sum of ``R_i(j)`` over ordered edges with both endpoints in cluster ``s``."""
    idx = clusters.index_of(s)
    return float(within_cluster_edge_ranks(graph, R, clusters)[idx])


@numba.njit(cache=True)
def _within_sums(tails, heads, w, codes):
    out = np.zeros(codes.shape[0])
    for b in range(codes.shape[0]):
        acc = 0.0
        for e in range(len(w)):
            if codes[b, tails[e]] == codes[b, heads[e]]:
                acc += w[e]
        out[b] = acc
    return out


def _total_within(graph: SimilarityGraph, w: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Sum of within-cluster edge weights for each row of a label matrix."""
    codes = np.ascontiguousarray(np.atleast_2d(codes), dtype=np.int64)
    return _within_sums(graph.tails.copy(), graph.heads.copy(), np.ascontiguousarray(w), codes)


@dataclass
class TestResult:
    """Outcome of the random-effects test on one dataset."""

    __test__ = False  # not a pytest class

    n: int
    cluster_names: tuple
    counts: np.ndarray
    graph_meta: dict
    T: np.ndarray
    V: float
    E_V: float
    Var_V: float
    Z: float
    p_asymptotic: float
    moments: MomentTable
    p_permutation: float | None = None
    B: int | None = None
    seed: int | tuple | None = None
    tie_warning: bool = False
    diagnostics: dict | None = None

    @property
    def I(self) -> int:
        return len(self.counts)

    def to_dict(self) -> dict:
        names = [n if isinstance(n, (int, str)) else str(n) for n in self.cluster_names]
        out = {
            "n": self.n,
            "I": self.I,
            "clusters": names,
            "counts": [int(c) for c in self.counts],
            "graph": dict(self.graph_meta),
            "T": [float(x) for x in self.T],
            "V_I": self.V,
            "E_VI": self.E_V,
            "Var_VI": self.Var_V,
            "Z_I": self.Z,
            "p_asymptotic": self.p_asymptotic,
            "moments": {
                "E_T": self.moments.mean.tolist(),
                "Var_T": self.moments.var.tolist(),
                "Cov_T": self.moments.cov.tolist(),
            },
            "tie_warning": self.tie_warning,
        }
        if self.p_permutation is not None:
            seed = list(self.seed) if isinstance(self.seed, tuple) else self.seed
            out.update(p_permutation=self.p_permutation, B=self.B, seed=seed)
        if self.diagnostics is not None:
            out["diagnostics"] = self.diagnostics
        return out


def z_statistic(
    graph: SimilarityGraph,
    R,
    clusters: ClusterAssignment,
    *,
    tie_warning: bool = False,
) -> TestResult:
    """Standardized statistic and its lower-tail normal p-value."""
    if clusters.N != graph.n:
        raise ValueError(f"{clusters.N} labels for a graph on {graph.n} nodes")
    summary = summarize(graph, R)
    table = moment_table(summary, clusters.counts)
    if not table.var_total > DEGENERATE_RTOL * summary.R_X**2 or summary.R_X == 0:
        raise DegenerateVarianceError(
            f"permutation variance {table.var_total:.3g} is degenerate "
            f"(I = {clusters.I}, {graph.n_edges} ordered edges); the statistic "
            "does not vary under relabeling"
        )
    T = within_cluster_edge_ranks(graph, R, clusters)
    V = float(_total_within(graph, summary.weights, clusters.codes)[0])
    Z = (V - table.mean_total) / math.sqrt(table.var_total)
    return TestResult(
        n=graph.n,
        cluster_names=clusters.names,
        counts=clusters.counts,
        graph_meta=graph.meta(),
        T=T,
        V=V,
        E_V=table.mean_total,
        Var_V=table.var_total,
        Z=Z,
        p_asymptotic=float(norm.cdf(Z)),
        moments=table,
        tie_warning=tie_warning,
    )


def permuted_codes(codes: np.ndarray, B: int, seed) -> np.ndarray:
    """``B`` count-preserving relabelings; draw ``b`` uses its own stream ``(*seed, b)``."""
    key = [int(s) for s in np.atleast_1d(seed)]
    return np.stack([np.random.default_rng([*key, b]).permutation(codes) for b in range(B)])


def permutation_pvalue(
    graph: SimilarityGraph,
    R,
    clusters: ClusterAssignment,
    B: int = 2000,
    seed=None,
    *,
    result: TestResult | None = None,
) -> tuple[float, np.ndarray, int]:
    """Monte Carlo permutation p-value ``(1 + #{Z_b <= Z}) / (B + 1)``.

    Returns ``(p, Z_b, seed)``; ``seed`` is generated and returned when not
    given so the draw can be replayed.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % 2**63)
    if result is None:
        result = z_statistic(graph, R, clusters)
    w = _edge_weights(graph, R)
    V_b = _total_within(graph, w, permuted_codes(clusters.codes, B, seed))
    Z_b = (V_b - result.E_V) / math.sqrt(result.Var_V)
    # guard against round-off splitting exact ties
    tol = 1e-12 * max(1.0, abs(result.V))
    hits = int(np.count_nonzero(V_b <= result.V + tol))
    return (1 + hits) / (B + 1), Z_b, seed


def edge_neighbourhoods(graph: SimilarityGraph, R, chunk: int = 512):
    """Per ordered edge: ``|A|``, rank mass of ``A`` and of ``B``.

    ``A`` holds the edges sharing a node with the focal edge (itself
    included); ``B`` the edges sharing a node with some edge of ``A``.
    Counts and sums run over ordered pairs.
    """
    w = _edge_weights(graph, R)
    R = np.asarray(R, dtype=float)
    n = graph.n
    t, h = graph.tails, graph.heads
    deg = np.bincount(t, minlength=n)
    size_a = 2 * deg[t] + 2 * deg[h] - 2
    s = summarize(graph, R)
    r_a = s.Rout[t] + s.Rin[t] + s.Rin[h] + s.Rout[h] - (w + R[h, t])

    # B = edges touching the closed neighbourhood U of {i, j};
    # mass(B) = R_X - sum of weights with both ends outside U
    W = sp.csr_matrix((w, (t, h)), shape=(n, n))
    closed = np.zeros((n, n), dtype=bool)
    closed[t, h] = True
    closed[np.arange(n), np.arange(n)] = True
    und = np.flatnonzero(t < h)
    r_b_und = np.empty(len(und))
    for start in range(0, len(und), chunk):
        e = und[start : start + chunk]
        outside = ~(closed[:, t[e]] | closed[:, h[e]])
        y = outside.astype(float)
        r_b_und[start : start + chunk] = s.R_X - np.einsum("ne,ne->e", y, W @ y)
    # the reverse orientation shares the same neighbourhood
    lookup = {(a, b): v for (a, b), v in zip(map(tuple, graph.edges[und]), r_b_und)}
    r_b = np.array([lookup[(min(a, b), max(a, b))] for a, b in graph.edges.tolist()])
    return size_a, r_a, r_b


def condition_diagnostics(graph: SimilarityGraph, R) -> dict:
    """Finite-sample indicators for the regularity conditions of the normal limit.

    Advisory only: the conditions are asymptotic, so these numbers show how
    far a given graph is from trouble, not whether the test is valid.
    """
    w = _edge_weights(graph, R)
    s = summarize(graph, R)
    size_a, r_a, r_b = edge_neighbourhoods(graph, R)
    n = graph.n
    pos = w > 0
    cond2 = float(np.max(r_a[pos] / (size_a[pos] * w[pos]))) if pos.any() else float("nan")
    return {
        "n_ordered_edges": graph.n_edges,
        "n_undirected_edges": graph.undirected_edge_count,
        "edge_exponent": math.log(graph.undirected_edge_count) / math.log(n)
        if graph.undirected_edge_count > 0 and n > 1
        else float("nan"),
        "max_A": int(size_a.max()) if len(size_a) else 0,
        "mean_A": float(size_a.mean()) if len(size_a) else 0.0,
        "cond2_max_ratio": cond2,
        "cond3_ratio": float(np.sum((w * size_a) ** 2) / (s.R_X1 * math.sqrt(n))),
        "cond4_ratio": float(np.sum(w * r_a * r_b) / s.R_X1**1.5),
    }


def graph_rank_test(
    X=None,
    y=None,
    labels=None,
    *,
    distances=None,
    graph: str = "kmst",
    k: int = 20,
    method: str = "asymptotic",
    B: int = 2000,
    seed=None,
    diagnostics: bool = False,
) -> TestResult:
    """Test for a cluster-level random effect in ``y`` given covariates ``X``.

    Small values of ``Z`` (within-cluster neighbours in ``X`` are unusually
    close in ``y``) are evidence of a random effect. ``method`` selects the
    asymptotic normal p-value, the Monte Carlo permutation p-value, or both.
    """
    if method not in ("asymptotic", "permutation", "both"):
        raise ValueError(f"unknown method {method!r}")
    if distances is not None:
        dm = check_distance_matrix(distances)
    elif X is not None:
        dm = compute_distances(X)
    else:
        raise ValueError("provide either X or distances")
    y = np.asarray(y, dtype=float)
    clusters = ClusterAssignment.from_labels(labels)
    if not len(y) == clusters.N == dm.shape[0]:
        raise ValueError(
            f"size mismatch: {dm.shape[0]} covariate rows, {len(y)} responses, "
            f"{clusters.N} labels"
        )
    g = build_graph(dm, graph, k)
    R = compute_normalized_ranks(y)
    result = z_statistic(g, R, clusters, tie_warning=has_rank_ties(y))
    if method in ("permutation", "both"):
        p, _, used_seed = permutation_pvalue(g, R, clusters, B, seed, result=result)
        result.p_permutation, result.B, result.seed = p, B, used_seed
    if diagnostics:
        result.diagnostics = condition_diagnostics(g, R)
    return result
