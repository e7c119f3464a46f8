"""
Testing for a random intercept, step by step
============================================

Simulate clustered data, then go through the pieces of the test by hand:
similarity graph on the covariates, normalized response ranks,
within-cluster edge-rank sums, and their permutation-null moments.
"""

import numpy as np

from graphranktest import (
    ClusterAssignment,
    LmmConfig,
    build_kmst,
    compute_distances,
    compute_normalized_ranks,
    generate,
    graph_rank_test,
    permutation_pvalue,
    z_statistic,
)

# A high-dimensional linear mixed model: 200 observations in 4 clusters,
# 200 covariates, and a random intercept with variance 4.
cfg = LmmConfig(scenario=1, N=200, p=200, I=4, tau2=4.0, snr=5.0)
data = generate(cfg, seed=1)
print("realized random intercepts:", np.round(data.u, 3))

# The graph only looks at X. A 5-MST is the union of five edge-disjoint
# minimum spanning trees; each undirected edge is stored in both directions.
graph = build_kmst(compute_distances(data.X), k=5)
print(f"{graph.undirected_edge_count} undirected edges, {graph.n_edges} ordered pairs")

# Ranks only look at y. Row i ranks every other observation by |y_j - y_i|,
# normalized so the closest one gets 0.
R = compute_normalized_ranks(data.y)
print("row 0 of the rank matrix (first 6 entries):", np.round(R[0, :6], 3))

# Within-cluster edges whose endpoints have similar responses give small
# ranks. A random intercept pulls responses in the same cluster together,
# so the sum of within-cluster ranks drops below its permutation mean.
clusters = ClusterAssignment.from_labels(data.labels)
res = z_statistic(graph, R, clusters)
print("T_s per cluster:      ", np.round(res.T, 2))
print("null mean of T_s:     ", np.round(res.moments.mean, 2))
print(f"V = {res.V:.2f}, E(V) = {res.E_V:.2f}, sd(V) = {np.sqrt(res.Var_V):.2f}")
print(f"Z = {res.Z:.3f}, lower-tail p = {res.p_asymptotic:.3g}")

# The same p-value from label permutations; each draw has its own seeded stream.
p_perm, z_perm, _ = permutation_pvalue(graph, R, clusters, B=2000, seed=0)
print(f"permutation p = {p_perm:.4g} (smallest possible is {1 / 2001:.4g})")

# The one-call version, with the condition report for the normal approximation.
full = graph_rank_test(data.X, data.y, data.labels, k=5, method="both", seed=0, diagnostics=True)
for key, value in full.diagnostics.items():
    print(f"  {key}: {value:.4g}" if isinstance(value, float) else f"  {key}: {value}")
