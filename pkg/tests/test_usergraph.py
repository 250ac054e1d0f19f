import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphbandit.linalg import rbf_weight
from graphbandit.usergraph import (
    SimilarityGraph,
    build_similarity_graph,
    canonical_labels,
    louvain,
    median_pairwise_distance,
    modularity,
    nmi,
    sparsify_top_n,
)


def modularity_oracle(W, labels):
    """O(n^2) evaluation straight from the definition."""
    two_m = W.sum()
    k = W.sum(axis=1)
    q = 0.0
    for i in range(len(labels)):
        for j in range(len(labels)):
            if labels[i] == labels[j]:
                q += W[i, j] - k[i] * k[j] / two_m
    return q / two_m


def random_graph(rng, n, density=0.4):
    W = rng.random((n, n)) * (rng.random((n, n)) < density)
    W = np.triu(W, k=1)
    return SimilarityGraph(W + W.T)


def connected_components_oracle(W):
    """BFS component count, independent of any library routine."""
    n = W.shape[0]
    seen = [False] * n
    count = 0
    for start in range(n):
        if seen[start]:
            continue
        count += 1
        stack = [start]
        seen[start] = True
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(W[u]):
                if not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
    return count


def two_triangles():
    W = np.zeros((6, 6))
    for a, b in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]:
        W[a, b] = W[b, a] = 1.0
    return SimilarityGraph(W)


def two_cliques_bridge(k=5):
    n = 2 * k
    W = np.zeros((n, n))
    for block in (range(k), range(k, n)):
        for a in block:
            for b in block:
                if a != b:
                    W[a, b] = 1.0
    W[0, k] = W[k, 0] = 1.0
    return SimilarityGraph(W)


class TestBuildSimilarityGraph:
    def test_identical_estimates(self):
        G = build_similarity_graph(np.ones((4, 3)), sigma=1.0)
        off = G.weights[~np.eye(4, dtype=bool)]
        assert np.all(off == 1.0)
        assert np.all(np.diag(G.weights) == 0.0)

    def test_far_clusters_decay(self):
        U = np.vstack([np.zeros((3, 2)), np.full((3, 2), 50.0)])
        G = build_similarity_graph(U, sigma=1.0)
        assert G.weights[:3, 3:].max() < 1e-6

    def test_matches_pairwise_oracle(self):
        rng = np.random.default_rng(0)
        U = rng.standard_normal((12, 5))
        G = build_similarity_graph(U, sigma=0.8)
        for i in range(12):
            for j in range(12):
                want = 0.0 if i == j else rbf_weight(U[i], U[j], 0.8)
                assert abs(G.weights[i, j] - want) <= 1e-12

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError, match="sigma"):
            build_similarity_graph(np.zeros((3, 2)), sigma=0.0)

    def test_median_pairwise_distance(self):
        U = np.array([[0.0], [1.0], [3.0]])  # pair distances 1, 2, 3
        assert median_pairwise_distance(U) == pytest.approx(2.0)


class TestSparsifyTopN:
    def test_keep_all(self):
        rng = np.random.default_rng(1)
        G = random_graph(rng, 8, density=1.0)
        out = sparsify_top_n(G, n=7, binarize=False)
        assert np.array_equal(out.weights, G.weights)

    def test_three_node_hand_case(self):
        W = np.array([[0.0, 0.9, 0.5], [0.9, 0.0, 0.1], [0.5, 0.1, 0.0]])
        out = sparsify_top_n(SimilarityGraph(W), n=1, binarize=True)
        # node 0 keeps 1, node 1 keeps 0, node 2 keeps 0: union {0-1, 0-2}
        want = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        assert np.array_equal(out.weights, want)

    def test_binarized_weights_are_01(self):
        rng = np.random.default_rng(2)
        out = sparsify_top_n(random_graph(rng, 10, density=1.0), n=3, binarize=True)
        assert set(np.unique(out.weights)) <= {0.0, 1.0}

    def test_weighted_mode_preserves_weights(self):
        rng = np.random.default_rng(3)
        G = random_graph(rng, 10, density=1.0)
        out = sparsify_top_n(G, n=3, binarize=False)
        kept = out.weights != 0
        assert np.array_equal(out.weights[kept], G.weights[kept])

    def test_min_degree_invariant(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            G = random_graph(rng, 12, density=0.9)
            n = int(rng.integers(1, 12))
            out = sparsify_top_n(G, n=n, binarize=True)
            deg = (out.weights != 0).sum(axis=1)
            assert np.all(deg >= n)
            assert np.array_equal(out.weights, out.weights.T)
            assert np.all(np.diag(out.weights) == 0)

    def test_tie_break_lower_index(self):
        W = np.zeros((4, 4))
        W[0, 1] = W[1, 0] = 0.5
        W[0, 2] = W[2, 0] = 0.5
        W[0, 3] = W[3, 0] = 0.5
        # ties at 0.5: node 0 marks node 1 (lowest index)
        out = sparsify_top_n(SimilarityGraph(W), n=1, binarize=True)
        assert out.weights[0, 1] == 1.0
        # 2 and 3 still mark node 0, so those edges survive by union
        assert out.weights[0, 2] == 1.0 and out.weights[0, 3] == 1.0

    def test_rejects_out_of_range(self):
        G = two_triangles()
        with pytest.raises(ValueError, match=r"n must be in"):
            sparsify_top_n(G, n=0, binarize=True)
        with pytest.raises(ValueError, match=r"n must be in"):
            sparsify_top_n(G, n=6, binarize=True)


class TestModularity:
    def test_singletons_formula(self):
        rng = np.random.default_rng(5)
        G = random_graph(rng, 9)
        k = G.weights.sum(axis=1)
        two_m = G.weights.sum()
        want = -np.sum((k / two_m) ** 2)
        assert modularity(G, np.arange(9)) == pytest.approx(want, abs=1e-12)

    def test_two_triangles_value(self):
        G = two_triangles()
        assert modularity(G, np.array([0, 0, 0, 1, 1, 1])) == pytest.approx(0.5)

    def test_matches_definition_oracle_50_random(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            n = int(rng.integers(3, 31))
            G = random_graph(rng, n, density=0.5)
            if G.weights.sum() == 0:
                continue
            labels = rng.integers(0, max(2, n // 3), size=n)
            labels = canonical_labels(labels)
            got = modularity(G, labels)
            want = modularity_oracle(G.weights, labels)
            assert abs(got - want) <= 1e-12
            assert -0.5 - 1e-12 <= got <= 1.0 + 1e-12

    def test_empty_graph_errors(self):
        G = SimilarityGraph(np.zeros((3, 3)))
        with pytest.raises(ValueError, match="no edges"):
            modularity(G, np.zeros(3, dtype=int))


class TestNmi:
    def test_identical_partitions(self):
        labels = np.array([0, 1, 1, 2, 0])
        assert nmi(labels, labels) == 1.0

    def test_single_community_convention(self):
        assert nmi(np.zeros(4, dtype=int), np.array([0, 1, 0, 1])) == 0.0
        assert nmi(np.array([0, 1, 0, 1]), np.zeros(4, dtype=int)) == 0.0
        assert nmi(np.zeros(4, dtype=int), np.zeros(4, dtype=int)) == 1.0

    def test_independent_2x2(self):
        assert nmi(np.array([0, 0, 1, 1]), np.array([0, 1, 0, 1])) == pytest.approx(0.0, abs=1e-15)

    def test_label_permutation_invariant(self):
        a = np.array([0, 0, 1, 1, 2])
        b = np.array([2, 2, 0, 0, 1])
        assert nmi(a, b) == pytest.approx(1.0)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.integers(0, 3), min_size=2, max_size=30),
        st.data(),
    )
    def test_symmetric(self, a, data):
        b = data.draw(st.lists(st.integers(0, 3), min_size=len(a), max_size=len(a)))
        a = np.array(a)
        b = np.array(b)
        assert nmi(a, b) == pytest.approx(nmi(b, a), abs=1e-12)
        assert -1e-12 <= nmi(a, b) <= 1.0 + 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="equal length"):
            nmi(np.zeros(3, dtype=int), np.zeros(4, dtype=int))


class TestLouvain:
    def test_two_disjoint_triangles(self):
        G = two_triangles()
        labels = louvain(G, seed=0)
        assert nmi(labels, np.array([0, 0, 0, 1, 1, 1])) == 1.0
        q = modularity(G, labels)
        assert q == pytest.approx(modularity_oracle(G.weights, labels))
        assert q == pytest.approx(0.5)

    def test_complete_graph_single_community(self):
        n = 8
        W = np.ones((n, n)) - np.eye(n)
        labels = louvain(SimilarityGraph(W), seed=3)
        assert labels.max() == 0

    def test_two_cliques_bridge_recovered(self):
        G = two_cliques_bridge(5)
        truth = np.array([0] * 5 + [1] * 5)
        # exhaustive check: the planted split is the best 2-community split
        best_q, best_assign = -1.0, None
        for mask in range(1, 2**9):  # node 0 fixed in community 0
            assign = np.array([0] + [(mask >> i) & 1 for i in range(9)])
            if assign.max() == 0:
                continue
            q = modularity_oracle(G.weights, assign)
            if q > best_q:
                best_q, best_assign = q, assign
        assert nmi(best_assign, truth) == 1.0
        labels = louvain(G, seed=1)
        assert nmi(labels, truth) == 1.0
        assert modularity(G, labels) == pytest.approx(best_q)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(8)
        G = random_graph(rng, 25, density=0.3)
        a = louvain(G, seed=17)
        b = louvain(G, seed=17)
        assert np.array_equal(a, b)

    def test_edgeless_graph_singletons(self):
        G = SimilarityGraph(np.zeros((5, 5)))
        assert np.array_equal(louvain(G, seed=0), np.arange(5))

    def test_beats_singleton_partition(self):
        rng = np.random.default_rng(9)
        for seed in range(5):
            G = random_graph(rng, 20, density=0.25)
            if G.weights.sum() == 0:
                continue
            labels = louvain(G, seed=seed)
            assert modularity(G, labels) >= modularity(G, np.arange(20)) - 1e-12

    def test_instrumented_moves_non_decreasing(self):
        rng = np.random.default_rng(10)
        G = random_graph(rng, 18, density=0.35)
        trace = []
        louvain(G, seed=2, trace=trace)
        assert len(trace) > 0
        assert all(b >= a - 1e-12 for a, b in zip(trace, trace[1:]))

    def test_labels_contiguous(self):
        rng = np.random.default_rng(11)
        G = random_graph(rng, 15, density=0.3)
        labels = louvain(G, seed=4)
        assert set(labels) == set(range(labels.max() + 1))

    def test_community_count_at_least_components(self):
        rng = np.random.default_rng(12)
        for seed in range(5):
            G = random_graph(rng, 20, density=0.15)
            if G.weights.sum() == 0:
                continue
            labels = louvain(G, seed=seed)
            assert labels.max() + 1 >= connected_components_oracle(G.weights)
