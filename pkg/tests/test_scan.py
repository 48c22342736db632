import numpy as np
import pytest

from treescan import (
    ContinuousScanParams,
    DiscreteScanParams,
    FeatureMap,
    affinity_map,
    discretize,
    naive_tree_scan,
    output_projection,
    root_tree,
    sequential_selective_scan,
    tree_scan_language_forward,
    tree_scan_vision_forward,
)
from treescan.selfcheck import align_chain_params, chain_tree, random_scan_instance


def single_vertex_tree():
    return root_tree(np.zeros((0, 2), dtype=np.int64), np.zeros(0), 1, 0)


def make_continuous(rng, length, channels, states):
    return ContinuousScanParams(
        a=-rng.uniform(0.1, 2.0, size=(channels, states)),
        b=rng.standard_normal((length, states)),
        c_out=rng.standard_normal((length, states)),
        d=rng.standard_normal(channels),
        delta=rng.uniform(0.05, 1.0, size=(length, channels)),
    )


class TestDiscretize:
    def test_small_delta_limit(self):
        p = ContinuousScanParams(
            a=np.array([[-1.0]]),
            b=np.array([[2.0]]),
            c_out=np.array([[1.0]]),
            d=np.array([0.0]),
            delta=np.array([[1e-12]]),
        )
        d = discretize(p)
        assert d.a_bar[0, 0, 0] == pytest.approx(1.0, abs=1e-11)
        assert d.b_bar[0, 0, 0] == pytest.approx(0.0, abs=1e-11)

    def test_ln2(self):
        p = ContinuousScanParams(
            a=np.array([[-1.0]]),
            b=np.array([[1.0]]),
            c_out=np.array([[1.0]]),
            d=np.array([0.0]),
            delta=np.array([[np.log(2.0)]]),
        )
        assert discretize(p).a_bar[0, 0, 0] == pytest.approx(0.5)

    def test_quarter_step(self):
        p = ContinuousScanParams(
            a=np.array([[-1.0]]),
            b=np.array([[2.0]]),
            c_out=np.array([[1.0]]),
            d=np.array([0.0]),
            delta=np.array([[0.25]]),
        )
        d = discretize(p)
        assert d.a_bar[0, 0, 0] == pytest.approx(np.exp(-0.25))
        assert d.b_bar[0, 0, 0] == pytest.approx(0.5)

    def test_formula_elementwise(self):
        rng = np.random.default_rng(0)
        p = make_continuous(rng, 5, 3, 2)
        d = discretize(p)
        for i in range(5):
            for c in range(3):
                for n in range(2):
                    assert d.a_bar[i, c, n] == np.exp(p.delta[i, c] * p.a[c, n])
                    assert d.b_bar[i, c, n] == p.delta[i, c] * p.b[i, n]

    def test_nonpositive_delta_rejected(self):
        with pytest.raises(ValueError, match="delta"):
            ContinuousScanParams(
                a=np.array([[-1.0]]),
                b=np.array([[1.0]]),
                c_out=np.array([[1.0]]),
                d=np.array([0.0]),
                delta=np.array([[0.0]]),
            )


class TestSequentialScan:
    def test_memoryless(self):
        rng = np.random.default_rng(1)
        x = FeatureMap(rng.standard_normal((6, 2)))
        b = rng.standard_normal((6, 2, 3))
        p = DiscreteScanParams(np.full((6, 2, 3), 1e-300), b)  # effectively zero
        h = sequential_selective_scan(x, p)
        np.testing.assert_allclose(h, b * x.data[:, :, None], atol=1e-290)

    def test_hand_unrolled_chain(self):
        x = FeatureMap(np.ones((3, 1)))
        p = DiscreteScanParams(
            np.array([1.0, 0.5, 0.5]).reshape(3, 1, 1), np.ones((3, 1, 1))
        )
        h = sequential_selective_scan(x, p)
        np.testing.assert_allclose(h.ravel(), [1.0, 1.5, 1.75])

    def test_prefix_sums(self):
        rng = np.random.default_rng(2)
        x = FeatureMap(rng.standard_normal((8, 1)))
        p = DiscreteScanParams(np.ones((8, 1, 1)), np.ones((8, 1, 1)))
        h = sequential_selective_scan(x, p)
        np.testing.assert_allclose(h[:, 0, 0], np.cumsum(x.data[:, 0]), rtol=1e-14)

    def test_shape_mismatch(self):
        x = FeatureMap(np.ones((3, 2)))
        p = DiscreteScanParams(np.ones((3, 1, 1)), np.ones((3, 1, 1)))
        with pytest.raises(ValueError):
            sequential_selective_scan(x, p)


class TestVisionForward:
    def test_single_vertex(self):
        x = FeatureMap(np.array([[2.0]]))
        p = DiscreteScanParams(np.array([[[0.7]]]), np.array([[[3.0]]]))
        h, xi = tree_scan_vision_forward(x, p, single_vertex_tree())
        assert h[0, 0, 0] == 6.0 and xi[0, 0, 0] == 6.0

    def test_chain_frozen_values(self, chain3_vision):
        x, p, tree = chain3_vision
        h, xi = tree_scan_vision_forward(x, p, tree)
        np.testing.assert_allclose(xi.ravel(), [1.75, 1.5, 1.0])
        np.testing.assert_allclose(h.ravel(), [1.75, 2.0, 1.75])

    def test_star_closed_form(self):
        k = 5
        edges = np.stack([np.zeros(k, dtype=np.int64), np.arange(1, k + 1)], axis=1)
        tree = root_tree(edges, np.zeros(k), k + 1, 0)
        a = 0.3
        p = DiscreteScanParams(np.full((k + 1, 1, 1), a), np.ones((k + 1, 1, 1)))
        h, _ = tree_scan_vision_forward(FeatureMap(np.ones((k + 1, 1))), p, tree)
        assert h[0, 0, 0] == pytest.approx(1 + k * a)

    def test_tiny_transitions_kill_propagation(self):
        rng = np.random.default_rng(3)
        x, p, tree = random_scan_instance(rng, 20, 2, 2)
        p = DiscreteScanParams(np.full_like(p.a_bar, 1e-300), p.b_bar)
        h, _ = tree_scan_vision_forward(x, p, tree)
        np.testing.assert_allclose(h, p.b_bar * x.data[:, :, None], atol=1e-290)

    def test_matches_naive_on_random_instances(self):
        rng = np.random.default_rng(4)
        for _ in range(60):
            n = int(rng.integers(2, 120))
            x, p, tree = random_scan_instance(rng, n, int(rng.integers(1, 4)), int(rng.integers(1, 4)))
            h, _ = tree_scan_vision_forward(x, p, tree)
            ref = naive_tree_scan(x, p, tree)
            assert np.max(np.abs(h - ref)) < 1e-9

    def test_tree_size_mismatch(self, chain3_vision):
        x, p, tree = chain3_vision
        with pytest.raises(ValueError):
            tree_scan_vision_forward(FeatureMap(np.ones((4, 1))), p, tree)

    def test_two_traversal_identity(self):
        rng = np.random.default_rng(5)
        x, p, tree = random_scan_instance(rng, 50, 2, 2)
        h, xi = tree_scan_vision_forward(x, p, tree)
        for v in range(50):
            if v == tree.root:
                continue
            a = p.a_bar[v]
            lhs = h[v]
            rhs = a * h[tree.parent[v]] + (1 - a * a) * xi[v]
            np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(6)
        x1, p, tree = random_scan_instance(rng, 30, 2, 2)
        x2 = FeatureMap(rng.standard_normal(x1.data.shape))
        alpha, beta = 0.7, -1.3
        mix = FeatureMap(alpha * x1.data + beta * x2.data)
        h_mix, _ = tree_scan_vision_forward(mix, p, tree)
        h1, _ = tree_scan_vision_forward(x1, p, tree)
        h2, _ = tree_scan_vision_forward(x2, p, tree)
        np.testing.assert_allclose(h_mix, alpha * h1 + beta * h2, atol=1e-12)

    def test_stability_bound(self):
        rng = np.random.default_rng(7)
        x, p, tree = random_scan_instance(rng, 40, 2, 2, a_range=(0.2, 1.0))
        h, _ = tree_scan_vision_forward(x, p, tree)
        bound = np.sum(np.abs(p.b_bar * x.data[:, :, None]), axis=0)
        assert np.all(np.abs(h) <= bound[None] + 1e-12)


class TestLanguageForward:
    def test_requires_last_token_root(self):
        rng = np.random.default_rng(8)
        x, p, tree = random_scan_instance(rng, 10, 1, 1, root=3)
        with pytest.raises(ValueError, match="last token"):
            tree_scan_language_forward(x, p, tree)

    def test_chain_hand_unrolled(self):
        # transitions keyed by the child-toward-root vertex: edge (0,1) by 0, (1,2) by 1
        x = FeatureMap(np.ones((3, 1)))
        p = DiscreteScanParams(
            np.array([0.5, 0.5, 1.0]).reshape(3, 1, 1), np.ones((3, 1, 1))
        )
        h = tree_scan_language_forward(x, p, chain_tree(3))
        np.testing.assert_allclose(h.ravel(), [1.0, 1.5, 1.75])

    def test_equals_sequential_on_chains(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            n = int(rng.integers(2, 100))
            c, s = int(rng.integers(1, 3)), int(rng.integers(1, 3))
            p = DiscreteScanParams(
                rng.uniform(0.05, 0.95, (n, c, s)), rng.standard_normal((n, c, s))
            )
            x = FeatureMap(rng.standard_normal((n, c)))
            h_seq = sequential_selective_scan(x, p)
            h_tree = tree_scan_language_forward(x, align_chain_params(p), chain_tree(n))
            assert np.max(np.abs(h_seq - h_tree)) <= 1e-12

    def test_constant_transitions_identical_arrays(self):
        # with a constant a_bar the edge re-keying is invisible: the same
        # parameter object feeds both scans
        rng = np.random.default_rng(10)
        n = 40
        p = DiscreteScanParams(np.full((n, 1, 2), 0.8), rng.standard_normal((n, 1, 2)))
        x = FeatureMap(rng.standard_normal((n, 1)))
        h_seq = sequential_selective_scan(x, p)
        h_tree = tree_scan_language_forward(x, p, chain_tree(n))
        np.testing.assert_allclose(h_seq, h_tree, atol=1e-12)

    def test_subtree_only_aggregation(self):
        rng = np.random.default_rng(11)
        n = 30
        x, p, tree = random_scan_instance(rng, n, 2, 2, root=n - 1)
        h = tree_scan_language_forward(x, p, tree)
        # brute force: h[i] = sum over j in subtree(i) of pathweight * b*x
        from treescan import path_product

        descendants = [set([v]) for v in range(n)]
        for v in reversed(tree.bfs_order.tolist()):
            if v != tree.root:
                descendants[int(tree.parent[v])] |= descendants[v]
        unit = p.b_bar * x.data[:, :, None]
        for i in range(n):
            expected = np.zeros(p.shape[1:])
            for j in descendants[i]:
                expected += path_product(tree, p, i, j) * unit[j]
            np.testing.assert_allclose(h[i], expected, atol=1e-10)

    def test_memoryless(self):
        rng = np.random.default_rng(12)
        n = 15
        x, p, tree = random_scan_instance(rng, n, 1, 2, root=n - 1)
        p = DiscreteScanParams(np.full_like(p.a_bar, 1e-300), p.b_bar)
        h = tree_scan_language_forward(x, p, tree)
        np.testing.assert_allclose(h, p.b_bar * x.data[:, :, None], atol=1e-290)


class TestNaiveScan:
    def test_single_vertex(self):
        x = FeatureMap(np.array([[2.0]]))
        p = DiscreteScanParams(np.array([[[0.7]]]), np.array([[[3.0]]]))
        h = naive_tree_scan(x, p, single_vertex_tree())
        assert h[0, 0, 0] == 6.0

    def test_unit_transitions_sum_everything(self):
        rng = np.random.default_rng(13)
        x, p, tree = random_scan_instance(rng, 25, 2, 2)
        p = DiscreteScanParams(np.ones_like(p.a_bar), p.b_bar)
        h = naive_tree_scan(x, p, tree)
        total = np.sum(p.b_bar * x.data[:, :, None], axis=0)
        for i in range(25):
            np.testing.assert_allclose(h[i], total, rtol=1e-12)

    def test_single_root_mode(self):
        rng = np.random.default_rng(14)
        x, p, tree = random_scan_instance(rng, 20, 2, 2)
        full = naive_tree_scan(x, p, tree, roots="all")
        only_root = naive_tree_scan(x, p, tree, roots="single")
        np.testing.assert_allclose(only_root, full[tree.root], atol=0)

    def test_guard(self):
        rng = np.random.default_rng(15)
        x, p, tree = random_scan_instance(rng, 2, 1, 1)
        big = 5000
        xb = FeatureMap(np.ones((big, 1)))
        pb = DiscreteScanParams(np.full((big, 1, 1), 0.5), np.ones((big, 1, 1)))
        tb = chain_tree(big)
        with pytest.raises(ValueError, match="force"):
            naive_tree_scan(xb, pb, tb)
        h = naive_tree_scan(xb, pb, tb, force=True)  # allowed when forced
        assert h.shape == (big, 1, 1)


class TestOutputProjection:
    def test_pure_feedthrough(self):
        rng = np.random.default_rng(16)
        p = make_continuous(rng, 6, 2, 3)
        p.c_out[:] = 0.0
        x = FeatureMap(rng.standard_normal((6, 2)))
        h = rng.standard_normal((6, 2, 3))
        y = output_projection(h, p, x)
        np.testing.assert_allclose(y.data, p.d[None, :] * x.data, atol=1e-14)

    def test_projection_collapse_identity_norm(self):
        rng = np.random.default_rng(17)
        p = make_continuous(rng, 5, 2, 1)
        p.c_out[:] = 1.0
        p.d[:] = 0.0
        x = FeatureMap(rng.standard_normal((5, 2)))
        h = rng.standard_normal((5, 2, 1))
        y = output_projection(h, p, x, norm="identity")
        np.testing.assert_allclose(y.data, h[:, :, 0], atol=1e-15)

    def test_term_by_term_oracle(self):
        rng = np.random.default_rng(18)
        length, c, n = 4, 2, 3
        p = make_continuous(rng, length, c, n)
        x = FeatureMap(rng.standard_normal((length, c)))
        h = rng.standard_normal((length, c, n))
        y = output_projection(h, p, x, norm="rms").data
        for i in range(length):
            r = np.sqrt(np.mean(h[i] ** 2))
            for cc in range(c):
                expected = sum(p.c_out[i, nn] * h[i, cc, nn] / r for nn in range(n))
                expected += p.d[cc] * x.data[i, cc]
                assert y[i, cc] == pytest.approx(expected, rel=1e-12)

    def test_zero_hidden_state_is_safe(self):
        rng = np.random.default_rng(19)
        p = make_continuous(rng, 3, 1, 2)
        x = FeatureMap(rng.standard_normal((3, 1)))
        y = output_projection(np.zeros((3, 1, 2)), p, x)
        np.testing.assert_allclose(y.data, p.d[None, :] * x.data, atol=1e-14)

    def test_spatial_shape_preserved(self):
        rng = np.random.default_rng(20)
        p = make_continuous(rng, 6, 1, 1)
        x = FeatureMap(rng.standard_normal((6, 1)), spatial=(2, 3))
        y = output_projection(rng.standard_normal((6, 1, 1)), p, x)
        assert y.spatial == (2, 3)


class TestAffinityMap:
    def test_anchor_is_one(self):
        rng = np.random.default_rng(21)
        x, p, tree = random_scan_instance(rng, 12, 2, 2)
        for anchor in (0, 5, 11):
            vals = affinity_map(tree, p, anchor)
            assert vals[anchor] == 1.0
            assert np.all(vals > 0) and np.all(vals <= 1.0)

    def test_chain_path_products(self):
        tree = root_tree(np.array([[0, 1], [1, 2]]), np.zeros(2), 3, 0)
        p = DiscreteScanParams(
            np.array([1.0, 0.5, 0.5]).reshape(3, 1, 1), np.ones((3, 1, 1))
        )
        np.testing.assert_allclose(affinity_map(tree, p, 0), [1.0, 0.5, 0.25])

    def test_all_unit_transitions(self):
        rng = np.random.default_rng(22)
        x, p, tree = random_scan_instance(rng, 9, 1, 1)
        p = DiscreteScanParams(np.ones_like(p.a_bar), p.b_bar)
        np.testing.assert_array_equal(affinity_map(tree, p, 4), np.ones(9))

    def test_monotone_away_from_anchor(self):
        rng = np.random.default_rng(23)
        x, p, tree = random_scan_instance(rng, 40, 1, 1)
        anchor = 7
        vals = affinity_map(tree, p, anchor)
        # on the anchor-rooted orientation every vertex's affinity is bounded
        # by its parent's, i.e. values never increase moving away from anchor
        edges = np.array(
            [
                [min(v, int(tree.parent[v])), max(v, int(tree.parent[v]))]
                for v in range(40)
                if v != tree.root
            ]
        )
        anchored = root_tree(edges, np.zeros(len(edges)), 40, anchor)
        for v in range(40):
            if v != anchor:
                assert vals[v] <= vals[int(anchored.parent[v])] + 1e-15

    def test_invalid_anchor(self):
        rng = np.random.default_rng(24)
        x, p, tree = random_scan_instance(rng, 5, 1, 1)
        with pytest.raises(ValueError):
            affinity_map(tree, p, 5)

    def test_transitions_above_one_rejected(self):
        rng = np.random.default_rng(25)
        x, p, tree = random_scan_instance(rng, 5, 1, 1)
        bad = DiscreteScanParams(np.full_like(p.a_bar, 1.5), p.b_bar)
        with pytest.raises(ValueError):
            affinity_map(tree, bad, 0)


def test_make_continuous_shapes():
    rng = np.random.default_rng(26)
    p = make_continuous(rng, 7, 3, 2)
    assert p.shape == (7, 3, 2)
    d = discretize(p)
    assert d.shape == (7, 3, 2)
    assert np.all(d.a_bar > 0) and np.all(d.a_bar <= 1.0)
