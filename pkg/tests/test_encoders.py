import numpy as np
import pytest

from storyqg import numcore as nc
from storyqg.encoders import (
    EncoderConfig,
    GATLayerParams,
    GraphEncoder,
    gat_attention,
    gat_layer,
    gradcheck_case,
    pool_class_vector,
)
from storyqg.graph import TokenGraph, linear_parse
from storyqg.numcore import ParamStore, Tensor, grad_check


def path_adjacency(n):
    adj = np.eye(n)
    for i in range(n - 1):
        adj[i, i + 1] = adj[i + 1, i] = 1.0
    return adj


def dense_attention_oracle(h, W, a, adj, slope=0.2):
    """Independent re-computation with plain numpy."""
    Wh = h @ W.T
    d = W.shape[0]
    pre = (Wh @ a[:d])[:, None] + (Wh @ a[d:])[None, :]
    pre = np.where(pre > 0, pre, slope * pre)
    scores = np.where(adj > 0, pre, -np.inf)
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    e = np.where(adj > 0, e, 0.0)
    return e / e.sum(axis=1, keepdims=True)


class TestGatAttention:
    def test_single_node_self_loop(self, rng):
        h = Tensor(rng.normal(size=(1, 4)))
        W = Tensor(rng.normal(size=(3, 4)))
        a = Tensor(rng.normal(size=6))
        alpha, _ = gat_attention(h, W, a, np.eye(1))
        assert np.allclose(alpha.data, [[1.0]])

    def test_identical_neighbors_split_evenly(self, rng):
        # star: node 0 attends over two leaves with identical features
        feat = rng.normal(size=4)
        h = Tensor(np.stack([rng.normal(size=4), feat, feat]))
        W = Tensor(rng.normal(size=(3, 4)))
        a = Tensor(rng.normal(size=6))
        adj = np.array([[0, 1, 1], [1, 1, 0], [1, 0, 1.0]])
        alpha, _ = gat_attention(h, W, a, adj)
        assert alpha.data[0, 1] == pytest.approx(alpha.data[0, 2])
        assert alpha.data[0, 1] == pytest.approx(0.5)

    def test_matches_dense_softmax_oracle(self, rng):
        n, din, dh = 4, 5, 3
        h = rng.normal(size=(n, din))
        W = rng.normal(size=(dh, din))
        a = rng.normal(size=2 * dh)
        adj = path_adjacency(n)
        alpha, _ = gat_attention(Tensor(h), Tensor(W), Tensor(a), adj)
        assert np.allclose(alpha.data, dense_attention_oracle(h, W, a, adj), atol=1e-12)

    def test_rows_sum_to_one_and_masked_exactly_zero(self, rng):
        n = 5
        adj = path_adjacency(n)
        alpha, _ = gat_attention(Tensor(rng.normal(size=(n, 4))),
                                 Tensor(rng.normal(size=(3, 4))),
                                 Tensor(rng.normal(size=6)), adj)
        assert np.allclose(alpha.data.sum(axis=1), 1.0, atol=1e-9)
        assert (alpha.data[adj == 0] == 0.0).all()

    def test_isolated_node_rejected(self, rng):
        adj = np.eye(3)
        adj[1, 1] = 0.0
        with pytest.raises(ValueError, match="node 1"):
            gat_attention(Tensor(rng.normal(size=(3, 4))),
                          Tensor(rng.normal(size=(2, 4))),
                          Tensor(rng.normal(size=4)), adj)


class TestGatLayer:
    def params(self, rng, heads, dh, din, sigma="tanh"):
        return GATLayerParams(
            heads=[(Tensor(rng.normal(size=(dh, din))), Tensor(rng.normal(size=2 * dh)))
                   for _ in range(heads)],
            leaky_slope=0.2, sigma=sigma)

    def test_single_node_identity_sigma_is_projection(self, rng):
        h = Tensor(rng.normal(size=(1, 4)))
        params = self.params(rng, heads=2, dh=3, din=4, sigma="identity")
        out = gat_layer(h, params, np.eye(1))
        expected = np.concatenate([h.data @ W.data.T for W, _ in params.heads], axis=1)
        assert np.allclose(out.data, expected, atol=1e-12)

    def test_k1_equals_single_head_formula(self, rng):
        n = 3
        h = rng.normal(size=(n, 4))
        adj = path_adjacency(n)
        params = self.params(rng, heads=1, dh=4, din=4)
        out = gat_layer(Tensor(h), params, adj)
        W, a = params.heads[0]
        alpha = dense_attention_oracle(h, W.data, a.data, adj)
        assert np.allclose(out.data, np.tanh(alpha @ (h @ W.data.T)), atol=1e-12)

    def test_three_node_path_matches_hand_rolled_matrices(self, rng):
        n = 3
        h = rng.normal(size=(n, 2))
        adj = path_adjacency(n)
        params = self.params(rng, heads=2, dh=2, din=2)
        out = gat_layer(Tensor(h), params, adj)
        cols = []
        for W, a in params.heads:
            alpha = dense_attention_oracle(h, W.data, a.data, adj)
            cols.append(np.tanh(alpha @ (h @ W.data.T)))
        assert np.allclose(out.data, np.concatenate(cols, axis=1), atol=1e-12)

    def test_edge_storage_order_invariance(self, rng):
        edges = [(0, 2, "d"), (1, 2, "d"), (3, 2, "d")]
        g1 = TokenGraph(node_count=4, edges=edges, edu_of=[0] * 4, edu_roots=[2])
        g2 = TokenGraph(node_count=4, edges=edges[::-1], edu_of=[0] * 4, edu_roots=[2])
        store = ParamStore(1)
        enc = GraphEncoder(store, vocab_size=9,
                           config=EncoderConfig(embed_dim=6, hidden_dim=6, layers=2, heads=2))
        ids = np.array([1, 2, 3, 4])
        out1 = enc.encode(ids, g1)
        out2 = enc.encode(ids, g2)
        assert np.array_equal(out1.final.data, out2.final.data)

    def test_full_layer_gradcheck(self):
        assert grad_check(gradcheck_case, trials=20, seed=11) < 1e-4


class TestEncodeGraph:
    def encoder(self, layers=2):
        store = ParamStore(5)
        return GraphEncoder(store, vocab_size=11, config=EncoderConfig(
            embed_dim=8, hidden_dim=8, layers=layers, heads=2))

    def test_single_token_output_shape(self):
        enc = self.encoder()
        g = TokenGraph(node_count=1, edges=[], edu_of=[0], edu_roots=[0])
        out = enc.encode(np.array([3]), g)
        assert out.final.data.shape == (1, 8)
        assert out.pooled.data.shape == (8,)

    def test_zero_layers_returns_embeddings(self):
        enc = self.encoder(layers=0)
        g = linear_parse(["a", "b", "."])
        ids = np.array([1, 2, 3])
        out = enc.encode(ids, g)
        assert np.array_equal(out.final.data, enc.embedding.data[ids])

    def test_empty_sequence_rejected(self):
        enc = self.encoder()
        g = TokenGraph(node_count=0, edges=[], edu_of=[], edu_roots=[0])
        with pytest.raises(ValueError, match="empty"):
            enc.encode(np.array([], dtype=np.int64), g)

    def test_symmetric_star_leaves_get_identical_rows(self):
        # leaves 1 and 2 carry the same token and symmetric positions
        enc = self.encoder()
        g = TokenGraph(node_count=3, edges=[(1, 0, "d"), (2, 0, "d")],
                       edu_of=[0, 0, 0], edu_roots=[0])
        out = enc.encode(np.array([4, 7, 7]), g)
        assert np.allclose(out.final.data[1], out.final.data[2], atol=1e-12)

    def test_permuted_isomorphic_graph_gives_permuted_states(self):
        enc = self.encoder()
        g = TokenGraph(node_count=3, edges=[(1, 0, "d"), (2, 0, "d")],
                       edu_of=[0, 0, 0], edu_roots=[0])
        ids = np.array([4, 7, 9])
        out = enc.encode(ids, g)
        # relabel: swap nodes 1 and 2
        g2 = TokenGraph(node_count=3, edges=[(2, 0, "d"), (1, 0, "d")],
                        edu_of=[0, 0, 0], edu_roots=[0])
        out2 = enc.encode(np.array([4, 9, 7]), g2)
        assert np.allclose(out.final.data[1], out2.final.data[2], atol=1e-12)
        assert np.allclose(out.final.data[2], out2.final.data[1], atol=1e-12)

    def test_end_to_end_differentiable(self):
        enc = self.encoder()
        g = linear_parse(["a", "b", "c", "."])
        out = enc.encode(np.array([1, 2, 3, 4]), g)
        nc.backward(nc.sum_all(nc.mul(out.pooled, out.pooled)))
        assert np.abs(enc.embedding.grad).sum() > 0

    def test_full_encoder_grad_check(self):
        g = linear_parse(["a", "b", "c"])
        ids = np.array([1, 2, 3])

        def build(r):
            store = ParamStore(int(r.integers(0, 2**31)))
            enc = GraphEncoder(store, vocab_size=5, config=EncoderConfig(
                embed_dim=4, hidden_dim=4, layers=2, heads=2))
            tensors = [t for _, t in store.items()]
            probe = Tensor(1e-3 * r.normal(size=(3, 4)))

            def fn(ts):
                out = enc.encode(ids, g)
                return nc.sum_all(nc.mul(out.final, probe))

            return tensors, fn

        assert grad_check(build, trials=10, seed=19, max_coords=6) < 1e-4


class TestPooling:
    def test_identical_rows_pool_to_that_row(self):
        row = np.array([1.0, 2.0, 3.0])
        H = Tensor(np.stack([row, row, row]))
        assert np.allclose(pool_class_vector(H).data, row)

    def test_opposite_rows_cancel(self, rng):
        r = rng.normal(size=4)
        H = Tensor(np.stack([r, -r]))
        assert np.allclose(pool_class_vector(H).data, 0.0, atol=1e-15)

    def test_matches_column_mean_oracle(self, rng):
        H = rng.normal(size=(6, 5))
        assert np.allclose(pool_class_vector(Tensor(H)).data, H.mean(axis=0), atol=1e-12)
