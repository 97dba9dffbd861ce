"""Multi-head graph-attention encoder over token graphs.

Produces per-token states and a mean-pooled paragraph vector (the stand-in
for a pretrained class token). Attention for node i is a masked softmax over
its neighborhood in the symmetrized self-looped adjacency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .graph import TokenGraph, adjacency_matrix
from .numcore import ParamStore, Tensor


@dataclass
class EncoderConfig:
    embed_dim: int = 64
    hidden_dim: int = 64
    layers: int = 2
    heads: int = 4
    leaky_slope: float = 0.2
    sigma: str = "tanh"  # per-head nonlinearity: "tanh" or "identity"

    def __post_init__(self):
        if self.hidden_dim % self.heads != 0:
            raise ValueError(f"hidden_dim {self.hidden_dim} not divisible by heads {self.heads}")


@dataclass
class GATLayerParams:
    heads: list[tuple[Tensor, Tensor]]  # per head: W (d_head x d_in), a (2*d_head)
    leaky_slope: float = 0.2
    sigma: str = "tanh"

    @property
    def d_head(self) -> int:
        return self.heads[0][0].data.shape[0]


@dataclass
class EncoderOutput:
    layers: list[Tensor]  # node states after each GAT layer
    pooled: Tensor        # mean over final-layer rows

    @property
    def final(self) -> Tensor:
        return self.layers[-1]


def _check_adjacency(adj: np.ndarray, n: int):
    if adj.shape != (n, n):
        raise ValueError(f"adjacency shape {adj.shape} does not match {n} nodes")
    degree = adj.sum(axis=1)
    if (degree == 0).any():
        i = int(np.argmax(degree == 0))
        raise ValueError(f"node {i} has no neighbors (self-loop missing)")


def gat_attention(h: Tensor, W: Tensor, a: Tensor, adj: np.ndarray,
                  slope: float = 0.2) -> tuple[Tensor, Tensor]:
    """Attention matrix for one head: softmax_j of LeakyReLU(a . [Wh_i || Wh_j]).

    Returns (alpha, Wh); alpha row i is zero outside the neighborhood of i
    and sums to 1 over it.
    """
    n = h.data.shape[0]
    _check_adjacency(adj, n)
    d_head = W.data.shape[0]
    Wh = nc.matmul(h, nc.transpose(W))                       # n x d_head
    a_src = nc.slice_axis(a, 0, d_head)
    a_dst = nc.slice_axis(a, d_head, 2 * d_head)
    s_src = nc.matmul(Wh, a_src)                             # (n,)
    s_dst = nc.matmul(Wh, a_dst)                             # (n,)
    ones_row = Tensor(np.ones((1, n)))
    ones_col = Tensor(np.ones((n, 1)))
    scores = nc.add(nc.matmul(nc.reshape(s_src, (n, 1)), ones_row),
                    nc.matmul(ones_col, nc.reshape(s_dst, (1, n))))
    scores = nc.leaky_relu(scores, slope)
    alpha = nc.softmax(scores, axis=-1, mask=adj)
    return alpha, Wh


def gat_head(h: Tensor, W: Tensor, a: Tensor, adj: np.ndarray,
             slope: float, sigma: str) -> Tensor:
    alpha, Wh = gat_attention(h, W, a, adj, slope)
    agg = nc.matmul(alpha, Wh)
    if sigma == "tanh":
        return nc.tanh(agg)
    if sigma == "identity":
        return agg
    raise ValueError(f"unknown nonlinearity {sigma!r}")


def gat_layer(h: Tensor, params: GATLayerParams, adj: np.ndarray) -> Tensor:
    """Per-head aggregation, nonlinearity, then concatenation across heads."""
    outs = [gat_head(h, W, a, adj, params.leaky_slope, params.sigma)
            for W, a in params.heads]
    return outs[0] if len(outs) == 1 else nc.concat(outs, axis=1)


def pool_class_vector(H: Tensor) -> Tensor:
    """Mean over node rows; the paragraph-level class vector."""
    n = H.data.shape[0]
    if n == 0:
        raise ValueError("pool_class_vector: empty state matrix")
    return nc.scale(nc.sum_axis(H, 0), 1.0 / n)


class GraphEncoder:
    """Embedding table plus a stack of GAT layers over one ParamStore prefix."""

    def __init__(self, store: ParamStore, vocab_size: int,
                 config: EncoderConfig | None = None, prefix: str = "encoder"):
        self.store = store
        self.config = config or EncoderConfig()
        self.prefix = prefix
        self.vocab_size = vocab_size
        cfg = self.config
        self.embedding = store.param(f"{prefix}.embedding", (vocab_size, cfg.embed_dim))
        d_head = cfg.hidden_dim // cfg.heads
        self._layers: list[GATLayerParams] = []
        for layer in range(cfg.layers):
            d_in = cfg.embed_dim if layer == 0 else cfg.hidden_dim
            heads = []
            for k in range(cfg.heads):
                W = store.param(f"{prefix}.gat{layer}.head{k}.W", (d_head, d_in))
                a = store.param(f"{prefix}.gat{layer}.head{k}.a", (2 * d_head,))
                heads.append((W, a))
            self._layers.append(GATLayerParams(
                heads=heads, leaky_slope=cfg.leaky_slope, sigma=cfg.sigma))

    @property
    def output_dim(self) -> int:
        return self.config.hidden_dim if self.config.layers > 0 else self.config.embed_dim

    def encode(self, token_ids: np.ndarray, graph: TokenGraph) -> EncoderOutput:
        """Embed tokens and apply the GAT stack; L=0 returns raw embeddings."""
        token_ids = np.asarray(token_ids, dtype=np.int64)
        if token_ids.size == 0:
            raise ValueError("encode: empty token sequence")
        if graph.node_count != token_ids.size:
            raise ValueError(f"encode: graph has {graph.node_count} nodes, got {token_ids.size} tokens")
        adj = adjacency_matrix(graph)
        h = nc.embed_rows(self.embedding, token_ids)
        states = [h]
        for params in self._layers:
            h = gat_layer(h, params, adj)
            states.append(h)
        return EncoderOutput(layers=states, pooled=pool_class_vector(states[-1]))


def gradcheck_case(rng: np.random.Generator):
    """Full GAT layer as a grad_check builder: 4-node path graph, 2 heads.

    Inputs are resampled until every attention score clears the LeakyReLU
    kink by a margin, so finite differences never straddle it.
    """
    n, d_in, d_head, heads = 4, 5, 3, 2
    adj = np.eye(n)
    for i in range(n - 1):
        adj[i, i + 1] = adj[i + 1, i] = 1.0

    def scores_clear_kink(hd, Ws, As):
        for W, a in zip(Ws, As):
            Wh = hd @ W.T
            s = Wh @ a[:d_head], Wh @ a[d_head:]
            pre = s[0][:, None] + s[1][None, :]
            if np.abs(pre[adj > 0]).min() < 1e-3:
                return False
        return True

    for _ in range(100):
        hd = rng.normal(size=(n, d_in))
        Ws = [rng.normal(size=(d_head, d_in)) for _ in range(heads)]
        As = [rng.normal(size=2 * d_head) for _ in range(heads)]
        if scores_clear_kink(hd, Ws, As):
            break
    h = Tensor(hd)
    tensors = [h]
    for W, a in zip(Ws, As):
        tensors.extend([Tensor(W), Tensor(a)])
    probe = Tensor(1e-3 * rng.normal(size=(n, d_head * heads)))  # small: see numcore._probe

    def fn(ts):
        hh = ts[0]
        params = GATLayerParams(
            heads=[(ts[1 + 2 * k], ts[2 + 2 * k]) for k in range(heads)],
            leaky_slope=0.2, sigma="tanh")
        return nc.sum_all(nc.mul(gat_layer(hh, params, adj), probe))

    return tensors, fn
