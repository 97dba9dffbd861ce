"""LSTM sequence decoder over graph-encoder states.

Additive attention conditioned on a coverage vector, a copy gate mixing the
vocabulary softmax with the attention distribution over source tokens, a
coverage loss penalizing re-attention, scheduled sampling during training,
and greedy decoding. Shared by the summarizer, the question generator, and
the end-to-end baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numcore as nc
from .numcore import ParamStore, Tensor


@dataclass
class DecoderConfig:
    embed_dim: int = 64
    hidden_dim: int = 64
    attn_dim: int = 64


class DecoderParams:
    """Decoder parameter views over a ParamStore prefix.

    The embedding table is shared with the encoder of the same model.
    """

    def __init__(self, store: ParamStore, embedding: Tensor, enc_dim: int,
                 vocab_size: int, config: DecoderConfig | None = None,
                 prefix: str = "decoder"):
        cfg = config or DecoderConfig()
        self.config = cfg
        self.embedding = embedding
        self.enc_dim = enc_dim
        self.vocab_size = vocab_size
        e, h, a = cfg.embed_dim, cfg.hidden_dim, cfg.attn_dim
        p = store.param
        self.W_lstm = p(f"{prefix}.lstm.W", (4 * h, e + h))
        self.b_lstm = p(f"{prefix}.lstm.b", (4 * h,), init="zeros")
        self.W_att_h = p(f"{prefix}.att.W_h", (a, enc_dim))
        self.W_att_s = p(f"{prefix}.att.W_s", (a, h))
        self.w_att_c = p(f"{prefix}.att.w_c", (a,))
        self.b_att = p(f"{prefix}.att.b", (a,), init="zeros")
        self.v_att = p(f"{prefix}.att.v", (a,))
        self.w_copy_hstar = p(f"{prefix}.copy.w_hstar", (enc_dim,))
        self.w_copy_s = p(f"{prefix}.copy.w_s", (h,))
        self.w_copy_x = p(f"{prefix}.copy.w_x", (e,))
        self.b_copy = p(f"{prefix}.copy.b_ptr", (), init="zeros")
        self.W_out = p(f"{prefix}.out.W", (vocab_size, h + enc_dim))
        self.b_out = p(f"{prefix}.out.b", (vocab_size,), init="zeros")
        self.W_init_h = p(f"{prefix}.init.W_h", (h, enc_dim))
        self.b_init_h = p(f"{prefix}.init.b_h", (h,), init="zeros")
        self.W_init_c = p(f"{prefix}.init.W_c", (h, enc_dim))
        self.b_init_c = p(f"{prefix}.init.b_c", (h,), init="zeros")


@dataclass
class DecoderState:
    s: Tensor                 # LSTM hidden
    cell: Tensor              # LSTM cell
    coverage: Tensor          # c^t = sum of previous attention vectors
    t: int = 0
    attention_history: list[Tensor] = field(default_factory=list)
    emitted: list[int] = field(default_factory=list)


def init_state(H: Tensor, params: DecoderParams) -> DecoderState:
    """Initial LSTM state: learned projection of the mean encoder state."""
    n = H.data.shape[0]
    mean_h = nc.scale(nc.sum_axis(H, 0), 1.0 / n)
    s0 = nc.tanh(nc.add(nc.matmul(params.W_init_h, mean_h), params.b_init_h))
    c0 = nc.tanh(nc.add(nc.matmul(params.W_init_c, mean_h), params.b_init_c))
    return DecoderState(s=s0, cell=c0, coverage=Tensor(np.zeros(n)))


def lstm_step(x: Tensor, state: DecoderState, params: DecoderParams) -> tuple[Tensor, Tensor]:
    h = params.config.hidden_dim
    gates = nc.add(nc.matmul(params.W_lstm, nc.concat([x, state.s])), params.b_lstm)
    i = nc.sigmoid(nc.slice_axis(gates, 0, h))
    f = nc.sigmoid(nc.slice_axis(gates, h, 2 * h))
    g = nc.tanh(nc.slice_axis(gates, 2 * h, 3 * h))
    o = nc.sigmoid(nc.slice_axis(gates, 3 * h, 4 * h))
    cell = nc.add(nc.mul(f, state.cell), nc.mul(i, g))
    s = nc.mul(o, nc.tanh(cell))
    return s, cell


def project_encoder_states(H: Tensor, params: DecoderParams) -> Tensor:
    """Precompute W_h H for the additive attention, once per sequence."""
    return nc.matmul(H, nc.transpose(params.W_att_h))


def attention_step(H: Tensor, s: Tensor, coverage: Tensor, params: DecoderParams,
                   H_proj: Tensor | None = None) -> tuple[Tensor, Tensor, Tensor]:
    """Coverage-conditioned additive attention.

    e_i = v . tanh(W_h h_i + W_s s + w_c c_i + b); returns (e, alpha, h_star).
    """
    n = H.data.shape[0]
    if H_proj is None:
        H_proj = project_encoder_states(H, params)
    a = params.config.attn_dim
    srow = nc.reshape(nc.add(nc.matmul(params.W_att_s, s), params.b_att), (1, a))
    s_bcast = nc.matmul(Tensor(np.ones((n, 1))), srow)
    c_term = nc.matmul(nc.reshape(coverage, (n, 1)), nc.reshape(params.w_att_c, (1, a)))
    e = nc.matmul(nc.tanh(nc.add(nc.add(H_proj, s_bcast), c_term)), params.v_att)
    alpha = nc.softmax(e)
    h_star = nc.matmul(alpha, H)
    return e, alpha, h_star


def copy_gate(h_star: Tensor, s: Tensor, x: Tensor, params: DecoderParams) -> Tensor:
    """p_copy = sigmoid(w_hstar . h* + w_s . s + w_x . x + b_ptr), scalar in (0, 1)."""
    z = nc.add(nc.add(nc.matmul(params.w_copy_hstar, h_star),
                      nc.matmul(params.w_copy_s, s)),
               nc.add(nc.matmul(params.w_copy_x, x), params.b_copy))
    return nc.sigmoid(z)


def final_distribution(p_vocab: Tensor, alpha: Tensor, p_copy: Tensor,
                       src_ext_ids: np.ndarray, ext_size: int) -> Tensor:
    """P(w) = (1 - p_copy) p_vocab(w) + p_copy sum_{i: src_i = w} alpha_i.

    Defined over the extended vocabulary (base vocab plus source OOV slots);
    sums to 1 for any p_copy in [0, 1].
    """
    vocab_size = p_vocab.data.shape[0]
    if ext_size < vocab_size:
        raise ValueError(f"extended vocab {ext_size} smaller than base vocab {vocab_size}")
    p_ext = p_vocab if ext_size == vocab_size else nc.concat(
        [p_vocab, Tensor(np.zeros(ext_size - vocab_size))])
    copy_part = nc.scatter_add(alpha, src_ext_ids, ext_size)
    keep = nc.add(Tensor(1.0), nc.scale(p_copy, -1.0))
    return nc.add(nc.mul(p_ext, keep), nc.mul(copy_part, p_copy))


def coverage_update(state: DecoderState, alpha: Tensor) -> Tensor:
    """c^{t+1} = c^t + alpha^t; history is appended for invariant checks."""
    state.attention_history.append(alpha)
    return nc.add(state.coverage, alpha)


def coverage_loss(alpha: Tensor, coverage: Tensor) -> Tensor:
    """covloss_t = sum_i min(alpha_i^t, c_i^t)."""
    return nc.sum_all(nc.minimum(alpha, coverage))


@dataclass
class StepOutput:
    dist: Tensor        # final distribution over the extended vocabulary
    alpha: Tensor
    p_copy: Tensor
    covloss: Tensor


def decode_step(input_id: int, state: DecoderState, H: Tensor, H_proj: Tensor,
                params: DecoderParams, src_ext_ids: np.ndarray, ext_size: int) -> StepOutput:
    """One decoder step; mutates ``state`` (LSTM state, coverage, t)."""
    x = nc.embed_rows(params.embedding, np.array([input_id]))
    x = nc.reshape(x, (params.config.embed_dim,))
    state.s, state.cell = lstm_step(x, state, params)
    _, alpha, h_star = attention_step(H, state.s, state.coverage, params, H_proj)
    out = nc.softmax(nc.add(nc.matmul(params.W_out, nc.concat([state.s, h_star])), params.b_out))
    p_copy = copy_gate(h_star, state.s, x, params)
    dist = final_distribution(out, alpha, p_copy, src_ext_ids, ext_size)
    cov = coverage_loss(alpha, state.coverage)
    state.coverage = coverage_update(state, alpha)
    state.t += 1
    return StepOutput(dist=dist, alpha=alpha, p_copy=p_copy, covloss=cov)


def _next_input(ext_id: int, vocab_size: int, unk_id: int) -> int:
    return ext_id if ext_id < vocab_size else unk_id


def decode_greedy(H: Tensor, params: DecoderParams, src_ext_ids: np.ndarray,
                  ext_size: int, max_len: int, bos_id: int, eos_id: int,
                  unk_id: int, trace: list | None = None) -> list[int]:
    """Argmax decoding until eos or max_len; returns extended-vocab ids.

    Deterministic: argmax ties resolve to the lowest id.
    """
    if max_len < 1:
        raise ValueError("decode_greedy: max_len must be >= 1")
    state = init_state(H, params)
    H_proj = project_encoder_states(H, params)
    out_ids: list[int] = []
    prev = bos_id
    for _ in range(max_len):
        step = decode_step(prev, state, H, H_proj, params, src_ext_ids, ext_size)
        nxt = int(np.argmax(step.dist.data))
        if trace is not None:
            trace.append({"alpha": step.alpha.data.copy(),
                          "p_copy": float(step.p_copy.data)})
        if nxt == eos_id:
            break
        out_ids.append(nxt)
        state.emitted.append(nxt)
        prev = _next_input(nxt, params.vocab_size, unk_id)
    return out_ids


@dataclass
class DecoderExample:
    """One training pair: encoder states plus extended-vocab target ids."""
    H: Tensor
    src_ext_ids: np.ndarray
    ext_size: int
    target_ids: list[int]  # gold output, ending with eos


def train_step(example: DecoderExample, params: DecoderParams,
               teacher_forcing_prob: float, bos_id: int, unk_id: int,
               rng: np.random.Generator, lam_cov: float = 0.0) -> Tensor:
    """Per-token-averaged NLL plus weighted coverage loss for one sequence.

    Each step consumes the gold previous token with probability
    ``teacher_forcing_prob``, otherwise the model's own argmax (scheduled
    sampling).
    """
    if not 0.0 <= teacher_forcing_prob <= 1.0:
        raise ValueError("teacher_forcing_prob must lie in [0, 1]")
    targets = example.target_ids
    if not targets:
        raise ValueError("train_step: empty target")
    state = init_state(example.H, params)
    H_proj = project_encoder_states(example.H, params)
    terms: list[Tensor] = []
    prev = bos_id
    for t, gold in enumerate(targets):
        step = decode_step(prev, state, example.H, H_proj, params,
                           example.src_ext_ids, example.ext_size)
        gold_p = nc.slice_axis(step.dist, gold, gold + 1)
        terms.append(nc.scale(nc.sum_all(nc.log(gold_p)), -1.0))
        if lam_cov != 0.0:
            terms.append(nc.scale(step.covloss, lam_cov))
        if t + 1 < len(targets):
            if rng.uniform() < teacher_forcing_prob:
                prev = _next_input(gold, params.vocab_size, unk_id)
            else:
                prev = _next_input(int(np.argmax(step.dist.data)), params.vocab_size, unk_id)
    total = terms[0]
    for term in terms[1:]:
        total = nc.add(total, term)
    return nc.scale(total, 1.0 / len(targets))


def scheduled_sampling_prob(epoch: int, floor: float = 0.5, decay: float = 1.0 / 20.0) -> float:
    """Teacher-forcing probability schedule: max(floor, 1 - epoch * decay)."""
    return max(floor, 1.0 - epoch * decay)


def trace_to_text(trace: list[dict]) -> str:
    """Decode trace (per-step attention and copy gate) as JSON lines."""
    import json

    lines = [json.dumps({"step": t, "alpha": rec["alpha"].tolist(),
                         "p_copy": rec["p_copy"]}, sort_keys=True)
             for t, rec in enumerate(trace)]
    return "\n".join(lines) + ("\n" if lines else "")


def gradcheck_case(rng: np.random.Generator):
    """One full decoder step (NLL + coverage loss) as a grad_check builder.

    Coverage entries are kept away from ties with the attention vector so FD
    never crosses the min kink.
    """
    n, d_enc, vocab, ext = 3, 4, 6, 7
    cfg = DecoderConfig(embed_dim=3, hidden_dim=3, attn_dim=3)
    store = ParamStore(int(rng.integers(0, 2**31)))
    emb = store.param("embedding", (vocab, cfg.embed_dim))
    params = DecoderParams(store, emb, d_enc, vocab, cfg)
    src_ext_ids = np.array([1, 6, 2])
    gold = 4
    input_id = 2
    H = Tensor(rng.normal(size=(n, d_enc)))
    x0 = nc.reshape(nc.embed_rows(emb, np.array([input_id])), (cfg.embed_dim,))
    for _ in range(100):
        coverage = Tensor(rng.uniform(0.4, 1.2, size=n))
        probe_state = DecoderState(s=Tensor(np.zeros(cfg.hidden_dim)),
                                   cell=Tensor(np.zeros(cfg.hidden_dim)), coverage=coverage)
        s1, _ = lstm_step(x0, probe_state, params)
        _, alpha, _ = attention_step(H, s1, coverage, params)
        if np.abs(alpha.data - coverage.data).min() > 5e-3:
            break
    tensors = [H, coverage] + [t for _, t in store.items()]

    def fn(ts):
        hh, cov = ts[0], ts[1]
        state = DecoderState(s=Tensor(np.zeros(cfg.hidden_dim)),
                             cell=Tensor(np.zeros(cfg.hidden_dim)),
                             coverage=cov)
        x = nc.reshape(nc.embed_rows(params.embedding, np.array([input_id])), (cfg.embed_dim,))
        state.s, state.cell = lstm_step(x, state, params)
        _, alpha, h_star = attention_step(hh, state.s, cov, params)
        out = nc.softmax(nc.add(nc.matmul(params.W_out, nc.concat([state.s, h_star])), params.b_out))
        p_copy = copy_gate(h_star, state.s, x, params)
        dist = final_distribution(out, alpha, p_copy, src_ext_ids, ext)
        nll = nc.scale(nc.sum_all(nc.log(nc.slice_axis(dist, gold, gold + 1))), -1.0)
        loss = nc.add(nll, coverage_loss(alpha, cov))
        return nc.scale(loss, 1e-3)  # small loss: below the FD error floor

    return tensors, fn
