"""Question-type distribution learning with pseudo-label count recovery.

Targets append a constant pseudo count of 1 before normalization, so the
predicted distribution encodes absolute per-type question counts, recovered
by dividing out the pseudo slot. Training mixes a KL term against the soft
target with a cross-entropy term on its argmax.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import numcore as nc
from .corpus import HCD_TYPES, Corpus
from .encoders import GraphEncoder
from .graph import build_token_graph
from .model import ModelConfig, Vocabulary
from .numcore import Adam, ParamStore, Tensor

NUM_TYPES = len(HCD_TYPES)
PSEUDO_EPS = 1e-9


@dataclass
class TypeDistribution:
    """Probability vector over the real types plus one trailing pseudo slot."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if (self.probs < 0).any():
            raise ValueError("type distribution has negative entries")
        if abs(self.probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"type distribution sums to {self.probs.sum()}, expected 1")

    @property
    def pseudo(self) -> float:
        return float(self.probs[-1])


@dataclass
class TypeHeadParams:
    W: Tensor              # (T+1) x m
    b: Tensor              # (T+1)
    gamma: float = 0.7     # KL weight in the combined loss

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")


def append_pseudo_label(counts) -> TypeDistribution:
    """(l_1, ..., l_T) -> (l_1/(S+1), ..., l_T/(S+1), 1/(S+1)) with S = sum l."""
    counts = list(counts)
    if any(c < 0 for c in counts):
        raise ValueError(f"negative count in {counts}")
    denom = sum(counts) + 1
    return TypeDistribution(np.array([c / denom for c in counts] + [1.0 / denom]))


def recover_counts(dist: TypeDistribution) -> list[int]:
    """n_i = floor(p_i / p_pseudo + 0.5); requires pseudo mass > 0."""
    p_pseudo = dist.pseudo
    if p_pseudo <= PSEUDO_EPS:
        raise ValueError("no pseudo mass: cannot recover counts")
    return [int(np.floor(p / p_pseudo + 0.5)) for p in dist.probs[:-1]]


def _probs_of(d) -> np.ndarray:
    return d.probs if isinstance(d, TypeDistribution) else np.asarray(d, dtype=np.float64)


def kl_loss(p_true, p_hat) -> float:
    """sum_i p_i log(p_i / p_hat_i); zero-p terms contribute 0, p_hat guarded."""
    p = _probs_of(p_true)
    q = _probs_of(p_hat)
    if p.shape != q.shape:
        raise ValueError(f"kl_loss: shape mismatch {p.shape} vs {q.shape}")
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(np.maximum(q[mask], nc.LOG_EPS)))))


def ce_loss(label: int, y_hat) -> float:
    """-log y_hat[label]."""
    q = _probs_of(y_hat)
    if not 0 <= label < q.shape[0]:
        raise ValueError(f"ce_loss: label {label} out of range for {q.shape[0]} slots")
    return float(-np.log(max(q[label], nc.LOG_EPS)))


def combined_loss(kl: float, ce: float, gamma: float = 0.7) -> float:
    """gamma * kl + (1 - gamma) * ce."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    return gamma * kl + (1.0 - gamma) * ce


def predict_distribution(h_c: Tensor, head: TypeHeadParams) -> TypeDistribution:
    """softmax(W h_c + b) over the T+1 slots."""
    return TypeDistribution(predict_node(h_c, head).data.copy())


def predict_node(h_c: Tensor, head: TypeHeadParams) -> Tensor:
    return nc.softmax(nc.add(nc.matmul(head.W, h_c), head.b))


def kl_node(target: TypeDistribution, p_hat: Tensor) -> Tensor:
    p = target.probs
    const_p = Tensor(p)
    # p_i (log p_i - log p_hat_i); zero-p slots contribute exactly 0
    const_logp = Tensor(np.where(p > 0, np.log(np.maximum(p, nc.LOG_EPS)), 0.0))
    return nc.sum_all(nc.mul(const_p, nc.add(const_logp, nc.scale(nc.log(p_hat), -1.0))))


def ce_node(label: int, y_hat: Tensor) -> Tensor:
    return nc.scale(nc.sum_all(nc.log(nc.slice_axis(y_hat, label, label + 1))), -1.0)


class TypePredictor:
    """Graph encoder plus a (T+1)-way softmax head over the pooled vector.

    Training is multi-task: the distribution head takes the KL term against
    the pseudo-extended count target, while a separate classifier head over
    the same pooled vector takes the cross-entropy term on the argmax class.
    Folding the CE into the distribution head would bias its optimum to
    gamma * target + (1 - gamma) * onehot and put a floor under the KL.
    """

    def __init__(self, vocab: Vocabulary, seed: int, config: ModelConfig | None = None,
                 gamma: float = 0.7):
        self.vocab = vocab
        self.config = config or ModelConfig()
        self.store = ParamStore(seed)
        self.encoder = GraphEncoder(self.store, len(vocab), self.config.encoder_config())
        m = self.encoder.output_dim
        self.head = TypeHeadParams(
            W=self.store.param("type_head.W", (NUM_TYPES + 1, m)),
            b=self.store.param("type_head.b", (NUM_TYPES + 1,), init="zeros"),
            gamma=gamma,
        )
        self.cls_head = TypeHeadParams(
            W=self.store.param("type_cls.W", (NUM_TYPES + 1, m)),
            b=self.store.param("type_cls.b", (NUM_TYPES + 1,), init="zeros"),
            gamma=gamma,
        )

    def forward(self, tokens: list[str], graph) -> Tensor:
        enc_out = self.encoder.encode(self.vocab.encode(tokens), graph)
        return predict_node(enc_out.pooled, self.head)

    def forward_both(self, tokens: list[str], graph) -> tuple[Tensor, Tensor]:
        """(distribution-head probs, classifier-head probs) for training."""
        enc_out = self.encoder.encode(self.vocab.encode(tokens), graph)
        return (predict_node(enc_out.pooled, self.head),
                predict_node(enc_out.pooled, self.cls_head))

    def predict(self, tokens: list[str], graph) -> TypeDistribution:
        return TypeDistribution(self.forward(tokens, graph).data.copy())

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.store.save(out / "params.npz")
        meta = {
            "kind": "typedist",
            "seed": self.store.seed,
            "gamma": self.head.gamma,
            "config": asdict(self.config),
            "num_order_tags": self.vocab.num_order_tags,
            "vocab": self.vocab.tokens,
        }
        (out / "meta.json").write_text(json.dumps(meta, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, in_dir) -> "TypePredictor":
        src = Path(in_dir)
        meta = json.loads((src / "meta.json").read_text(encoding="utf-8"))
        vocab = Vocabulary(meta["vocab"], num_order_tags=meta["num_order_tags"])
        model = cls(vocab, meta["seed"], ModelConfig(**meta["config"]), gamma=meta["gamma"])
        loaded = ParamStore.load(src / "params.npz")
        for name, tensor in model.store.items():
            tensor.data[...] = loaded.get(name).data
        return model


def train_typedist(corpus: Corpus, model: TypePredictor, epochs: int,
                   lr: float = 2e-3) -> list[dict]:
    """Overfit the head+encoder on per-paragraph count targets; logs mean KL."""
    if not corpus.paragraphs:
        raise ValueError("train_typedist: empty corpus")
    graphs = [build_token_graph(p.tokens, p.dep_heads, p.dep_labels,
                                p.edu_spans, p.edu_heads) for p in corpus.paragraphs]
    targets = [append_pseudo_label(p.question_counts()) for p in corpus.paragraphs]
    opt = Adam(model.store, lr=lr)
    gamma = model.head.gamma
    labels = [int(np.argmax(t.probs)) for t in targets]  # ties -> lowest index
    log = []
    for epoch in range(epochs):
        kls = []
        losses = []
        for p, g, target, label in zip(corpus.paragraphs, graphs, targets, labels):
            p_hat, y_cls = model.forward_both(p.tokens, g)
            loss = nc.add(nc.scale(kl_node(target, p_hat), gamma),
                          nc.scale(ce_node(label, y_cls), 1.0 - gamma))
            kls.append(kl_loss(target, p_hat.data))
            losses.append(float(loss.data))
            nc.backward(loss)
            opt.step()
        log.append({"epoch": epoch, "mean_kl": sum(kls) / len(kls),
                    "mean_loss": sum(losses) / len(losses)})
    return log
