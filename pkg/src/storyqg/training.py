"""Dataset assembly and training loops for the sequence models.

Batch size is fixed at 1. Scheduled sampling decays teacher forcing per
epoch; the coverage term joins the loss once early training has stabilized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numcore as nc
from .corpus import HCD_TYPES, Corpus
from .decoder import DecoderExample, scheduled_sampling_prob, train_step
from .generation import make_control_input
from .graph import TokenGraph, build_token_graph, linear_parse, prefix_graph
from .model import Seq2SeqModel
from .numcore import Adam


@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 2e-3
    lam_cov: float = 1.0
    cov_start_epoch: int = 5
    ss_floor: float = 0.5
    ss_decay: float = 1.0 / 20.0
    seed: int = 0


@dataclass
class SeqExample:
    src_tokens: list[str]
    graph: TokenGraph
    target_tokens: list[str]
    base_ids: np.ndarray = field(default=None, repr=False)
    ext_ids: np.ndarray = field(default=None, repr=False)
    oov: list[str] = field(default_factory=list, repr=False)
    target_ids: list[int] = field(default_factory=list, repr=False)


def _bind(model: Seq2SeqModel, ex: SeqExample) -> SeqExample:
    base, ext, oov = model.vocab.encode_extended(ex.src_tokens)
    ex.base_ids, ex.ext_ids, ex.oov = base, ext, oov
    ex.target_ids = model.vocab.encode_target(ex.target_tokens, oov) + [model.vocab.eos_id]
    return ex


def _paragraph_graph(p) -> TokenGraph:
    return build_token_graph(p.tokens, p.dep_heads, p.dep_labels, p.edu_spans, p.edu_heads)


def _silver_sorted(p):
    return sorted(p.silver, key=lambda s: (HCD_TYPES.index(s.qtype), s.order_index))


def _qa_sorted(p):
    return sorted(p.qa, key=lambda q: (HCD_TYPES.index(q.qtype), q.order_index))


def summarizer_examples(corpus: Corpus, model: Seq2SeqModel,
                        qtype=None) -> list[SeqExample]:
    """Control-prefixed paragraph -> silver statement pairs.

    With ``model.config.use_control`` off (the no-type-distribution
    ablation), the single target per paragraph is the concatenation of its
    silver statements.
    """
    examples = []
    num_tags = model.vocab.num_order_tags
    for p in corpus.paragraphs:
        if not p.silver:
            continue
        graph = _paragraph_graph(p)
        if model.config.use_control:
            for s in _silver_sorted(p):
                if qtype is not None and s.qtype != qtype:
                    continue
                if s.order_index > num_tags:
                    continue
                src = make_control_input(s.qtype, s.order_index, p.tokens, num_tags)
                examples.append(_bind(model, SeqExample(src, prefix_graph(graph, 2), list(s.tokens))))
        else:
            target = [tok for s in _silver_sorted(p) for tok in s.tokens]
            examples.append(_bind(model, SeqExample(list(p.tokens), graph, target)))
    return examples


def qgen_examples(corpus: Corpus, model: Seq2SeqModel,
                  qtype=None) -> list[SeqExample]:
    """Silver statement -> gold question pairs, matched by (type, order)."""
    examples = []
    num_tags = model.vocab.num_order_tags
    for p in corpus.paragraphs:
        questions = {(q.qtype, q.order_index): q.question for q in p.qa}
        for s in _silver_sorted(p):
            if qtype is not None and s.qtype != qtype:
                continue
            target = questions.get((s.qtype, s.order_index))
            if target is None:
                continue
            base = linear_parse(s.tokens)
            if model.config.use_control:
                if s.order_index > num_tags:
                    continue
                src = make_control_input(s.qtype, s.order_index, s.tokens, num_tags)
                examples.append(_bind(model, SeqExample(src, prefix_graph(base, 2), list(target))))
            else:
                examples.append(_bind(model, SeqExample(list(s.tokens), base, list(target))))
    return examples


def e2e_examples(corpus: Corpus, model: Seq2SeqModel) -> list[SeqExample]:
    """Paragraph -> concatenated gold questions, for the end-to-end baseline."""
    examples = []
    for p in corpus.paragraphs:
        if not p.qa:
            continue
        target = [tok for q in _qa_sorted(p) for tok in q.question]
        examples.append(_bind(model, SeqExample(list(p.tokens), _paragraph_graph(p), target)))
    return examples


def train_seq2seq(model: Seq2SeqModel, examples: list[SeqExample],
                  config: TrainConfig) -> list[dict]:
    """Batch-1 training over all examples; returns the per-epoch loss log."""
    if not examples:
        raise ValueError("train_seq2seq: no training examples")
    opt = Adam(model.store, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    log = []
    for epoch in range(config.epochs):
        tf_prob = scheduled_sampling_prob(epoch, config.ss_floor, config.ss_decay)
        lam = config.lam_cov if epoch >= config.cov_start_epoch else 0.0
        losses = []
        for ex in examples:
            enc_out = model.encoder.encode(ex.base_ids, ex.graph)
            dec_ex = DecoderExample(H=enc_out.final, src_ext_ids=ex.ext_ids,
                                    ext_size=len(model.vocab) + len(ex.oov),
                                    target_ids=ex.target_ids)
            loss = train_step(dec_ex, model.decoder, tf_prob, model.vocab.bos_id,
                              model.vocab.unk_id, rng, lam_cov=lam)
            losses.append(float(loss.data))
            nc.backward(loss)
            opt.step()
        log.append({"epoch": epoch, "mean_loss": sum(losses) / len(losses),
                    "teacher_forcing": tf_prob})
    return log
