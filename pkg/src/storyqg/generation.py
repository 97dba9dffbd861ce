"""Summary and question generation, extractive baselines, and the pipeline.

The full pipeline predicts per-type question counts, generates one
control-conditioned event summary per (type, order) slot, turns each summary
into a question, and post-filters duplicates and fragments. Extractive
baselines (lead/last/random/total/TextRank) and the end-to-end model replace
the middle stage for ablations.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .corpus import HCD_TYPES, ParsedParagraph, QuestionType
from .graph import TokenGraph, build_token_graph, linear_parse, prefix_graph, split_sentences
from .model import TYPE_TAGS, Seq2SeqModel, order_tag
from .typedist import TypeDistribution, TypePredictor, recover_counts

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """A pipeline stage failed; message names the stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"pipeline stage {stage!r} failed: {cause}")
        self.stage = stage


@dataclass
class ControlSignal:
    qtype: QuestionType
    order: int

    @property
    def tags(self) -> list[str]:
        return [TYPE_TAGS[self.qtype.value], order_tag(self.order)]


def make_control_input(qtype: QuestionType | str, order: int,
                       paragraph_tokens: list[str], num_order_tags: int = 5) -> list[str]:
    """Prepend <type> <order> control tokens to the paragraph."""
    qtype = QuestionType(qtype)
    if qtype.value not in TYPE_TAGS:
        raise ValueError(f"no control tag for question type {qtype.value!r}")
    if not 1 <= order <= num_order_tags:
        raise ValueError(f"order tag {order} outside configured range 1..{num_order_tags}")
    return [TYPE_TAGS[qtype.value], order_tag(order), *paragraph_tokens]


@dataclass
class PipelineItem:
    qtype: QuestionType
    order: int
    summary: list[str]
    question: list[str]
    kept: bool = True
    filter_reason: str | None = None


@dataclass
class PipelineOutput:
    paragraph_id: str
    distribution: TypeDistribution | None
    counts: list[int]
    items: list[PipelineItem] = field(default_factory=list)

    def questions(self, kept_only: bool = True) -> list[list[str]]:
        return [it.question for it in self.items if it.kept or not kept_only]


def _paragraph_graph(p: ParsedParagraph) -> TokenGraph:
    return build_token_graph(p.tokens, p.dep_heads, p.dep_labels, p.edu_spans, p.edu_heads)


def generate_summaries(paragraph_tokens: list[str], graph: TokenGraph, counts: list[int],
                       summarizer: Seq2SeqModel) -> list[tuple[QuestionType, int, list[str]]]:
    """One summary per (type, order) slot, types in fixed order, orders ascending.

    Counts beyond the configured order-tag range are clamped with a warning.
    """
    num_tags = summarizer.vocab.num_order_tags
    out = []
    for qtype, n in zip(HCD_TYPES, counts):
        if n > num_tags:
            log.warning("paragraph needs %d %s summaries, clamping to %d order tags",
                        n, qtype.value, num_tags)
            n = num_tags
        for order in range(1, n + 1):
            tokens = make_control_input(qtype, order, paragraph_tokens, num_tags)
            g = prefix_graph(graph, 2)
            out.append((qtype, order, summarizer.generate(tokens, g)))
    return out


def generate_questions(summaries: list[tuple[QuestionType, int, list[str]]],
                       qgen: Seq2SeqModel) -> list[tuple[QuestionType, int, list[str]]]:
    """One question per tagged summary; no answer spans are involved."""
    out = []
    for qtype, order, summary in summaries:
        if not summary:
            out.append((qtype, order, []))
            continue
        if qgen.config.use_control:
            tokens = make_control_input(qtype, order, summary, qgen.vocab.num_order_tags)
            g = prefix_graph(linear_parse(summary), 2)
        else:
            tokens = list(summary)
            g = linear_parse(summary)
        out.append((qtype, order, qgen.generate(tokens, g)))
    return out


def postfilter(questions: list[list[str]]) -> list[list[str]]:
    """Drop exact duplicates (keep first) and questions shorter than 3 tokens."""
    return [q for q, (kept, _) in zip(questions, postfilter_flags(questions)) if kept]


def postfilter_flags(questions: list[list[str]]) -> list[tuple[bool, str | None]]:
    flags: list[tuple[bool, str | None]] = []
    seen: set[tuple[str, ...]] = set()
    for q in questions:
        key = tuple(q)
        if len(q) < 3:
            flags.append((False, "too_short"))
        elif key in seen:
            flags.append((False, "duplicate"))
        else:
            seen.add(key)
            flags.append((True, None))
    return flags


@dataclass
class PipelineModels:
    typedist: TypePredictor
    summarizer: Seq2SeqModel
    qgen: Seq2SeqModel


def run_pipeline(paragraph: ParsedParagraph, models: PipelineModels) -> PipelineOutput:
    """predict counts -> summaries -> questions -> postfilter.

    Any stage failure aborts with the stage name; intermediate artifacts are
    all recorded on the output.
    """
    try:
        graph = _paragraph_graph(paragraph)
    except Exception as exc:
        raise PipelineError("graph", exc) from exc
    try:
        dist = models.typedist.predict(paragraph.tokens, graph)
        counts = recover_counts(dist)
    except Exception as exc:
        raise PipelineError("typedist", exc) from exc
    try:
        summaries = generate_summaries(paragraph.tokens, graph, counts, models.summarizer)
    except Exception as exc:
        raise PipelineError("summarizer", exc) from exc
    try:
        questions = generate_questions(summaries, models.qgen)
    except Exception as exc:
        raise PipelineError("qgen", exc) from exc
    flags = postfilter_flags([q for _, _, q in questions])
    items = [
        PipelineItem(qtype=qt, order=order, summary=summary, question=question,
                     kept=kept, filter_reason=reason)
        for (qt, order, summary), (_, _, question), (kept, reason)
        in zip(summaries, questions, flags)
    ]
    return PipelineOutput(paragraph_id=paragraph.pid, distribution=dist,
                          counts=counts, items=items)


# ---------------------------------------------------------------------------
# baselines

BASELINE_MODES = ("lead3", "last3", "random3", "total")


def extract_baseline(paragraph_tokens: list[str], mode: str, seed: int = 0,
                     k: int = 3) -> list[list[str]]:
    """Sentence-extractive summaries: lead/last/random k or every sentence."""
    sentences = split_sentences(paragraph_tokens)
    n = len(sentences)
    if mode == "lead3":
        return sentences[:min(k, n)]
    if mode == "last3":
        return sentences[max(0, n - k):]
    if mode == "random3":
        rng = np.random.default_rng(seed)
        idx = sorted(rng.choice(n, size=min(k, n), replace=False).tolist())
        return [sentences[i] for i in idx]
    if mode == "total":
        return sentences
    raise ValueError(f"unknown baseline mode {mode!r}")


def _sentence_similarity(a: list[str], b: list[str]) -> float:
    sa, sb = set(a), set(b)
    if not sa or not sb:
        return 0.0
    overlap = len(sa & sb)
    return 2.0 * overlap / (len(sa) + len(sb))


def textrank_scores(sentences: list[list[str]], damping: float = 0.85,
                    tol: float = 1e-6, max_iter: int = 1000) -> np.ndarray:
    """Damped PageRank over the sentence-overlap graph; scores sum to n.

    Sentences with no outgoing similarity distribute their mass uniformly.
    """
    n = len(sentences)
    w = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                w[i, j] = _sentence_similarity(sentences[i], sentences[j])
    out_sum = w.sum(axis=1)
    scores = np.ones(n)
    for _ in range(max_iter):
        incoming = np.zeros(n)
        dangling = 0.0
        for j in range(n):
            if out_sum[j] > 0:
                incoming += scores[j] * w[j] / out_sum[j]
            else:
                dangling += scores[j]
        new_scores = (1.0 - damping) + damping * (incoming + dangling / n)
        if np.abs(new_scores - scores).sum() < tol:
            scores = new_scores
            break
        scores = new_scores
    return scores


def textrank_summary(paragraph_tokens: list[str], k: int) -> list[list[str]]:
    """Top-k sentences by TextRank score; ties go to the earlier sentence."""
    sentences = split_sentences(paragraph_tokens)
    if not sentences:
        raise ValueError("textrank_summary: no sentences")
    scores = textrank_scores(sentences)
    ranked = sorted(range(len(sentences)), key=lambda i: (-scores[i], i))
    return [sentences[i] for i in ranked[:k]]


def e2e_generate(paragraph_tokens: list[str], graph: TokenGraph,
                 model: Seq2SeqModel, max_len: int = 100,
                 keep_first: int = 2) -> list[list[str]]:
    """Decode one long sequence, split at question marks, keep the first two."""
    decoded = model.generate(paragraph_tokens, graph, max_len=max_len)
    questions: list[list[str]] = []
    current: list[str] = []
    for tok in decoded:
        current.append(tok)
        if tok == "?":
            questions.append(current)
            current = []
    if current:
        questions.append(current)
    return questions[:keep_first]


def wo_tdl_generate(paragraph: ParsedParagraph, summarizer: Seq2SeqModel,
                    qgen: Seq2SeqModel, keep_first: int = 2) -> PipelineOutput:
    """Ablation without type-distribution learning.

    The summarizer was trained on concatenated silver statements; the first
    two decoded sentences become untyped summaries for the question model.
    """
    graph = _paragraph_graph(paragraph)
    decoded = summarizer.generate(paragraph.tokens, graph)
    sentences = split_sentences(decoded)[:keep_first]
    summaries = [(HCD_TYPES[0], i + 1, sent) for i, sent in enumerate(sentences)]
    questions = generate_questions(summaries, qgen)
    flags = postfilter_flags([q for _, _, q in questions])
    items = [PipelineItem(qtype=qt, order=order, summary=s, question=q, kept=kept,
                          filter_reason=reason)
             for (qt, order, s), (_, _, q), (kept, reason) in zip(summaries, questions, flags)]
    return PipelineOutput(paragraph_id=paragraph.pid, distribution=None,
                          counts=[len(items), 0, 0], items=items)


# ---------------------------------------------------------------------------
# pipeline output serialization

def write_outputs(outputs: list[PipelineOutput], path, header: dict | None = None) -> None:
    """Line-delimited records: one distribution record plus one per item stage."""
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps({"_header": header}, sort_keys=True) + "\n")
        for out in outputs:
            if out.distribution is not None:
                fh.write(json.dumps({
                    "paragraph_id": out.paragraph_id, "stage": "distribution",
                    "probs": out.distribution.probs.tolist(), "counts": out.counts,
                }, sort_keys=True) + "\n")
            for item in out.items:
                for stage, tokens in (("summary", item.summary), ("question", item.question)):
                    fh.write(json.dumps({
                        "paragraph_id": out.paragraph_id, "stage": stage,
                        "qtype": item.qtype.value, "order": item.order,
                        "tokens": tokens, "kept": item.kept,
                        "filter_reason": item.filter_reason,
                    }, sort_keys=True) + "\n")


def read_outputs(path) -> list[PipelineOutput]:
    by_id: dict[str, PipelineOutput] = {}
    items_by_key: dict[tuple, PipelineItem] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if any(k.startswith("_") for k in rec):
                continue
            pid = rec["paragraph_id"]
            out = by_id.setdefault(pid, PipelineOutput(
                paragraph_id=pid, distribution=None, counts=[0, 0, 0]))
            if rec["stage"] == "distribution":
                out.distribution = TypeDistribution(np.array(rec["probs"]))
                out.counts = list(rec["counts"])
                continue
            key = (pid, rec["qtype"], rec["order"])
            item = items_by_key.get(key)
            if item is None:
                item = PipelineItem(qtype=QuestionType(rec["qtype"]), order=rec["order"],
                                    summary=[], question=[], kept=rec["kept"],
                                    filter_reason=rec["filter_reason"])
                items_by_key[key] = item
                out.items.append(item)
            if rec["stage"] == "summary":
                item.summary = list(rec["tokens"])
            else:
                item.question = list(rec["tokens"])
                item.kept = rec["kept"]
                item.filter_reason = rec["filter_reason"]
    return list(by_id.values())
