"""Deterministic synthetic corpus builder.

Emits schema-complete annotated paragraphs (tokens, dependency heads, EDU
spans, EDU heads, typed QA pairs) from small narrative templates. Used by
the test suite and as demo input for the CLI:

    python -m storyqg.fixtures corpus.jsonl --train 20 --val 3
"""

from __future__ import annotations

import argparse

import numpy as np

from .corpus import (
    Corpus,
    ParsedParagraph,
    QARecord,
    QuestionType,
    save_corpus,
)

ACTORS = ["fox", "crow", "farmer", "king", "maiden", "wolf", "boy", "girl",
          "queen", "dog", "cat", "bird", "miller", "bear"]
OBJECTS = ["cheese", "pears", "bone", "crown", "apple", "bread", "ring",
           "boat", "garden", "well"]
ADJECTIVES = ["sweet", "shiny", "tasty", "golden", "dark", "angry", "happy",
              "old", "clever", "hungry"]
# (base, past) pairs; past forms agree with corpus.past_tense
TRANS_VERBS = [("take", "took"), ("find", "found"), ("chase", "chased"),
               ("guard", "guarded"), ("watch", "watched"), ("follow", "followed"),
               ("open", "opened"), ("keep", "kept"), ("hide", "hid"), ("drop", "dropped")]
INTRANS_VERBS = [("sing", "sang"), ("run", "ran"), ("fall", "fell"),
                 ("sleep", "slept"), ("swim", "swam"), ("jump", "jumped")]

_PUNCT = {".", ",", "?", "!"}


def _star_parse(sent: list[str]) -> tuple[list[int], list[str]]:
    """Star dependency tree: everything heads to the last non-punct token."""
    root = max(i for i, t in enumerate(sent) if t not in _PUNCT)
    heads = [root] * len(sent)
    heads[root] = root
    labels = ["punct" if t in _PUNCT else "dep" for t in sent]
    labels[root] = "root"
    return heads, labels


def _assemble(sentences: list[list[list[str]]]) -> tuple[list[str], list[int], list[str],
                                                          list[tuple[int, int]], list[int]]:
    """Join sentences (each a list of EDU clauses) into paragraph annotations.

    Sentence-initial EDUs head to the first EDU; clause EDUs head to the
    previous EDU of their sentence.
    """
    tokens: list[str] = []
    dep_heads: list[int] = []
    dep_labels: list[str] = []
    edu_spans: list[tuple[int, int]] = []
    edu_heads: list[int] = []
    for sent in sentences:
        for ci, clause in enumerate(sent):
            start = len(tokens)
            heads, labels = _star_parse(clause)
            tokens.extend(clause)
            dep_heads.extend(h + start for h in heads)
            dep_labels.extend(labels)
            edu_spans.append((start, start + len(clause)))
            k = len(edu_spans) - 1
            edu_heads.append(0 if ci == 0 else k - 1)
    edu_heads[0] = 0
    return tokens, dep_heads, dep_labels, edu_spans, edu_heads


def _build_paragraph(pid: str, split: str, rng: np.random.Generator,
                     with_distractors: bool) -> ParsedParagraph:
    a, b = (str(x) for x in rng.choice(ACTORS, size=2, replace=False))
    obj = str(rng.choice(OBJECTS))
    adj = str(ADJECTIVES[int(rng.integers(len(ADJECTIVES)))])
    v1, v1past = TRANS_VERBS[int(rng.integers(len(TRANS_VERBS)))]
    v2, v2past = INTRANS_VERBS[int(rng.integers(len(INTRANS_VERBS)))]
    v3, v3past = TRANS_VERBS[int(rng.integers(len(TRANS_VERBS)))]

    has_causal = rng.uniform() < 0.7
    has_outcome = rng.uniform() < 0.55
    has_second_action = rng.uniform() < 0.45

    sentences = [[["the", a, "saw", "the", b, "."]]]
    qa: list[QARecord] = []
    qa.append(QARecord(
        question=["what", "did", "the", a, "do", "?"],
        answer=[v1past, "the", obj],
        qtype=QuestionType.ACTION, order_index=1))
    if has_causal:
        sentences.append([
            ["the", a, "wanted", "the", obj],
            ["because", "the", obj, "was", adj, "."],
        ])
        qa.append(QARecord(
            question=["why", "did", "the", a, "want", "the", obj, "?"],
            answer=["because", "the", obj, "was", adj],
            qtype=QuestionType.CAUSAL, order_index=1))
    if has_outcome:
        sentences.append([
            ["after", "the", b, v2past, ","],
            ["the", a, v1past, "the", obj, "."],
        ])
        qa.append(QARecord(
            question=["what", "happened", "after", "the", b, v2past, "?"],
            answer=["the", a, v1past, "the", obj],
            qtype=QuestionType.OUTCOME, order_index=1))
    else:
        sentences.append([["the", a, v1past, "the", obj, "."]])
    if has_second_action:
        sentences.append([["the", b, v3past, "the", a, "."]])
        qa.append(QARecord(
            question=["what", "did", "the", b, "do", "?"],
            answer=[v3past, "the", a],
            qtype=QuestionType.ACTION, order_index=2))

    if with_distractors:
        qa.append(QARecord(
            question=["what", "will", "the", a, "do", "next", "?"],
            answer=["nobody", "knows"],
            qtype=QuestionType.PREDICTION, order_index=1))
        qa.append(QARecord(
            question=["why", "did", "the", b, "hide", "?"],
            answer=["because", "the", a, "was", "angry"],
            qtype=QuestionType.CAUSAL, order_index=2, spans_multiple=True))

    tokens, dep_heads, dep_labels, edu_spans, edu_heads = _assemble(sentences)
    return ParsedParagraph(
        pid=pid, split=split, tokens=tokens, dep_heads=dep_heads,
        dep_labels=dep_labels, edu_spans=edu_spans, edu_heads=edu_heads, qa=qa)


def build_fixture_corpus(n_train: int = 20, n_val: int = 3,
                         seed: int = 20240811) -> Corpus:
    """Synthetic annotated corpus; every third paragraph carries distractor
    QA records (a prediction question and a multi-paragraph causal one) that
    HCD filtering must drop."""
    rng = np.random.default_rng(seed)
    paragraphs = []
    for i in range(n_train):
        paragraphs.append(_build_paragraph(
            f"p{i:03d}", "train", rng, with_distractors=(i % 3 == 0)))
    for i in range(n_val):
        paragraphs.append(_build_paragraph(
            f"v{i:03d}", "val", rng, with_distractors=False))
    return Corpus(paragraphs)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="write a synthetic demo corpus")
    parser.add_argument("out", help="output corpus path (JSONL)")
    parser.add_argument("--train", type=int, default=20)
    parser.add_argument("--val", type=int, default=3)
    parser.add_argument("--seed", type=int, default=20240811)
    args = parser.parse_args(argv)
    corpus = build_fixture_corpus(args.train, args.val, args.seed)
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} paragraphs to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
