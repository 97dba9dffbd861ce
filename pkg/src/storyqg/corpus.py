"""Data model for annotated narrative paragraphs and their QA pairs.

Covers loading/validation of the line-delimited corpus format, filtering to
the high-cognitive-demand question types used for training, dataset
statistics, and the rule-based rewrite of QA pairs into declarative "silver"
statements used as summarization targets.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

VALID_SPLITS = ("train", "val", "test")


class QuestionType(str, Enum):
    ACTION = "action"
    CAUSAL = "causal"
    OUTCOME = "outcome"
    # reserved tags; records carrying them are dropped by filter_hcd
    CHARACTER = "character"
    SETTING = "setting"
    FEELING = "feeling"
    PREDICTION = "prediction"


HCD_TYPES = (QuestionType.ACTION, QuestionType.CAUSAL, QuestionType.OUTCOME)


class CorpusError(ValueError):
    """Malformed corpus input; message carries line number and field name."""


@dataclass
class QARecord:
    question: list[str]
    answer: list[str]
    qtype: QuestionType
    order_index: int = 1
    spans_multiple: bool = False

    def validate(self, ctx: str = "") -> None:
        if not self.question:
            raise CorpusError(f"{ctx}qa.question: empty")
        if not self.answer:
            raise CorpusError(f"{ctx}qa.answer: empty")
        if self.order_index < 1:
            raise CorpusError(f"{ctx}qa.order_index: must be >= 1, got {self.order_index}")


@dataclass
class SilverStatement:
    qtype: QuestionType
    order_index: int
    tokens: list[str]
    flagged: bool = False  # rewrite fell back to clause:answer concatenation


@dataclass
class ParsedParagraph:
    pid: str
    split: str
    tokens: list[str]
    dep_heads: list[int]
    dep_labels: list[str]
    edu_spans: list[tuple[int, int]]
    edu_heads: list[int]
    qa: list[QARecord] = field(default_factory=list)
    silver: list[SilverStatement] = field(default_factory=list)

    def question_counts(self) -> list[int]:
        """Per-HCD-type question counts, in HCD_TYPES order."""
        counts = [0] * len(HCD_TYPES)
        for rec in self.qa:
            if rec.qtype in HCD_TYPES:
                counts[HCD_TYPES.index(rec.qtype)] += 1
        return counts

    def validate(self, ctx: str = "") -> None:
        n = len(self.tokens)
        if n == 0:
            raise CorpusError(f"{ctx}tokens: empty")
        if self.split not in VALID_SPLITS:
            raise CorpusError(f"{ctx}split: unknown split {self.split!r}")
        if len(self.dep_heads) != n:
            raise CorpusError(f"{ctx}dep_heads: length {len(self.dep_heads)} != {n} tokens")
        if len(self.dep_labels) != n:
            raise CorpusError(f"{ctx}dep_labels: length {len(self.dep_labels)} != {n} tokens")
        spans = self.edu_spans
        if not spans:
            raise CorpusError(f"{ctx}edu_spans: empty")
        pos = 0
        for start, end in spans:
            if start != pos or end <= start:
                raise CorpusError(f"{ctx}edu_spans: spans must partition [0, {n}), got {spans}")
            pos = end
        if pos != n:
            raise CorpusError(f"{ctx}edu_spans: spans cover [0, {pos}) but paragraph has {n} tokens")
        for start, end in spans:
            roots = 0
            for i in range(start, end):
                h = self.dep_heads[i]
                if h < start or h >= end:
                    raise CorpusError(
                        f"{ctx}dep_heads: token {i} head {h} crosses EDU boundary [{start}, {end})")
                if h == i:
                    roots += 1
            if roots != 1:
                raise CorpusError(f"{ctx}dep_heads: EDU [{start}, {end}) has {roots} roots, expected 1")
            for i in range(start, end):
                # every token must chain to the root without revisiting
                seen = set()
                j = i
                while self.dep_heads[j] != j:
                    if j in seen:
                        raise CorpusError(
                            f"{ctx}dep_heads: cycle through token {i} in EDU [{start}, {end})")
                    seen.add(j)
                    j = self.dep_heads[j]
        if len(self.edu_heads) != len(spans):
            raise CorpusError(f"{ctx}edu_heads: length {len(self.edu_heads)} != {len(spans)} EDUs")
        edu_roots = [i for i, h in enumerate(self.edu_heads) if h == i]
        if len(edu_roots) != 1:
            raise CorpusError(f"{ctx}edu_heads: {len(edu_roots)} root EDUs, expected exactly 1")
        for i, h in enumerate(self.edu_heads):
            if not 0 <= h < len(spans):
                raise CorpusError(f"{ctx}edu_heads: EDU {i} head {h} out of range")
        for rec in self.qa:
            rec.validate(ctx)


@dataclass
class Corpus:
    paragraphs: list[ParsedParagraph] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.paragraphs)

    def __iter__(self):
        return iter(self.paragraphs)

    def splits(self) -> list[str]:
        seen = []
        for p in self.paragraphs:
            if p.split not in seen:
                seen.append(p.split)
        return seen

    def select_split(self, split: str) -> "Corpus":
        return Corpus([p for p in self.paragraphs if p.split == split])


# ---------------------------------------------------------------------------
# tokenization

_TOKEN_RE = re.compile(r"[a-z0-9]+|[^\sa-z0-9]")


def tokenize(text: str) -> list[str]:
    """Lowercase, whitespace split, punctuation detached as its own tokens."""
    return _TOKEN_RE.findall(text.lower())


# ---------------------------------------------------------------------------
# serialization

def _paragraph_to_record(p: ParsedParagraph) -> dict:
    rec = {
        "id": p.pid,
        "split": p.split,
        "tokens": p.tokens,
        "dep_heads": p.dep_heads,
        "dep_labels": p.dep_labels,
        "edu_spans": [[s, e] for s, e in p.edu_spans],
        "edu_heads": p.edu_heads,
        "qa": [
            {
                "question": q.question,
                "answer": q.answer,
                "qtype": q.qtype.value,
                "order_index": q.order_index,
                "spans_multiple": q.spans_multiple,
            }
            for q in p.qa
        ],
    }
    if p.silver:
        rec["silver"] = [
            {"qtype": s.qtype.value, "order_index": s.order_index,
             "tokens": s.tokens, "flagged": s.flagged}
            for s in p.silver
        ]
    return rec


def _record_to_paragraph(rec: dict, ctx: str) -> ParsedParagraph:
    try:
        qa = [
            QARecord(
                question=list(q["question"]),
                answer=list(q["answer"]),
                qtype=QuestionType(q["qtype"]),
                order_index=int(q.get("order_index", 1)),
                spans_multiple=bool(q.get("spans_multiple", False)),
            )
            for q in rec.get("qa", [])
        ]
        silver = [
            SilverStatement(
                qtype=QuestionType(s["qtype"]),
                order_index=int(s["order_index"]),
                tokens=list(s["tokens"]),
                flagged=bool(s.get("flagged", False)),
            )
            for s in rec.get("silver", [])
        ]
        p = ParsedParagraph(
            pid=str(rec["id"]),
            split=str(rec["split"]),
            tokens=list(rec["tokens"]),
            dep_heads=[int(h) for h in rec["dep_heads"]],
            dep_labels=[str(x) for x in rec["dep_labels"]],
            edu_spans=[(int(s), int(e)) for s, e in rec["edu_spans"]],
            edu_heads=[int(h) for h in rec["edu_heads"]],
            qa=qa,
            silver=silver,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CorpusError):
            raise
        raise CorpusError(f"{ctx}malformed record: {exc}") from exc
    p.validate(ctx)
    return p


def load_corpus(path) -> Corpus:
    """Read a line-delimited corpus file, validating every invariant.

    Lines whose record carries a leading-underscore key (artifact headers)
    are skipped. Errors carry the 1-based line number and offending field.
    """
    paragraphs = []
    seen_ids: set[str] = set()
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {lineno}: invalid record: {exc}") from exc
        if any(k.startswith("_") for k in rec):
            continue
        p = _record_to_paragraph(rec, ctx=f"line {lineno}: ")
        if p.pid in seen_ids:
            raise CorpusError(f"line {lineno}: id: duplicate paragraph id {p.pid!r}")
        seen_ids.add(p.pid)
        paragraphs.append(p)
    return Corpus(paragraphs)


def save_corpus(corpus: Corpus, path, header: dict | None = None) -> None:
    """Write the corpus as JSONL; optional header record for run provenance."""
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps({"_header": header}, sort_keys=True) + "\n")
        for p in corpus.paragraphs:
            fh.write(json.dumps(_paragraph_to_record(p), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# filtering

def filter_hcd(corpus: Corpus) -> Corpus:
    """Keep only single-paragraph action/causal/outcome questions.

    Paragraphs left without questions are dropped; order indexes are
    renumbered per type so counts and order tags stay consistent.
    """
    kept_paragraphs = []
    for p in corpus.paragraphs:
        kept = [q for q in p.qa if q.qtype in HCD_TYPES and not q.spans_multiple]
        if not kept:
            continue
        counters = {t: 0 for t in HCD_TYPES}
        renumbered = []
        for q in kept:
            counters[q.qtype] += 1
            renumbered.append(QARecord(
                question=list(q.question), answer=list(q.answer), qtype=q.qtype,
                order_index=counters[q.qtype], spans_multiple=False))
        kept_paragraphs.append(ParsedParagraph(
            pid=p.pid, split=p.split, tokens=list(p.tokens),
            dep_heads=list(p.dep_heads), dep_labels=list(p.dep_labels),
            edu_spans=list(p.edu_spans), edu_heads=list(p.edu_heads),
            qa=renumbered, silver=list(p.silver)))
    return Corpus(kept_paragraphs)


# ---------------------------------------------------------------------------
# statistics

@dataclass
class StatsReport:
    n_paragraphs: int
    n_questions: int
    n_summaries: int
    mean_questions: float
    std_questions: float
    mean_tokens_paragraph: float
    std_tokens_paragraph: float
    mean_tokens_summary: float
    std_tokens_summary: float
    mean_tokens_question: float
    std_tokens_question: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)


def _mean_std(values: list[int]) -> tuple[float, float]:
    # population std: deterministic for n = 1
    if not values:
        return 0.0, 0.0
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return mean, var ** 0.5


def corpus_stats(corpus: Corpus) -> StatsReport:
    if not corpus.paragraphs:
        raise CorpusError("corpus_stats: empty corpus")
    q_per_p = [len(p.qa) for p in corpus.paragraphs]
    tok_p = [len(p.tokens) for p in corpus.paragraphs]
    tok_s = [len(s.tokens) for p in corpus.paragraphs for s in p.silver]
    tok_q = [len(q.question) for p in corpus.paragraphs for q in p.qa]
    mq, sq = _mean_std(q_per_p)
    mp, sp = _mean_std(tok_p)
    ms, ss = _mean_std(tok_s)
    mt, st = _mean_std(tok_q)
    return StatsReport(
        n_paragraphs=len(corpus.paragraphs),
        n_questions=sum(q_per_p),
        n_summaries=len(tok_s),
        mean_questions=mq, std_questions=sq,
        mean_tokens_paragraph=mp, std_tokens_paragraph=sp,
        mean_tokens_summary=ms, std_tokens_summary=ss,
        mean_tokens_question=mt, std_tokens_question=st,
    )


# ---------------------------------------------------------------------------
# silver statement rewriting

IRREGULAR_PAST = {
    "be": "was", "do": "did", "go": "went", "say": "said", "see": "saw",
    "get": "got", "give": "gave", "take": "took", "make": "made", "find": "found",
    "keep": "kept", "lose": "lost", "run": "ran", "sing": "sang", "fall": "fell",
    "eat": "ate", "drink": "drank", "come": "came", "sit": "sat", "stand": "stood",
    "tell": "told", "think": "thought", "feel": "felt", "break": "broke",
    "hold": "held", "put": "put", "build": "built", "grow": "grew", "fly": "flew",
    "leave": "left", "win": "won", "hide": "hid", "steal": "stole", "sleep": "slept",
    "speak": "spoke", "swim": "swam", "bring": "brought", "buy": "bought",
    "catch": "caught", "dig": "dug", "ride": "rode", "wear": "wore", "meet": "met",
    "know": "knew", "hear": "heard", "send": "sent",
    # consonant-doubling regulars the "-ed" default would misspell
    "drop": "dropped", "stop": "stopped", "grab": "grabbed", "plan": "planned",
    "trot": "trotted", "pat": "patted", "nod": "nodded",
}

# base-form verbs recognized as the inflection point of a question
_REGULAR_VERBS = {
    "hope", "want", "call", "ask", "live", "stay", "dance", "jump", "walk",
    "play", "look", "help", "like", "love", "need", "use", "move", "start",
    "stop", "wish", "chase", "carry", "follow", "visit", "watch", "drop",
    "plant", "share", "guard", "open", "close", "climb", "cross", "bake",
    "paint", "fix", "wash", "pull", "push", "hunt", "gather", "trade",
}

VERB_LEXICON = set(IRREGULAR_PAST) | _REGULAR_VERBS

_WH_LEAD = {"why", "what", "how", "who", "where", "when",
            "did", "does", "do", "was", "were", "is", "are", "happened"}

SENT_FINAL = {".", "!", "?"}


def past_tense(verb: str) -> str:
    if verb in IRREGULAR_PAST:
        return IRREGULAR_PAST[verb]
    if verb.endswith("e"):
        return verb + "d"
    if len(verb) > 1 and verb.endswith("y") and verb[-2] not in "aeiou":
        return verb[:-1] + "ied"
    return verb + "ed"


def _strip_question_mark(tokens: list[str]) -> list[str]:
    out = list(tokens)
    while out and out[-1] == "?":
        out.pop()
    return out


def _finish(tokens: list[str]) -> list[str]:
    out = [t for t in tokens if t != "?"]
    if not out or out[-1] not in SENT_FINAL:
        out.append(".")
    return out


def _find_verb(tokens: list[str]) -> int:
    for i, tok in enumerate(tokens):
        if i >= 1 and tok in VERB_LEXICON:
            return i
    return -1


def rewrite_qa_to_statement(qa: QARecord) -> tuple[list[str], bool]:
    """Rewrite a question-answer pair into a declarative statement.

    Returns (statement tokens, fallback_used). The statement never keeps a
    leading wh-word or a trailing question mark; the full answer is always
    inserted verbatim. Unmatched patterns fall back to
    "<subject-clause> : <answer>" and are flagged.
    """
    if qa.qtype not in HCD_TYPES:
        raise CorpusError(f"rewrite: qtype {qa.qtype.value} is not an HCD type")
    q = _strip_question_mark(qa.question)
    a = list(qa.answer)

    # "what happened after/because X ?"  ->  "after/because X , <answer> ."
    if len(q) >= 4 and q[0] == "what" and q[1] == "happened" and q[2] in ("after", "because"):
        return _finish([q[2], *q[3:], ",", *a]), False

    # "<wh ...> did/does/do S V ...?" family
    if q and q[0] in ("why", "what", "how", "who", "where", "when"):
        aux = next((k for k in range(1, len(q)) if q[k] in ("did", "does", "do")), -1)
        if aux >= 1 and aux + 1 < len(q):
            body = q[aux + 1:]
            vi = _find_verb(body)
            if vi >= 1:
                subject, verb, rest = body[:vi], body[vi], body[vi + 1:]
                if verb == "do" and q[0] != "why":
                    # "what did S do ...?"  ->  "S <answer> ..."
                    return _finish([*subject, *a, *rest]), False
                if q[0] == "why":
                    # "why did S V ...?"  ->  "S V-past ... because <answer> ."
                    causal = a if a and a[0] == "because" else ["because", *a]
                    return _finish([*subject, past_tense(verb), *rest, *causal]), False
                # "what/how ... did S V ...?"  ->  "S V-past <answer> ... ."
                return _finish([*subject, past_tense(verb), *a, *rest]), False

    # fallback: strip interrogative lead, join clause with the answer
    clause = list(q)
    while clause and clause[0] in _WH_LEAD:
        clause.pop(0)
    return _finish([*clause, ":", *a]), True


def build_silver(corpus: Corpus) -> Corpus:
    """Attach rule-rewritten silver statements to every paragraph, in place."""
    for p in corpus.paragraphs:
        p.silver = []
        hcd = [q for q in p.qa if q.qtype in HCD_TYPES and not q.spans_multiple]
        for qa in sorted(hcd, key=lambda q: (HCD_TYPES.index(q.qtype), q.order_index)):
            tokens, fallback = rewrite_qa_to_statement(qa)
            p.silver.append(SilverStatement(
                qtype=qa.qtype, order_index=qa.order_index,
                tokens=tokens, flagged=fallback))
    return corpus
