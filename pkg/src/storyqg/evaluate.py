"""Rouge-L and the two aggregation protocols used to score generated questions.

Rouge-L is LCS-based with beta = 1 and no stemming/stopword handling. The
concatenation protocol joins each side into one long sequence; the max-match
protocol scores every gold question by its best F1 over the generated set
and averages componentwise over gold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import kern
from .typedist import TypeDistribution, append_pseudo_label, kl_loss


@dataclass
class RougeScore:
    precision: float
    recall: float
    f1: float

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


def _lcs_length(hyp: list[str], ref: list[str]) -> int:
    inter = sorted(set(hyp) | set(ref))
    ids = {tok: i for i, tok in enumerate(inter)}
    a = np.array([ids[t] for t in hyp], dtype=np.int64)
    b = np.array([ids[t] for t in ref], dtype=np.int64)
    return int(kern.lcs_len(a, b))


def rouge_l(hyp: list[str], ref: list[str]) -> RougeScore:
    """LCS-based precision/recall/F1; empty sides score 0 by convention."""
    if not hyp or not ref:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = _lcs_length(hyp, ref)
    p = lcs / len(hyp)
    r = lcs / len(ref)
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return RougeScore(p, r, f1)


def concat_protocol(generated: list[list[str]], gold: list[list[str]]) -> RougeScore:
    """Rouge-L of the order-preserving concatenations of both sides."""
    hyp = [tok for seq in generated for tok in seq]
    ref = [tok for seq in gold for tok in seq]
    return rouge_l(hyp, ref)


def max_match_protocol(generated: list[list[str]], gold: list[list[str]],
                       average_over: str = "gold") -> RougeScore:
    """Best-match scores per gold question, averaged componentwise.

    ``average_over="generated"`` flips the roles (kept behind a flag because
    the two readings of the protocol disagree).
    """
    if average_over == "generated":
        generated, gold = gold, generated
    elif average_over != "gold":
        raise ValueError(f"unknown average_over {average_over!r}")
    if not gold:
        raise ValueError("max_match_protocol: empty gold set")
    ps, rs, fs = [], [], []
    for ref in gold:
        best = RougeScore(0.0, 0.0, 0.0)
        for hyp in generated:
            score = rouge_l(hyp, ref)
            if score.f1 > best.f1:
                best = score
        ps.append(best.precision)
        rs.append(best.recall)
        fs.append(best.f1)
    n = len(gold)
    return RougeScore(sum(ps) / n, sum(rs) / n, sum(fs) / n)


def type_kl_report(gold_counts: dict[str, list[int]],
                   predicted: dict[str, TypeDistribution]) -> float:
    """Mean KL(target || predicted) over paragraphs, matched by paragraph id."""
    if set(gold_counts) != set(predicted):
        missing = set(gold_counts) ^ set(predicted)
        raise ValueError(f"type_kl_report: paragraph id mismatch: {sorted(missing)[:5]}")
    if not gold_counts:
        raise ValueError("type_kl_report: no paragraphs")
    total = 0.0
    for pid, counts in gold_counts.items():
        total += kl_loss(append_pseudo_label(counts), predicted[pid])
    return total / len(gold_counts)
