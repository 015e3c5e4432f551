"""Info/Cite precision-recall harness over consolidated claims.

Scores predictions against gold claims that carry per-claim video
citations. Entailment is delegated to a pluggable judge backend; the exact
pairing and citation-averaging rules implemented here are a documented
offline approximation, so every report is labeled ``mirage-approx`` rather
than claiming comparability with the official MiRAGE protocol.

Documented scoring rule:

* InfoP  = fraction of predicted claims entailed by at least one gold claim.
* InfoR  = fraction of gold claims entailed by at least one predicted claim.
* Each matched predicted claim pairs with the first gold claim (in gold
  order) that entails it. Cite metrics average over these matched pairs
  only; unmatched predictions add nothing to the denominators. Per pair,
  CiteP = |pred ∩ gold citations| / |pred citations| (0 when the prediction
  cites nothing) and CiteR = |pred ∩ gold citations| / |gold citations|.
* F1 is the harmonic mean (0 when P + R = 0); Avg F1 the arithmetic mean
  of InfoF1 and CiteF1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .backends import Backend
from .consolidate import ConsolidatedClaim

PROTOCOL_LABEL = "mirage-approx"


def f1(p: float, r: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if not (0.0 <= p <= 1.0 and 0.0 <= r <= 1.0):
        raise ValueError(f"precision/recall must lie in [0, 1]: p={p}, r={r}")
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def avg_f1(info_f1: float, cite_f1: float) -> float:
    """Macro-average of the two F1 axes."""
    if not (0.0 <= info_f1 <= 1.0 and 0.0 <= cite_f1 <= 1.0):
        raise ValueError("F1 inputs must lie in [0, 1]")
    return (info_f1 + cite_f1) / 2.0


def round_half_up(x: float, places: int = 3) -> float:
    """Display rounding matching reported-table precision."""
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class GoldClaim:
    text: str
    citations: frozenset[str]

    def __post_init__(self):
        if not self.text:
            raise ValueError("gold claim text must be non-empty")
        if not self.citations:
            raise ValueError("gold claim must cite at least one video")


def load_gold(path: str | Path) -> list[GoldClaim]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [GoldClaim(d["claim"], frozenset(d["citations"])) for d in data]


@dataclass
class EvalReport:
    info_p: float
    info_r: float
    info_f1: float
    cite_p: float
    cite_r: float
    cite_f1: float
    avg_f1: float
    pred_entailed_by_gold: list[list[bool]] = field(default_factory=list)
    gold_entailed_by_pred: list[list[bool]] = field(default_factory=list)
    matched_pairs: list[dict] = field(default_factory=list)

    def metrics(self) -> dict[str, float]:
        return {
            "info_p": self.info_p,
            "info_r": self.info_r,
            "info_f1": self.info_f1,
            "cite_p": self.cite_p,
            "cite_r": self.cite_r,
            "cite_f1": self.cite_f1,
            "avg_f1": self.avg_f1,
        }

    def to_dict(self) -> dict:
        return {
            "protocol": PROTOCOL_LABEL,
            **self.metrics(),
            "judgments": {
                "pred_entailed_by_gold": self.pred_entailed_by_gold,
                "gold_entailed_by_pred": self.gold_entailed_by_pred,
            },
            "matched_pairs": self.matched_pairs,
        }

    def render_table(self) -> str:
        """Text table mirroring the reported column layout."""
        m = {k: f"{round_half_up(v):.3f}" for k, v in self.metrics().items()}
        header = (
            "| Avg F1 | Info P | Info R | Info F1 | Cite P | Cite R | Cite F1 |"
        )
        rule = "|" + "-" * (len(header) - 2) + "|"
        row = (
            f"| {m['avg_f1']}  | {m['info_p']}  | {m['info_r']}  | {m['info_f1']}   "
            f"| {m['cite_p']}  | {m['cite_r']}  | {m['cite_f1']}   |"
        )
        return "\n".join((f"protocol: {PROTOCOL_LABEL}", header, rule, row))


def score(
    pred: list[ConsolidatedClaim], gold: list[GoldClaim], judge: Backend
) -> EvalReport:
    """Apply the documented scoring rule with ``judge`` as the entailment
    oracle. Empty predictions yield the all-zero report."""
    if not gold:
        raise ValueError("gold claim set must be non-empty")

    pred_by_gold = [
        [judge.entail([g.text], p.text).entailed for g in gold] for p in pred
    ]
    gold_by_pred = [
        [judge.entail([p.text], g.text).entailed for p in pred] for g in gold
    ]

    info_p = (
        sum(1 for row in pred_by_gold if any(row)) / len(pred) if pred else 0.0
    )
    info_r = sum(1 for row in gold_by_pred if any(row)) / len(gold)

    matched_pairs = []
    cite_p_values = []
    cite_r_values = []
    for i, row in enumerate(pred_by_gold):
        if not any(row):
            continue
        j = row.index(True)  # first-match pairing in gold order
        pred_citations = set(pred[i].citations)
        gold_citations = set(gold[j].citations)
        common = pred_citations & gold_citations
        cite_p = len(common) / len(pred_citations) if pred_citations else 0.0
        cite_r = len(common) / len(gold_citations)
        cite_p_values.append(cite_p)
        cite_r_values.append(cite_r)
        matched_pairs.append(
            {"pred_index": i, "gold_index": j, "cite_p": cite_p, "cite_r": cite_r}
        )

    cite_p = sum(cite_p_values) / len(cite_p_values) if cite_p_values else 0.0
    cite_r = sum(cite_r_values) / len(cite_r_values) if cite_r_values else 0.0

    info_f1 = f1(info_p, info_r)
    cite_f1 = f1(cite_p, cite_r)
    return EvalReport(
        info_p=info_p,
        info_r=info_r,
        info_f1=info_f1,
        cite_p=cite_p,
        cite_r=cite_r,
        cite_f1=cite_f1,
        avg_f1=avg_f1(info_f1, cite_f1),
        pred_entailed_by_gold=pred_by_gold,
        gold_entailed_by_pred=gold_by_pred,
        matched_pairs=matched_pairs,
    )
