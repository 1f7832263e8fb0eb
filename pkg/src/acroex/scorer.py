"""Span-level precision/recall/F1 for the two span classes, macro-averaged.

A predicted span is a true positive iff the same document's gold list holds a
span with identical start and end. Counts are pooled over all documents within
each class (micro); the macro report is the per-field mean over the short and
long classes.

Conventions for empty sides: precision is 1.0 when there are no predictions
and recall is 1.0 when there is no gold, so F1 degrades through the other
component; both are switchable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Document
from .errors import DataFormatError


class ScoringError(DataFormatError):
    """Prediction and gold documents do not line up."""


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class ScoreReport:
    short: PRF
    long: PRF
    macro: PRF


def _prf(
    tp: int,
    pred_count: int,
    gold_count: int,
    vacuous_precision: bool,
    vacuous_recall: bool,
) -> PRF:
    if pred_count > 0:
        precision = tp / pred_count
    else:
        precision = 1.0 if vacuous_precision else 0.0
    if gold_count > 0:
        recall = tp / gold_count
    else:
        recall = 1.0 if vacuous_recall else 0.0
    # count form of 2PR/(P+R): exact in the common case, no rounding detour
    if pred_count + gold_count > 0:
        f1 = 2.0 * tp / (pred_count + gold_count)
    else:
        f1 = 1.0 if precision == 1.0 and recall == 1.0 else 0.0
    return PRF(precision=precision, recall=recall, f1=f1)


def _span_sets(spans_by_doc: dict[str, list]) -> dict[str, set[tuple[int, int]]]:
    # duplicates within one document count once
    return {
        doc_id: {(s.start, s.end) for s in spans}
        for doc_id, spans in spans_by_doc.items()
    }


def score_class(
    pred: dict[str, list],
    gold: dict[str, list],
    vacuous_precision: bool = True,
    vacuous_recall: bool = True,
) -> PRF:
    """Pooled PRF for one span class; pred and gold map doc id to span list."""
    unknown = sorted(set(pred) - set(gold))
    if unknown:
        raise ScoringError(f"predictions for unknown document ids: {unknown}")
    pred_sets = _span_sets(pred)
    gold_sets = _span_sets(gold)
    tp = 0
    pred_count = 0
    gold_count = 0
    for doc_id, gold_set in gold_sets.items():
        pred_set = pred_sets.get(doc_id, set())
        tp += len(pred_set & gold_set)
        pred_count += len(pred_set)
        gold_count += len(gold_set)
    return _prf(tp, pred_count, gold_count, vacuous_precision, vacuous_recall)


def _macro(short: PRF, long_: PRF) -> PRF:
    return PRF(
        precision=(short.precision + long_.precision) / 2.0,
        recall=(short.recall + long_.recall) / 2.0,
        f1=(short.f1 + long_.f1) / 2.0,
    )


def score_corpus(
    pred_docs: list[Document],
    gold_docs: list[Document],
    vacuous_precision: bool = True,
    vacuous_recall: bool = True,
) -> ScoreReport:
    """Score predicted documents against gold; ids must match exactly."""
    pred_ids = {d.id for d in pred_docs}
    gold_ids = {d.id for d in gold_docs}
    if pred_ids != gold_ids:
        only_pred = sorted(pred_ids - gold_ids)[:5]
        only_gold = sorted(gold_ids - pred_ids)[:5]
        raise ScoringError(
            f"document id mismatch: only in predictions {only_pred}, "
            f"only in gold {only_gold}"
        )
    short = score_class(
        {d.id: d.short_spans for d in pred_docs},
        {d.id: d.short_spans for d in gold_docs},
        vacuous_precision,
        vacuous_recall,
    )
    long_ = score_class(
        {d.id: d.long_spans for d in pred_docs},
        {d.id: d.long_spans for d in gold_docs},
        vacuous_precision,
        vacuous_recall,
    )
    return ScoreReport(short=short, long=long_, macro=_macro(short, long_))


def report_to_dict(report: ScoreReport) -> dict:
    return {
        name: {"precision": prf.precision, "recall": prf.recall, "f1": prf.f1}
        for name, prf in (
            ("short", report.short),
            ("long", report.long),
            ("macro", report.macro),
        )
    }


def format_report_table(report: ScoreReport) -> str:
    """Aligned plain-text table: one row per class plus the macro row."""
    lines = [f"{'':<8}{'P':>8}{'R':>8}{'F1':>8}"]
    for name, prf in (
        ("short", report.short),
        ("long", report.long),
        ("macro", report.macro),
    ):
        lines.append(
            f"{name:<8}{prf.precision:>8.3f}{prf.recall:>8.3f}{prf.f1:>8.3f}"
        )
    return "\n".join(lines)
