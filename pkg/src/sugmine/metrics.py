"""
Confusion counts and the three F1 measures used for suggestion mining.

The positive class (label 1) is "suggestion".  binary F1 is the F1 of the
positive class, macro F1 the unweighted mean of both per-class F1 scores,
micro F1 the pooled F1 over both classes (equal to accuracy here).  Any 0/0
in precision, recall or F1 is taken as 0.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .errors import AlignmentError, DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise DataError(f"confusion count {name} must be a nonnegative integer, got {v}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self) -> "ConfusionMatrix":
        """The same counts seen from the negative class."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)


def confusion(pred: Sequence[int], gold: Sequence[int]) -> ConfusionMatrix:
    pred, gold = list(pred), list(gold)
    if len(pred) != len(gold):
        raise DataError(f"{len(pred)} predictions but {len(gold)} gold labels")
    if not pred:
        raise DataError("cannot build a confusion matrix from zero samples")
    tp = fp = fn = tn = 0
    for p, g in zip(pred, gold):
        if p not in (0, 1) or g not in (0, 1):
            raise DataError(f"labels must be 0 or 1, got prediction {p!r} / gold {g!r}")
        if p == 1:
            if g == 1:
                tp += 1
            else:
                fp += 1
        elif g == 1:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, fn, tn)


def _div(a, b) -> float:
    return a / b if b else 0.0


def precision_recall_f1(tp: int, fp: int, fn: int):
    p = _div(tp, tp + fp)
    r = _div(tp, tp + fn)
    return p, r, _div(2 * p * r, p + r)


def binary_f1(cm: ConfusionMatrix) -> float:
    return precision_recall_f1(cm.tp, cm.fp, cm.fn)[2]


def micro_f1(cm: ConfusionMatrix) -> float:
    # pooled over both classes: TP = tp + tn, FP = FN = fp + fn
    return precision_recall_f1(cm.tp + cm.tn, cm.fp + cm.fn, cm.fn + cm.fp)[2]


def macro_f1(cm: ConfusionMatrix) -> float:
    return (binary_f1(cm) + binary_f1(cm.swapped())) / 2.0


@dataclass
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricReport:
    micro_f1: float
    macro_f1: float
    binary_f1: float
    per_class: dict
    cm: ConfusionMatrix

    def to_dict(self) -> dict:
        return {
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "binary_f1": self.binary_f1,
            "per_class": {k: asdict(v) for k, v in self.per_class.items()},
            "confusion": asdict(self.cm),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(
            micro_f1=d["micro_f1"],
            macro_f1=d["macro_f1"],
            binary_f1=d["binary_f1"],
            per_class={k: ClassScores(**v) for k, v in d["per_class"].items()},
            cm=ConfusionMatrix(**d["confusion"]),
        )


def report(cm: ConfusionMatrix) -> MetricReport:
    per_class = {}
    for name, c in (("suggestion", cm), ("non_suggestion", cm.swapped())):
        p, r, f = precision_recall_f1(c.tp, c.fp, c.fn)
        per_class[name] = ClassScores(p, r, f, c.tp + c.fn)
    return MetricReport(micro_f1(cm), macro_f1(cm), binary_f1(cm), per_class, cm)


def evaluate(pred: Sequence[int], gold: Sequence[int]) -> MetricReport:
    return report(confusion(pred, gold))


def format_table(rows: Sequence, names: Sequence[str] | None = None) -> str:
    """Aligned text table of micro/macro/binary F1, one row per report."""
    names = list(names) if names is not None else [str(i + 1) for i in range(len(rows))]
    width = max([len("model")] + [len(n) for n in names])
    lines = [f"{'model':<{width}}  micro F1  macro F1  binary F1"]
    for name, r in zip(names, rows):
        lines.append(f"{name:<{width}}  {r.micro_f1:8.4f}  {r.macro_f1:8.4f}  {r.binary_f1:9.4f}")
    return "\n".join(lines)


def format_confusion(cm: ConfusionMatrix) -> str:
    return f"TP {cm.tp}  FP {cm.fp}  FN {cm.fn}  TN {cm.tn}"


@dataclass
class Mistake:
    id: str
    text: str
    p_pos: float


@dataclass
class ErrorReport:
    metrics: MetricReport
    false_positives: list = field(default_factory=list)
    false_negatives: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "metrics": self.metrics.to_dict(),
            "false_positives": [asdict(m) for m in self.false_positives],
            "false_negatives": [asdict(m) for m in self.false_negatives],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)


def error_report(preds, gold: Sequence[int], texts: Sequence[str] | None = None, ids: Sequence[str] | None = None) -> ErrorReport:
    """Metrics plus the mistakes, most confident first.

    ``preds`` is a PredictionSet; ``ids``, when given, must match its order.
    """
    gold = list(gold)
    if ids is not None and list(ids) != list(preds.ids):
        bad = sorted(set(ids) ^ set(preds.ids)) or [a for a, b in zip(ids, preds.ids) if a != b]
        raise AlignmentError("prediction ids do not match gold ids", bad)
    if len(gold) != len(preds):
        raise AlignmentError(f"{len(preds)} predictions but {len(gold)} gold labels")
    texts = list(texts) if texts is not None else [""] * len(gold)
    metrics = evaluate(list(preds.labels), gold)
    fps, fns = [], []
    for sid, text, lab, g, pp in zip(preds.ids, texts, preds.labels, gold, preds.p_pos):
        if lab == 1 and g == 0:
            fps.append(Mistake(sid, text, float(pp)))
        elif lab == 0 and g == 1:
            fns.append(Mistake(sid, text, float(pp)))
    fps.sort(key=lambda m: -m.p_pos)
    fns.sort(key=lambda m: m.p_pos)
    return ErrorReport(metrics, fps, fns)
