"""Per-sample class probabilities produced by one model or one ensemble."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError

HEADER = ("id", "p_neg", "p_pos", "label")


def argmax_label(probs: np.ndarray) -> np.ndarray:
    """Positive only when p_pos strictly exceeds p_neg; exact ties go to 0."""
    return (probs[:, 1] > probs[:, 0]).astype(int)


@dataclass
class PredictionSet:
    ids: list
    probs: np.ndarray
    labels: np.ndarray = None
    # False for vote ensembles, whose "probabilities" are vote fractions
    calibrated: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ids = [str(i) for i in self.ids]
        self.probs = np.asarray(self.probs, dtype=np.float64).reshape(-1, 2)
        if self.labels is None:
            self.labels = argmax_label(self.probs)
        self.labels = np.asarray(self.labels, dtype=int).reshape(-1)
        if not (len(self.ids) == len(self.probs) == len(self.labels)):
            raise ValueError("ids, probs and labels must have equal lengths")

    def __len__(self):
        return len(self.ids)

    @property
    def p_pos(self) -> np.ndarray:
        return self.probs[:, 1]

    def equals(self, other: "PredictionSet") -> bool:
        return (
            self.ids == other.ids
            and np.array_equal(self.probs, other.probs)
            and np.array_equal(self.labels, other.labels)
        )


def write_predictions(path, ps: PredictionSet):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for sid, (pn, pp), lab in zip(ps.ids, ps.probs, ps.labels):
            # repr gives the shortest string that round-trips exactly
            w.writerow([sid, repr(float(pn)), repr(float(pp)), int(lab)])


def read_predictions(path) -> PredictionSet:
    ids, probs, labels = [], [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            raise ParseError(f"{path}: header must be {','.join(HEADER)}", line=1)
        for row in reader:
            if not row:
                continue
            lineno = reader.line_num
            if len(row) != 4:
                raise ParseError(f"{path}: expected 4 fields, found {len(row)}", line=lineno)
            try:
                pn, pp, lab = float(row[1]), float(row[2]), int(row[3])
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=lineno) from None
            if lab not in (0, 1):
                raise ParseError(f"{path}: label must be 0 or 1", line=lineno)
            ids.append(row[0])
            probs.append((pn, pp))
            labels.append(lab)
    return PredictionSet(ids, np.array(probs, dtype=np.float64).reshape(-1, 2), np.array(labels, dtype=int))
