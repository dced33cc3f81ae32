"""Combine several models' predictions by probability averaging or majority vote."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import AlignmentError
from .metrics import MetricReport, evaluate
from .predictions import PredictionSet, argmax_label

METHODS = ("mean", "vote")


def check_alignment(members: Sequence[PredictionSet]):
    if not members:
        raise AlignmentError("an ensemble needs at least one member")
    ref = members[0].ids
    for k, m in enumerate(members[1:], 2):
        if m.ids == ref:
            continue
        offending = sorted(set(ref) ^ set(m.ids))
        if not offending:
            offending = [a for a, b in zip(ref, m.ids) if a != b]
        raise AlignmentError(f"member {k} is not aligned with member 1", offending)


def _mean(stack: np.ndarray) -> np.ndarray:
    # summing in sorted order makes the result independent of member order;
    # where all members agree their value is returned as is, avoiding rounding
    ordered = np.sort(stack, axis=0)
    return np.where(ordered[0] == ordered[-1], ordered[0], ordered.sum(axis=0) / len(stack))


def combine_mean(members: Sequence[PredictionSet]) -> PredictionSet:
    members = list(members)
    check_alignment(members)
    if len(members) == 1:
        m = members[0]
        return PredictionSet(list(m.ids), m.probs.copy(), meta={"method": "mean", "members": 1})
    probs = _mean(np.stack([m.probs for m in members]))
    return PredictionSet(list(members[0].ids), probs, argmax_label(probs),
                         meta={"method": "mean", "members": len(members)})


def combine_vote(members: Sequence[PredictionSet]) -> PredictionSet:
    """Majority of member labels; an even split falls back to the mean probabilities.

    The returned probabilities are vote fractions, not calibrated probabilities.
    """
    members = list(members)
    check_alignment(members)
    n = len(members)
    pos = np.stack([m.labels for m in members]).sum(axis=0)
    neg = n - pos
    labels = (pos > neg).astype(int)
    tie = pos == neg
    if tie.any():
        mean_probs = _mean(np.stack([m.probs for m in members]))
        labels[tie] = argmax_label(mean_probs)[tie]
    probs = np.stack([neg / n, pos / n], axis=1)
    meta = {"method": "vote", "members": n, "ties": int(tie.sum()), "calibrated": False}
    return PredictionSet(list(members[0].ids), probs, labels, calibrated=False, meta=meta)


def combine(members: Sequence[PredictionSet], method: str) -> PredictionSet:
    if method == "mean":
        return combine_mean(members)
    if method == "vote":
        return combine_vote(members)
    raise ValueError(f"unknown ensemble method {method!r}; expected one of {METHODS}")


def ensemble_report(members: Sequence[PredictionSet], gold: Sequence[int],
                    names: Sequence[str] | None = None) -> list[tuple[str, MetricReport]]:
    """One metrics row per member, then the mean and the voting ensemble."""
    members = list(members)
    check_alignment(members)
    gold = list(gold)
    if len(gold) != len(members[0]):
        raise AlignmentError(f"{len(gold)} gold labels for {len(members[0])} predictions")
    names = list(names) if names is not None else [str(i + 1) for i in range(len(members))]
    rows = [(name, evaluate(m.labels, gold)) for name, m in zip(names, members)]
    rows.append(("mean", evaluate(combine_mean(members).labels, gold)))
    rows.append(("voting", evaluate(combine_vote(members).labels, gold)))
    return rows
