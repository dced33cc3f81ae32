import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import official_rows
from sugmine.errors import AlignmentError, DataError
from sugmine.metrics import (
    ConfusionMatrix,
    MetricReport,
    binary_f1,
    confusion,
    error_report,
    evaluate,
    format_confusion,
    format_table,
    macro_f1,
    micro_f1,
    precision_recall_f1,
    report,
)
from sugmine.predictions import PredictionSet

counts = st.integers(min_value=0, max_value=500)
matrices = st.builds(ConfusionMatrix, counts, counts, counts, counts).filter(lambda cm: cm.total > 0)


@pytest.mark.parametrize("row", official_rows(), ids=lambda r: r["row"])
def test_published_confusion_rows(row):
    cm = ConfusionMatrix(row["tp"], row["fp"], row["fn"], row["tn"])
    assert abs(micro_f1(cm) - row["micro_f1"]) <= 5e-4
    assert abs(macro_f1(cm) - row["macro_f1"]) <= 5e-4
    assert abs(binary_f1(cm) - row["binary_f1"]) <= 5e-4


def test_confusion_examples():
    assert confusion([1, 0, 1], [1, 0, 1]) == ConfusionMatrix(2, 0, 0, 1)
    assert confusion([1, 1], [0, 0]) == ConfusionMatrix(0, 2, 0, 0)


def test_confusion_errors():
    with pytest.raises(DataError):
        confusion([1], [1, 0])
    with pytest.raises(DataError):
        confusion([2], [1])
    with pytest.raises(DataError):
        confusion([], [])
    with pytest.raises(DataError):
        ConfusionMatrix(-1, 0, 0, 0)


@pytest.mark.parametrize("seed", range(5))
def test_confusion_matches_brute_force(seed):
    rng = random.Random(seed)
    pred = [rng.randint(0, 1) for _ in range(100)]
    gold = [rng.randint(0, 1) for _ in range(100)]
    cells = {(p, g): 0 for p in (0, 1) for g in (0, 1)}
    for p, g in zip(pred, gold):
        cells[p, g] += 1
    assert confusion(pred, gold) == ConfusionMatrix(cells[1, 1], cells[1, 0], cells[0, 1], cells[0, 0])


def test_zero_division_convention():
    assert precision_recall_f1(0, 0, 5) == (0.0, 0.0, 0.0)
    assert precision_recall_f1(0, 0, 0) == (0.0, 0.0, 0.0)
    assert binary_f1(ConfusionMatrix(0, 0, 3, 7)) == 0.0
    assert micro_f1(ConfusionMatrix(5, 0, 0, 5)) == 1.0
    assert macro_f1(ConfusionMatrix(5, 0, 0, 5)) == 1.0


def test_symmetric_matrix():
    cm = ConfusionMatrix(30, 7, 7, 30)
    assert macro_f1(cm) == binary_f1(cm) == binary_f1(cm.swapped())


@given(matrices)
def test_micro_equals_accuracy(cm):
    assert micro_f1(cm) == pytest.approx((cm.tp + cm.tn) / cm.total, rel=1e-15, abs=0)


@given(matrices, st.integers(min_value=1, max_value=50))
def test_scaling_invariance(cm, k):
    big = ConfusionMatrix(cm.tp * k, cm.fp * k, cm.fn * k, cm.tn * k)
    for f in (micro_f1, macro_f1, binary_f1):
        assert f(big) == pytest.approx(f(cm), rel=1e-12, abs=1e-15)


@given(matrices)
def test_values_in_unit_interval(cm):
    rep = report(cm)
    assert all(0.0 <= v <= 1.0 for v in (rep.micro_f1, rep.macro_f1, rep.binary_f1))
    assert rep.per_class["suggestion"].support + rep.per_class["non_suggestion"].support == cm.total


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_path_independence(pairs):
    pred, gold = zip(*pairs)
    assert evaluate(pred, gold) == report(confusion(pred, gold))


def test_report_round_trip():
    rep = report(ConfusionMatrix(76, 60, 11, 686))
    assert MetricReport.from_dict(json.loads(json.dumps(rep.to_dict()))) == rep


def test_format_helpers():
    rep = report(ConfusionMatrix(76, 60, 11, 686))
    table = format_table([rep], ["A/1"])
    assert "A/1      0.9148    0.8162     0.6816" in table
    assert format_confusion(rep.cm) == "TP 76  FP 60  FN 11  TN 686"


def test_error_report_ordering_and_sizes():
    ps = PredictionSet(["a", "b", "c", "d", "e"], [[0.4, 0.6], [0.1, 0.9], [0.7, 0.3], [0.2, 0.8], [0.9, 0.1]])
    gold = [0, 0, 1, 1, 1]
    rep = error_report(ps, gold, texts=["ta", "tb", "tc", "td", "te"])
    assert [m.id for m in rep.false_positives] == ["b", "a"]
    assert [m.id for m in rep.false_negatives] == ["e", "c"]
    assert len(rep.false_positives) == rep.metrics.cm.fp
    assert len(rep.false_negatives) == rep.metrics.cm.fn
    assert rep.false_positives[0].text == "tb"
    assert json.loads(rep.to_json())["false_positives"][0]["p_pos"] == 0.9


def test_error_report_perfect_and_misaligned():
    ps = PredictionSet(["a", "b"], [[0.2, 0.8], [0.9, 0.1]])
    rep = error_report(ps, [1, 0])
    assert rep.false_positives == [] and rep.false_negatives == []
    with pytest.raises(AlignmentError, match="c"):
        error_report(ps, [1, 0], ids=["a", "c"])
    with pytest.raises(AlignmentError):
        error_report(ps, [1, 0, 1])
