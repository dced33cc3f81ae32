import csv
import hashlib
import json
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import official_rows
from sugmine import checkpoint as ckpt
from sugmine.cli import main
from sugmine.data import read_dataset
from sugmine.metrics import MetricReport, error_report, report
from sugmine.predictions import PredictionSet, read_predictions, write_predictions
from sugmine.preprocess import load_golden

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = ROOT / "tests" / "fixtures" / "preprocess_golden.tsv"


def write_csv(path, rows, header=("id", "sentence", "label")):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def tiny_config(tmp_path, **extra):
    train = write_csv(tmp_path / "train.csv", [
        ("t1", "You should add dark mode.", 1), ("t2", "The app crashes daily.", 0),
        ("t3", "Please add an export button!", 1), ("t4", "I like the colors.", 0),
        ("t5", "It'd be nice to sync, maybe.", 1), ("t6", "Loading is slow, sadly.", 0),
    ])
    val = write_csv(tmp_path / "val.csv", [("v1", "Please add sync.", 1), ("v2", "Search is slow.", 0)])
    cfg = {
        "train": train.name, "val": val.name, "seed": 5,
        "model": {"encoder": {"num_layers": 1, "hidden_size": 4, "attention_size": 4},
                  "embedding_dim": 6, "class_weights": "balanced"},
        "training": {"epochs": 3, "learning_rate": 0.05, "batch_size": 2},
    }
    cfg.update(extra)
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    return path


def digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def test_preprocess_golden_corpus(tmp_path, capsys):
    pairs = load_golden(GOLDEN)
    src = write_csv(tmp_path / "in.csv", [(f"g{i}", raw) for i, (raw, _) in enumerate(pairs)], ("id", "sentence"))
    assert main(["preprocess", str(src), "--out", str(tmp_path / "out.csv")]) == 0
    out = read_dataset(tmp_path / "out.csv")
    assert [s.text for s in out] == [exp for _, exp in pairs]
    printed = capsys.readouterr().out
    assert "expand_negation" in printed and "changed" in printed


def test_preprocess_stage_subset_and_config(tmp_path):
    src = write_csv(tmp_path / "in.csv", [("a", "I'll go.", 1)])
    assert main(["preprocess", str(src), "--out", str(tmp_path / "o1.csv"), "--stages", "escape_punct"]) == 0
    assert read_dataset(tmp_path / "o1.csv")[0].text == "i ' ll go ."
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"train": "x.csv", "pipeline": {"enabled_stages": ["expand_phrase"]}}))
    assert main(["preprocess", str(src), "--out", str(tmp_path / "o2.csv"), "--config", str(cfg)]) == 0
    assert read_dataset(tmp_path / "o2.csv")[0].text == "i will go."
    assert read_dataset(tmp_path / "o2.csv")[0].label == 1


def test_preprocess_empty_file(tmp_path, caplog):
    (tmp_path / "empty.csv").write_text("")
    assert main(["preprocess", str(tmp_path / "empty.csv"), "--out", str(tmp_path / "o.csv")]) == 0
    assert read_dataset(tmp_path / "o.csv") == []
    assert any("empty" in r.message or "no samples" in r.message for r in caplog.records)


def test_preprocess_malformed_row(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("id,sentence,label\na,fine,1\nb,too,many,fields\n")
    assert main(["preprocess", str(tmp_path / "bad.csv"), "--out", str(tmp_path / "o.csv")]) == 1
    assert "line 3" in capsys.readouterr().err


def test_quoted_fields_survive(tmp_path):
    (tmp_path / "q.csv").write_text('id,sentence,label\nq1,"Add tabs, please ""now""",1\nq2,plain,0\n')
    assert main(["preprocess", str(tmp_path / "q.csv"), "--out", str(tmp_path / "o.csv")]) == 0
    assert read_dataset(tmp_path / "o.csv")[0].text == 'add tabs , please " now "'


def test_train_is_byte_deterministic(tmp_path):
    cfg = tiny_config(tmp_path)
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r1")]) == 0
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r2")]) == 0
    for name in ("model.sgm", "train_log.jsonl", "manifest.json"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes(), name
    manifest = json.loads((tmp_path / "r1" / "manifest.json").read_text())
    assert manifest["seed"] == 5
    assert manifest["members"][0]["checkpoint_sha256"] == digest(tmp_path / "r1" / "model.sgm")
    assert set(manifest["inputs"]) == {"train", "val"}
    assert ckpt.load(tmp_path / "r1" / "model.sgm").metadata["seed"] == 5
    log = [json.loads(line) for line in (tmp_path / "r1" / "train_log.jsonl").read_text().splitlines()]
    assert [e["epoch"] for e in log] == [1, 2, 3]


def test_seed_flag_changes_output(tmp_path):
    cfg = tiny_config(tmp_path)
    main(["train", "--config", str(cfg), "--out", str(tmp_path / "r1")])
    main(["train", "--config", str(cfg), "--out", str(tmp_path / "r2"), "--seed", "6"])
    assert digest(tmp_path / "r1" / "model.sgm") != digest(tmp_path / "r2" / "model.sgm")
    assert json.loads((tmp_path / "r2" / "manifest.json").read_text())["seed"] == 6


def test_rerun_from_manifest(tmp_path):
    cfg = tiny_config(tmp_path)
    main(["train", "--config", str(cfg), "--out", str(tmp_path / "r1")])
    main(["train", "--config", str(tmp_path / "r1" / "manifest.json"), "--out", str(tmp_path / "r2")])
    assert digest(tmp_path / "r1" / "model.sgm") == digest(tmp_path / "r2" / "model.sgm")
    assert (tmp_path / "r1" / "train_log.jsonl").read_bytes() == (tmp_path / "r2" / "train_log.jsonl").read_bytes()


def test_members_in_parallel_match_sequential(tmp_path):
    cfg = tiny_config(tmp_path)
    main(["train", "--config", str(cfg), "--out", str(tmp_path / "seq"), "--members", "2"])
    main(["train", "--config", str(cfg), "--out", str(tmp_path / "par"), "--members", "2", "--jobs", "2"])
    for i in range(2):
        assert digest(tmp_path / "seq" / f"member_{i}.sgm") == digest(tmp_path / "par" / f"member_{i}.sgm")
    seeds = [m["seed"] for m in json.loads((tmp_path / "seq" / "manifest.json").read_text())["members"]]
    assert seeds == [5, 6]


def test_inputs_are_not_mutated(tmp_path):
    cfg = tiny_config(tmp_path)
    before = {p.name: digest(p) for p in tmp_path.iterdir()}
    main(["train", "--config", str(cfg), "--out", str(tmp_path / "run")])
    main(["predict", "--checkpoint", str(tmp_path / "run" / "model.sgm"), "--data", str(tmp_path / "val.csv"),
          "--out", str(tmp_path / "run" / "pred.csv")])
    main(["evaluate", "--pred", str(tmp_path / "run" / "pred.csv"), "--gold", str(tmp_path / "val.csv"),
          "--out", str(tmp_path / "run" / "eval")])
    after = {p.name: digest(p) for p in tmp_path.iterdir() if p.is_file()}
    assert after == before


def test_config_errors_before_compute(tmp_path, capsys):
    cfg = tiny_config(tmp_path, model={"embedding_source": "pretrained_file", "embedding_dim": 6})
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 1
    assert "vectors" in capsys.readouterr().err
    assert not (tmp_path / "r").exists()
    cfg = tiny_config(tmp_path, vectors="missing.txt")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 1
    cfg = tiny_config(tmp_path, optimiser="adam")
    assert main(["train", "--config", str(cfg)]) == 1
    assert main(["train", "--config", str(tmp_path / "nope.json")]) == 1


def test_synthetic_preset_runtime(tmp_path):
    start = time.perf_counter()
    assert main(["train", "--config", str(ROOT / "configs" / "synthetic_a.json"), "--out", str(tmp_path / "a")]) == 0
    assert time.perf_counter() - start < 60


def test_predict_round_trip(tmp_path):
    cfg = tiny_config(tmp_path)
    main(["train", "--config", str(cfg), "--out", str(tmp_path / "run")])
    out = tmp_path / "pred.csv"
    assert main(["predict", "--checkpoint", str(tmp_path / "run" / "model.sgm"), "--data", str(tmp_path / "val.csv"),
                 "--out", str(out)]) == 0
    ps = read_predictions(out)
    assert ps.ids == ["v1", "v2"]
    np.testing.assert_allclose(ps.probs.sum(axis=1), 1.0, atol=1e-12)
    write_predictions(tmp_path / "again.csv", ps)
    assert (tmp_path / "again.csv").read_bytes() == out.read_bytes()
    assert main(["predict", "--checkpoint", str(tmp_path / "val.csv"), "--data", str(tmp_path / "val.csv"),
                 "--out", str(out)]) == 1


def member_file(path, ids, p_pos):
    p = np.asarray(p_pos, dtype=float)
    write_predictions(path, PredictionSet(ids, np.stack([1 - p, p], axis=1)))
    return str(path)


def test_ensemble_command(tmp_path, capsys):
    ids = ["a", "b"]
    files = [member_file(tmp_path / f"m{i}.csv", ids, p) for i, p in enumerate([[0.4, 0.1], [0.8, 0.2], [0.7, 0.9]])]
    assert main(["ensemble", *files, "--method", "mean", "--out", str(tmp_path / "mean.csv")]) == 0
    mean = read_predictions(tmp_path / "mean.csv")
    assert abs(mean.p_pos[0] - 0.6333) < 1e-4 and mean.labels.tolist() == [1, 0]
    assert main(["ensemble", *files, "--method", "vote", "--out", str(tmp_path / "vote.csv")]) == 0
    meta = json.loads((tmp_path / "vote.csv.meta.json").read_text())
    assert meta["calibrated"] is False and meta["ties"] == 0
    for method in ("mean", "vote"):
        assert main(["ensemble", files[0], "--method", method, "--out", str(tmp_path / "one.csv")]) == 0
        assert read_predictions(tmp_path / "one.csv").labels.tolist() == read_predictions(files[0]).labels.tolist()
    assert main(["ensemble", files[0], "--method", "mean", "--out", str(tmp_path / "one.csv")]) == 0
    assert (tmp_path / "one.csv").read_bytes() == Path(files[0]).read_bytes()


def test_ensemble_with_gold_prints_table(tmp_path, capsys):
    ids = ["a", "b", "c"]
    files = [member_file(tmp_path / f"m{i}.csv", ids, p) for i, p in enumerate([[0.9, 0.1, 0.6], [0.7, 0.2, 0.1]])]
    gold = write_csv(tmp_path / "gold.csv", [("a", "x", 1), ("b", "y", 0), ("c", "z", 1)])
    assert main(["ensemble", *files, "--out", str(tmp_path / "e.csv"), "--gold", str(gold)]) == 0
    out = capsys.readouterr().out
    assert "m0" in out and "m1" in out and "mean" in out and "voting" in out


def test_ensemble_misaligned(tmp_path, capsys):
    a = member_file(tmp_path / "a.csv", ["x", "y"], [0.1, 0.9])
    b = member_file(tmp_path / "b.csv", ["x", "z"], [0.1, 0.9])
    assert main(["ensemble", a, b, "--out", str(tmp_path / "o.csv")]) == 1
    err = capsys.readouterr().err
    assert "y" in err and "z" in err


def counts_to_files(tmp_path, tp, fp, fn, tn):
    # synthetic predictions realizing the given confusion counts
    rows, preds = [], []
    for k, (pred, gold, n) in enumerate([(1, 1, tp), (1, 0, fp), (0, 1, fn), (0, 0, tn)]):
        for j in range(n):
            sid = f"s{k}_{j}"
            rows.append((sid, f"sentence {sid}", gold))
            preds.append(0.8 if pred else 0.3)
    ids = [r[0] for r in rows]
    return member_file(tmp_path / "pred.csv", ids, preds), write_csv(tmp_path / "gold.csv", rows)


@pytest.mark.parametrize("row", official_rows(), ids=lambda r: r["row"])
def test_evaluate_published_counts(tmp_path, row):
    pred, gold = counts_to_files(tmp_path, row["tp"], row["fp"], row["fn"], row["tn"])
    assert main(["evaluate", "--pred", pred, "--gold", str(gold), "--out", str(tmp_path / "ev")]) == 0
    metrics = json.loads((tmp_path / "ev" / "metrics.json").read_text())
    for key in ("micro_f1", "macro_f1", "binary_f1"):
        assert abs(metrics[key] - row[key]) <= 5e-4
    errors = json.loads((tmp_path / "ev" / "errors.json").read_text())
    assert len(errors["false_positives"]) == row["fp"] and len(errors["false_negatives"]) == row["fn"]
    assert (tmp_path / "ev" / "report.txt").read_text().startswith("model")


def test_evaluate_perfect_and_round_trip(tmp_path):
    pred, gold = counts_to_files(tmp_path, 3, 0, 0, 4)
    assert main(["evaluate", "--pred", pred, "--gold", str(gold), "--out", str(tmp_path / "ev")]) == 0
    metrics = json.loads((tmp_path / "ev" / "metrics.json").read_text())
    assert metrics["micro_f1"] == metrics["macro_f1"] == metrics["binary_f1"] == 1.0
    ds = read_dataset(gold)
    in_memory = error_report(read_predictions(pred), ds.labels, [s.text for s in ds], ds.ids).metrics
    assert MetricReport.from_dict(metrics) == in_memory == report(in_memory.cm)


def test_evaluate_errors(tmp_path):
    pred, gold = counts_to_files(tmp_path, 1, 1, 1, 1)
    other = member_file(tmp_path / "other.csv", ["q", "r", "s", "t"], [0.1] * 4)
    assert main(["evaluate", "--pred", other, "--gold", str(gold), "--out", str(tmp_path / "ev")]) == 1
    unlabeled = write_csv(tmp_path / "u.csv", [("s0_0", "x")], ("id", "sentence"))
    assert main(["evaluate", "--pred", pred, "--gold", str(unlabeled), "--out", str(tmp_path / "ev")]) == 1
    (tmp_path / "broken.csv").write_text("id,p_neg,p_pos,label\na,0.5,oops,1\n")
    assert main(["evaluate", "--pred", str(tmp_path / "broken.csv"), "--gold", str(gold),
                 "--out", str(tmp_path / "ev")]) == 1
