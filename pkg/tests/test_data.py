import json

import pytest

from sugmine.data import read_dataset, write_dataset
from sugmine.errors import ConfigError, ParseError
from sugmine.experiment import build_manifest, experiment_from_dict, load_experiment, load_pipeline
from sugmine.predictions import read_predictions


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_read_write_round_trip(tmp_path):
    p = write(tmp_path, 'id,sentence,label\na,"x, ""y""",1\nb,z,0\n')
    ds = read_dataset(p)
    assert [(s.id, s.text, s.label) for s in ds] == [("a", 'x, "y"', 1), ("b", "z", 0)]
    write_dataset(tmp_path / "o.csv", ds)
    assert (tmp_path / "o.csv").read_text() == p.read_text()


def test_unlabeled_file(tmp_path):
    ds = read_dataset(write(tmp_path, "id,sentence\na,hello\n"))
    assert ds.labels == [None] and not ds.labeled


@pytest.mark.parametrize("text, line", [
    ("identifier,sentence\n", 1),
    ("id,sentence,label\na,x,1\na,y,0\n", 3),
    ("id,sentence,label\na,x,2\n", 2),
    ("id,sentence,label\n,x,1\n", 2),
    ("id,sentence,label\na,x\n", 2),
])
def test_parse_errors_name_the_line(tmp_path, text, line):
    with pytest.raises(ParseError, match=f"line {line}"):
        read_dataset(write(tmp_path, text))


def test_empty_sentence_kept_with_warning(tmp_path, caplog):
    ds = read_dataset(write(tmp_path, "id,sentence,label\na,   ,0\n"))
    assert len(ds) == 1
    assert any("empty sentence" in r.message for r in caplog.records)


def test_prediction_file_errors(tmp_path):
    with pytest.raises(ParseError, match="line 1"):
        read_predictions(write(tmp_path, "id,prob\n"))
    with pytest.raises(ParseError, match="line 2"):
        read_predictions(write(tmp_path, "id,p_neg,p_pos,label\na,0.5,0.5,3\n"))


def test_experiment_preset_merge(tmp_path):
    write(tmp_path, "id,sentence,label\na,x,1\n", "t.csv")
    cfg = experiment_from_dict({"preset": "subtask_b", "train": "t.csv", "model": {"dropout_embed": 0.1}}, tmp_path)
    assert cfg.model.encoder.num_layers == 1 and not cfg.model.encoder.bidirectional
    assert cfg.model.dropout_embed == 0.1 and cfg.model.class_weights == "balanced"
    assert cfg.member_seed(2) == cfg.seed + 2
    again = experiment_from_dict(cfg.to_dict(), tmp_path)
    assert again.config_hash() == cfg.config_hash()


@pytest.mark.parametrize("raw", [
    {"train": "t.csv", "bogus": 1},
    {"train": "t.csv", "preset": "subtask_z"},
    {"train": "t.csv", "seed": -1},
    {"train": "t.csv", "members": 0},
    {"train": "missing.csv"},
    {"val": "t.csv"},
    {"train": "t.csv", "model": {"embedding_source": "pretrained_file"}},
    {"train": "t.csv", "pipeline": {"enabled_stages": ["stem"]}},
])
def test_experiment_validation(tmp_path, raw):
    write(tmp_path, "id,sentence,label\na,x,1\n", "t.csv")
    with pytest.raises(ConfigError):
        experiment_from_dict(raw, tmp_path)


def test_manifest_reload(tmp_path):
    write(tmp_path, "id,sentence,label\na,x,1\n", "t.csv")
    cfg = experiment_from_dict({"train": "t.csv", "seed": 9}, tmp_path)
    manifest = build_manifest(cfg, [])
    assert manifest["seed"] == 9 and len(manifest["inputs"]["train"]) == 64
    path = write(tmp_path, json.dumps(manifest), "manifest.json")
    assert load_experiment(path).config_hash() == cfg.config_hash()
    assert load_pipeline(path) == cfg.pipeline
    with pytest.raises(ConfigError):
        load_experiment(write(tmp_path, "{not json", "bad.json"))
