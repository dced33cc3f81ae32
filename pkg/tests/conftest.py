import json
from importlib import resources
from pathlib import Path

import pytest

from sugmine.classifier import ModelConfig, TrainConfig
from sugmine.data import Dataset, Sample, read_dataset
from sugmine.encoder import EncoderConfig


def resource_dataset(name):
    with resources.as_file(resources.files("sugmine.resources") / name) as p:
        return read_dataset(p)


def tiny_model_config(**overrides):
    enc = dict(num_layers=1, bidirectional=True, hidden_size=4, attention=True, attention_size=4)
    enc.update(overrides.pop("encoder", {}))
    base = dict(encoder=EncoderConfig(**enc), embedding_dim=5, dropout_embed=0.0, dropout_attn=0.0)
    base.update(overrides)
    return ModelConfig(**base)


def make_dataset(rows):
    return Dataset(Sample(f"s{i}", text, label) for i, (text, label) in enumerate(rows))


@pytest.fixture
def toy_data():
    train = make_dataset([
        ("you should add dark mode", 1), ("the app crashes daily", 0),
        ("please add an export button", 1), ("i like the colors", 0),
        ("it would be nice to sync", 1), ("loading is slow", 0),
        ("consider adding tabs", 1), ("the update broke search", 0),
    ])
    val = Dataset(Sample(f"v{i}", t, y) for i, (t, y) in enumerate([
        ("you should add tabs", 1), ("search is slow", 0), ("please add sync", 1), ("i like it", 0),
    ]))
    return train, val


@pytest.fixture
def fast_train():
    return TrainConfig(epochs=4, learning_rate=0.02, seed=3, batch_size=4)


def official_rows():
    path = Path(__file__).parent / "fixtures" / "official_confusion.json"
    return json.loads(path.read_text())


def mean_wins_fixture():
    path = Path(__file__).parent / "fixtures" / "ensemble_mean_wins.json"
    return json.loads(path.read_text())
