import json
import struct

import numpy as np
import pytest

from conftest import tiny_model_config
from sugmine import checkpoint as ckpt
from sugmine.classifier import SuggestionClassifier, predict, train
from sugmine.errors import (
    CheckpointError,
    CheckpointFormatError,
    CheckpointManifestError,
    CheckpointPayloadError,
    CheckpointVersionError,
)


def sample_checkpoint():
    rng = np.random.default_rng(0)
    return ckpt.Checkpoint(
        config={"k": 1},
        vocab=["<pad>", "<unk>", "ä"],
        params={"w": rng.normal(size=(3, 2)), "b": rng.normal(size=4), "empty": np.zeros((0, 3))},
        pipeline=["clean"],
        metadata={"seed": 5},
    )


def split(blob):
    (hlen,) = struct.unpack("<Q", blob[4:12])
    return json.loads(blob[12:12 + hlen]), blob[12 + hlen:]


def join(header, payload):
    text = json.dumps(header).encode()
    return ckpt.MAGIC + struct.pack("<Q", len(text)) + text + payload


def test_round_trip():
    ck = sample_checkpoint()
    back = ckpt.loads(ckpt.dumps(ck))
    assert list(back.params) == list(ck.params)
    for name, arr in ck.params.items():
        assert back.params[name].shape == arr.shape
        np.testing.assert_array_equal(back.params[name], arr.astype(np.float32).astype(np.float64))
    assert (back.config, back.vocab, back.pipeline, back.metadata) == (ck.config, ck.vocab, ck.pipeline, ck.metadata)


def test_dumps_is_deterministic(tmp_path):
    a, b = ckpt.dumps(sample_checkpoint()), ckpt.dumps(sample_checkpoint())
    assert a == b
    ckpt.save(sample_checkpoint(), tmp_path / "m.sgm")
    assert (tmp_path / "m.sgm").read_bytes() == a


@pytest.mark.parametrize("cut", [0, 3, 11, 20, -1, -5])
def test_truncated_blob_raises_checkpoint_error(cut):
    blob = ckpt.dumps(sample_checkpoint())
    with pytest.raises(CheckpointError):
        ckpt.loads(blob[:cut])


def test_truncated_payload_is_payload_error(tmp_path):
    blob = ckpt.dumps(sample_checkpoint())
    (tmp_path / "t.sgm").write_bytes(blob[:-3])
    with pytest.raises(CheckpointPayloadError, match="truncated"):
        ckpt.load(tmp_path / "t.sgm")
    with pytest.raises(CheckpointPayloadError, match="trailing"):
        ckpt.loads(blob + b"\0")


def test_bad_magic_and_header():
    with pytest.raises(CheckpointFormatError):
        ckpt.loads(b"NOPE" + b"\0" * 20)
    with pytest.raises(CheckpointFormatError):
        ckpt.loads(ckpt.MAGIC + struct.pack("<Q", 3) + b"{x}")


def test_version_error_names_both_versions():
    header, payload = split(ckpt.dumps(sample_checkpoint()))
    header["format_version"] = 7
    with pytest.raises(CheckpointVersionError, match=r"7.*1"):
        ckpt.loads(join(header, payload))


@pytest.mark.parametrize("mutate", [
    lambda m: m[1].update(offset=0),            # overlaps w
    lambda m: m[1].update(offset=10_000),       # outside payload
    lambda m: m[0].update(nbytes=8),            # disagrees with shape
    lambda m: m[0].update(shape=[-1, 2]),
    lambda m: m.append(dict(m[0])),             # duplicate name
])
def test_manifest_inconsistency(mutate):
    header, payload = split(ckpt.dumps(sample_checkpoint()))
    mutate(header["manifest"])
    with pytest.raises(CheckpointManifestError):
        ckpt.loads(join(header, payload))


def test_error_classes_are_distinct():
    classes = {CheckpointFormatError, CheckpointVersionError, CheckpointPayloadError, CheckpointManifestError}
    assert len(classes) == 4
    assert all(issubclass(c, CheckpointError) for c in classes)


def test_save_load_predict(toy_data, fast_train, tmp_path):
    ck, _ = train(*toy_data, tiny_model_config(encoder={"num_layers": 2}), fast_train)
    before = predict(toy_data[1], ck)
    ckpt.save(ck, tmp_path / "m.sgm")
    after = predict(toy_data[1], tmp_path / "m.sgm")
    assert after.ids == before.ids
    np.testing.assert_allclose(after.probs, before.probs, rtol=0, atol=1e-6)


def test_missing_parameter_is_manifest_error(toy_data, fast_train):
    ck, _ = train(toy_data[0], None, tiny_model_config(), fast_train)
    del ck.params["decoder.b"]
    with pytest.raises(CheckpointManifestError, match="decoder.b"):
        SuggestionClassifier.from_checkpoint(ckpt.loads(ckpt.dumps(ck)))
    ck2, _ = train(toy_data[0], None, tiny_model_config(), fast_train)
    ck2.params["decoder.W"] = ck2.params["decoder.W"][:, :-1]
    with pytest.raises(CheckpointManifestError, match="shape"):
        SuggestionClassifier.from_checkpoint(ck2)
