import json
import os

import numpy as np
import pytest
import torch

from geopredict import NetConfig, TrainedModel, train_multi, train_single
from geopredict.data import load_dataset


@pytest.fixture(scope="module")
def rotation_manifest(small_manifest, tmp_path_factory):
    """Rotation-only sub-manifest in the same dataset directory."""
    doc = json.load(open(small_manifest))
    doc["records"] = [r for r in doc["records"] if r["type"] == "rotation"]
    path = os.path.join(os.path.dirname(small_manifest), "manifest_rotation.json")
    json.dump(doc, open(path, "w"))
    return path


class TestConfig:
    def test_variant_validation(self):
        with pytest.raises(ValueError):
            NetConfig(variant="dual")
        with pytest.raises(ValueError):
            NetConfig(variant="single")  # needs a type
        with pytest.raises(ValueError):
            NetConfig(variant="multi", input_size=100)  # not divisible by 32
        with pytest.raises(ValueError):
            NetConfig(variant="multi", class_weight=-1.0)

    def test_roundtrip(self):
        cfg = NetConfig(variant="single", type="shear", input_size=64, epochs=3)
        assert NetConfig.from_dict(cfg.to_dict()) == cfg


class TestTrainSingle:
    def test_two_hundred_steps_reduce_epe(self, rotation_manifest):
        """~200 optimizer steps on a small rotation set: the training EPE
        must end strictly below its starting value."""
        cfg = NetConfig(variant="single", type="rotation", input_size=64,
                        epochs=40, batch_size=16, learning_rate=1e-3,
                        seed=0, val_fraction=0.2)
        model = train_single(rotation_manifest, "rotation", cfg)
        first = model.history[0]["trainEpe"]
        last = model.history[-1]["trainEpe"]
        assert last < first

    def test_type_mismatch_rejected(self, rotation_manifest):
        cfg = NetConfig(variant="single", type="shear", input_size=64, epochs=1)
        with pytest.raises(ValueError):
            train_single(rotation_manifest, "rotation", cfg)

    def test_missing_type_in_manifest_rejected(self, rotation_manifest):
        with pytest.raises(ValueError):
            train_single(rotation_manifest, "wave",
                         NetConfig(variant="single", type="wave",
                                   input_size=64, epochs=1))


class TestTrainMulti:
    def test_loss_decomposition_in_history(self, small_manifest):
        cfg = NetConfig(variant="multi", input_size=64, epochs=1,
                        class_weight=0.25, seed=1)
        model = train_multi(small_manifest, cfg)
        h = model.history[0]
        # terms are accumulated in float32, so the identity holds to ~1e-7
        assert h["trainLoss"] == pytest.approx(
            h["trainEpe"] + 0.25 * h["trainClass"], abs=1e-5)

    def test_zero_class_weight_is_pure_flow_regression(self, small_manifest):
        cfg = NetConfig(variant="multi", input_size=64, epochs=1,
                        class_weight=0.0, seed=1)
        model = train_multi(small_manifest, cfg)
        h = model.history[0]
        assert h["trainLoss"] == pytest.approx(h["trainEpe"], abs=1e-12)

    def test_deterministic_loss_curves(self, small_manifest):
        cfg = NetConfig(variant="multi", input_size=64, epochs=2, seed=7)
        h1 = train_multi(small_manifest, cfg).history
        h2 = train_multi(small_manifest, cfg).history
        assert h1 == h2


class TestTrainedModel:
    def test_save_load_identical_inference(self, small_manifest, tmp_path):
        cfg = NetConfig(variant="multi", input_size=64, epochs=1, seed=3)
        model = train_multi(small_manifest, cfg)
        path = tmp_path / "weights.pt"
        model.save(path)
        back = TrainedModel.load(path)
        assert back.config == model.config
        assert back.manifest_hash == model.manifest_hash

        data = load_dataset(small_manifest)
        x = data.images[:4]
        with torch.no_grad():
            f1, s1 = model.build()(x)
            f2, s2 = back.build()(x)
        assert torch.equal(f1, f2) and torch.equal(s1, s2)

    def test_manifest_hash_recorded(self, small_manifest):
        cfg = NetConfig(variant="multi", input_size=64, epochs=1, seed=3)
        model = train_multi(small_manifest, cfg)
        import hashlib
        expected = hashlib.sha256(open(small_manifest, "rb").read()).hexdigest()
        assert model.manifest_hash == expected

    def test_size_mismatch_rejected(self, small_manifest):
        cfg = NetConfig(variant="multi", input_size=128, epochs=1)
        with pytest.raises(ValueError):
            train_multi(small_manifest, cfg)
