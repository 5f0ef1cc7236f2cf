import json
import os

import numpy as np
import pytest

from geopredict.flowfiles import (
    FlowFileError,
    read_flow,
    read_image,
    read_manifest,
    write_flow,
    write_sidecar,
)

from conftest import run_geowarp


class TestFlowRoundtrip:
    def test_roundtrip(self, tmp_path, ):
        rng = np.random.default_rng(0)
        flow = rng.standard_normal((12, 9, 2)).astype(np.float32)
        path = tmp_path / "f.flo"
        write_flow(path, flow)
        assert np.array_equal(read_flow(path), flow)

    def test_layout(self, tmp_path):
        flow = np.zeros((1, 2, 2), np.float32)
        path = tmp_path / "f.flo"
        write_flow(path, flow)
        raw = path.read_bytes()
        assert raw[:4] == b"PIEH"
        assert len(raw) == 12 + 16

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.flo"
        path.write_bytes(b"\xde\xad\xbe\xef" + b"\0" * 16)
        with pytest.raises(FlowFileError):
            read_flow(path)

    def test_truncated_rejected(self, tmp_path):
        rng = np.random.default_rng(1)
        path = tmp_path / "f.flo"
        write_flow(path, rng.standard_normal((4, 4, 2)).astype(np.float32))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(FlowFileError):
            read_flow(path)

    def test_toolkit_reads_our_files(self, tmp_path):
        """A flow we write must be parseable by the toolkit CLI (epe of a
        file against itself prints 0)."""
        rng = np.random.default_rng(2)
        path = tmp_path / "ours.flo"
        write_flow(path, (rng.standard_normal((16, 16, 2)) * 5).astype(np.float32))
        proc = run_geowarp("epe", "--a", path, "--b", path)
        assert proc.returncode == 0, proc.stderr
        assert float(proc.stdout.strip()) == 0.0


class TestManifest:
    def test_reads_toolkit_dataset(self, small_manifest):
        records, base = read_manifest(small_manifest)
        assert len(records) == 60
        types = {r.type for r in records}
        assert types == {"barrel", "pincushion", "rotation", "shear",
                         "perspective", "wave"}
        img = read_image(records[0].image)
        flow = read_flow(records[0].flow)
        assert img.shape == (64, 64, 3)
        assert flow.shape == (64, 64, 2)


class TestSidecar:
    def test_write_shape(self, tmp_path):
        write_sidecar(tmp_path / "s.json", "wave", list(range(6)), "f.flo")
        doc = json.loads((tmp_path / "s.json").read_text())
        assert doc == {"type": "wave", "scores": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
                       "flow": "f.flo"}

    def test_bad_type_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_sidecar(tmp_path / "s.json", "swirl", [0.0] * 6, "f.flo")
        with pytest.raises(ValueError):
            write_sidecar(tmp_path / "s.json", "wave", [0.0] * 5, "f.flo")
