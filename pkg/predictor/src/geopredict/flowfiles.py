"""Interchange file handling: the binary flow container, prediction
sidecars, and dataset manifests.

Implements the layouts documented in the distortion toolkit's
docs/formats.md (magic "PIEH", little-endian int32 dims, row-major
interleaved float32 vectors; JSON manifests/sidecars). This package talks
to the toolkit exclusively through these files and its CLI.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

FLOW_MAGIC = b"PIEH"
MAX_DIM = 32768

TYPE_NAMES = ("barrel", "pincushion", "rotation", "shear", "perspective", "wave")


class FlowFileError(ValueError):
    pass


def read_flow(path) -> np.ndarray:
    """Flow file -> (H, W, 2) float32 array."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 12 or buf[:4] != FLOW_MAGIC:
        raise FlowFileError(f"{path}: not a flow file")
    w, h = (int(v) for v in np.frombuffer(buf[4:12], "<i4"))
    if not (0 < w <= MAX_DIM and 0 < h <= MAX_DIM) or len(buf) != 12 + 8 * w * h:
        raise FlowFileError(f"{path}: corrupt dimensions or body")
    return np.frombuffer(buf[12:], "<f4").reshape(h, w, 2).copy()


def write_flow(path, flow: np.ndarray) -> None:
    flow = np.ascontiguousarray(flow, dtype="<f4")
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise FlowFileError(f"flow must be (H, W, 2), got {flow.shape}")
    if not np.isfinite(flow).all():
        raise FlowFileError("flow components must be finite")
    h, w = flow.shape[:2]
    header = FLOW_MAGIC + np.array([w, h], "<i4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + flow.tobytes())


def read_image(path) -> np.ndarray:
    """PNG (or anything Pillow reads) -> (H, W, 3) float32 in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return arr


def write_sidecar(path, type_name: str, scores, flow_rel_path: str) -> None:
    if type_name not in TYPE_NAMES:
        raise ValueError(f"unknown distortion type {type_name!r}")
    scores = [float(s) for s in scores]
    if len(scores) != 6:
        raise ValueError(f"expected 6 scores, got {len(scores)}")
    doc = {"type": type_name, "scores": scores, "flow": flow_rel_path}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class ManifestRecord:
    image: str
    flow: str
    type: str
    rho: tuple[float, ...]


def read_manifest(path) -> tuple[list[ManifestRecord], str]:
    """Dataset manifest -> (records with absolute paths resolved, directory)."""
    base = os.path.dirname(os.path.abspath(str(path)))
    with open(path) as fh:
        doc = json.load(fh)
    records = [
        ManifestRecord(
            image=os.path.join(base, r["image"]),
            flow=os.path.join(base, r["flow"]),
            type=r["type"],
            rho=tuple(float(v) for v in r["rho"]),
        )
        for r in doc["records"]
    ]
    return records, base
