"""Bit-exact file formats: binary flow files, PNG images, dataset manifests
and prediction sidecars.

The flow container is the common optical-flow interchange layout: a 4-byte
magic (the little-endian float32 202021.25, bytes "PIEH"), signed 32-bit
little-endian width and height, then row-major interleaved little-endian
float32 (fx, fy) samples. Endianness is fixed regardless of host. Validity
masks are not persisted: files produced by this package contain only valid
pixels (crops), and masked vectors are zero-filled. Byte layouts and JSON
schemas are documented in docs/formats.md.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .core import FlowField, GeowarpError, ImageBuffer

FLOW_MAGIC_BYTES = b"PIEH"
FLOW_MAGIC_FLOAT = 202021.25
MAX_FLOW_DIM = 32768


class FlowFormatError(GeowarpError):
    """A flow file violates the binary layout; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _atomic_write(path: str, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def flow_to_bytes(flow: FlowField) -> bytes:
    """Serialize a flow field to the binary container layout."""
    w, h = flow.width, flow.height
    if w > MAX_FLOW_DIM or h > MAX_FLOW_DIM:
        raise FlowFormatError(f"dimensions {w}x{h} exceed {MAX_FLOW_DIM}", 4)
    header = (
        np.array([FLOW_MAGIC_FLOAT], dtype="<f4").tobytes()
        + np.array([w, h], dtype="<i4").tobytes()
    )
    body = flow.vectors.astype("<f4").tobytes()
    return header + body


def flow_from_bytes(buf: bytes) -> FlowField:
    """Parse the binary container layout; raises FlowFormatError with offsets."""
    if len(buf) < 4:
        raise FlowFormatError("file shorter than the 4-byte magic", len(buf))
    if buf[:4] != FLOW_MAGIC_BYTES:
        raise FlowFormatError(f"bad magic {buf[:4]!r}, expected {FLOW_MAGIC_BYTES!r}", 0)
    if len(buf) < 12:
        raise FlowFormatError("truncated header: missing width/height", len(buf))
    w, h = (int(v) for v in np.frombuffer(buf[4:12], dtype="<i4"))
    if not (0 < w <= MAX_FLOW_DIM):
        raise FlowFormatError(f"width {w} outside (0, {MAX_FLOW_DIM}]", 4)
    if not (0 < h <= MAX_FLOW_DIM):
        raise FlowFormatError(f"height {h} outside (0, {MAX_FLOW_DIM}]", 8)
    expected = 12 + 8 * w * h
    if len(buf) != expected:
        raise FlowFormatError(
            f"body holds {len(buf) - 12} bytes, expected {8 * w * h} for {w}x{h}",
            min(len(buf), expected),
        )
    data = np.frombuffer(buf[12:], dtype="<f4")
    bad = ~np.isfinite(data)
    if bad.any():
        raise FlowFormatError("non-finite flow component", 12 + int(np.argmax(bad)) * 4)
    return FlowField(data.astype(np.float64).reshape(h, w, 2))


def write_flow(path, flow: FlowField) -> None:
    """Write a flow field; the write is atomic (temp file + rename)."""
    _atomic_write(str(path), flow_to_bytes(flow))


def read_flow(path) -> FlowField:
    with open(path, "rb") as fh:
        return flow_from_bytes(fh.read())


def write_image(path, image: ImageBuffer) -> None:
    """Write an image as 8-bit PNG; a validity mask becomes the alpha channel."""
    data = np.rint(image.data * 255.0).astype(np.uint8)
    if image.valid is not None:
        if image.channels == 3:
            alpha = np.where(image.valid, 255, 0).astype(np.uint8)
            data = np.concatenate([data, alpha[..., None]], axis=2)
        else:
            data = data.copy()
            data[..., 3] = np.where(image.valid, data[..., 3], 0)
    mode = "RGBA" if data.shape[2] == 4 else "RGB"
    buf = tempfile.NamedTemporaryFile(
        dir=os.path.dirname(os.path.abspath(str(path))), suffix=".tmp", delete=False
    )
    try:
        Image.fromarray(data, mode=mode).save(buf, format="PNG")
        buf.close()
        os.replace(buf.name, str(path))
    except BaseException:
        buf.close()
        if os.path.exists(buf.name):
            os.unlink(buf.name)
        raise


def read_image(path) -> ImageBuffer:
    """Read any raster format Pillow supports into [0, 1] RGB(A) samples."""
    with Image.open(path) as im:
        if im.mode not in ("RGB", "RGBA"):
            im = im.convert("RGBA" if "A" in im.mode or "transparency" in im.info else "RGB")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    return ImageBuffer(arr)


SIDECAR_TYPES = ("barrel", "pincushion", "rotation", "shear", "perspective", "wave")


@dataclass(frozen=True)
class PredictionSidecar:
    """Companion JSON emitted next to a predicted flow file.

    ``type`` is the predicted distortion family, ``scores`` the six raw
    classification scores in the fixed family order, ``flow`` the relative
    path of the flow file.
    """

    type: str
    scores: tuple[float, ...]
    flow: str

    def __post_init__(self):
        if self.type not in SIDECAR_TYPES:
            raise ValueError(f"unknown distortion type {self.type!r}")
        scores = tuple(float(s) for s in self.scores)
        if len(scores) != 6:
            raise ValueError(f"expected 6 scores, got {len(scores)}")
        if not all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "scores", scores)


def write_sidecar(path, sidecar: PredictionSidecar) -> None:
    payload = json.dumps(
        {"type": sidecar.type, "scores": list(sidecar.scores), "flow": sidecar.flow},
        sort_keys=True, indent=2,
    ).encode()
    _atomic_write(str(path), payload + b"\n")


def read_sidecar(path) -> PredictionSidecar:
    with open(path) as fh:
        doc = json.load(fh)
    sidecar = PredictionSidecar(doc["type"], tuple(doc["scores"]), doc["flow"])
    flow_path = os.path.join(os.path.dirname(str(path)), sidecar.flow)
    if not os.path.exists(flow_path):
        raise FileNotFoundError(f"sidecar references missing flow file {flow_path}")
    return sidecar
