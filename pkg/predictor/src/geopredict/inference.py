"""Inference: predicted flow files plus classification sidecars, in the
interchange formats the distortion toolkit consumes directly.
"""

from __future__ import annotations

import os

import numpy as np
import torch
from PIL import Image

from .flowfiles import TYPE_NAMES, read_image, write_flow, write_sidecar
from .training import TrainedModel


def _prepare(image: np.ndarray, size: int) -> tuple[torch.Tensor, float, float]:
    """Resize to the network input size; return the per-axis flow scale
    factors that map predicted displacements back to the original frame."""
    h, w = image.shape[:2]
    if (h, w) != (size, size):
        im = Image.fromarray(np.rint(image * 255).astype(np.uint8))
        image = np.asarray(im.resize((size, size), Image.BILINEAR),
                           dtype=np.float32) / 255.0
    return (torch.from_numpy(image.transpose(2, 0, 1))[None],
            w / size, h / size)


def predict_array(model: TrainedModel, image: np.ndarray):
    """Predicted flow (H, W, 2 float32, at network size) and six scores.

    Single-family models emit a one-hot-by-construction score vector for
    their own family.
    """
    net = model.build()
    size = model.config.input_size
    x, _, _ = _prepare(image, size)
    with torch.no_grad():
        if model.config.variant == "single":
            flow, _rho = net(x)
            scores = np.full(6, -1.0, dtype=np.float64)
            scores[TYPE_NAMES.index(model.config.type)] = 1.0
        else:
            flow, raw = net(x)
            scores = raw[0].double().numpy()
    return flow[0].numpy().transpose(1, 2, 0).astype(np.float32), scores


def predict(model: TrainedModel, image_path, out_dir) -> tuple[str, str]:
    """Write <stem>.flo and <stem>.json next to each other in ``out_dir``.

    Returns the two paths. The sidecar's type is the argmax family.
    """
    os.makedirs(out_dir, exist_ok=True)
    image = read_image(image_path)
    flow, scores = predict_array(model, image)
    stem = os.path.splitext(os.path.basename(str(image_path)))[0]
    flow_name = f"{stem}.flo"
    flow_path = os.path.join(out_dir, flow_name)
    sidecar_path = os.path.join(out_dir, f"{stem}.json")
    write_flow(flow_path, flow)
    write_sidecar(sidecar_path, TYPE_NAMES[int(np.argmax(scores))], scores, flow_name)
    return flow_path, sidecar_path
