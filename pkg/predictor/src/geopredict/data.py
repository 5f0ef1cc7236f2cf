"""Dataset loading: manifests of (image, flow, type) triples, held fully
in memory as tensors (desk-scale datasets are a few thousand small pairs).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import torch

from .flowfiles import TYPE_NAMES, ManifestRecord, read_flow, read_image, read_manifest

TYPE_INDEX = {name: i for i, name in enumerate(TYPE_NAMES)}


@dataclass
class FlowDataset:
    """All samples of a manifest as stacked tensors.

    ``images`` (N, 3, S, S) float32 in [0, 1]; ``flows`` (N, 2, S, S) in
    pixel units; ``labels`` (N,) int64 type indices.
    """

    images: torch.Tensor
    flows: torch.Tensor
    labels: torch.Tensor
    records: list[ManifestRecord]
    manifest_hash: str

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def size(self) -> int:
        return self.images.shape[-1]

    def subset(self, idx) -> "FlowDataset":
        idx = torch.as_tensor(idx, dtype=torch.long)
        return FlowDataset(self.images[idx], self.flows[idx], self.labels[idx],
                           [self.records[i] for i in idx.tolist()], self.manifest_hash)


def manifest_sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def load_dataset(manifest_path, type_filter: str | None = None) -> FlowDataset:
    """Read every pair a manifest indexes; optionally keep one family only."""
    records, _ = read_manifest(manifest_path)
    if type_filter is not None:
        if type_filter not in TYPE_NAMES:
            raise ValueError(f"unknown distortion type {type_filter!r}")
        records = [r for r in records if r.type == type_filter]
        if not records:
            raise ValueError(f"manifest holds no {type_filter!r} records")
    images, flows, labels = [], [], []
    for r in records:
        images.append(torch.from_numpy(read_image(r.image).transpose(2, 0, 1)))
        flows.append(torch.from_numpy(read_flow(r.flow).transpose(2, 0, 1)))
        labels.append(TYPE_INDEX[r.type])
    return FlowDataset(
        images=torch.stack(images),
        flows=torch.stack(flows),
        labels=torch.tensor(labels, dtype=torch.long),
        records=records,
        manifest_hash=manifest_sha256(manifest_path),
    )


def split_train_val(dataset: FlowDataset, val_fraction: float, seed: int):
    """Deterministic shuffled split, stratification-free."""
    n = len(dataset)
    gen = np.random.default_rng(seed)
    order = gen.permutation(n)
    n_val = int(round(n * val_fraction))
    return dataset.subset(order[n_val:]), dataset.subset(order[:n_val])
