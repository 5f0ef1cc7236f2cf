"""Training loops for the single- and multi-family networks.

Determinism contract: a fixed config seed fixes the weight initialization,
the batch order, and therefore the whole loss curve on CPU.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch

from .data import FlowDataset, load_dataset, split_train_val
from .model_layers import epe_loss
from .networks import NetConfig, build_network, joint_loss

logger = logging.getLogger(__name__)


@dataclass
class TrainedModel:
    """A reloadable weights artifact tied to its config and training data."""

    config: NetConfig
    state_dict: dict
    manifest_hash: str
    history: list[dict]

    def save(self, path) -> None:
        torch.save(
            {"config": self.config.to_dict(), "state_dict": self.state_dict,
             "manifest_hash": self.manifest_hash, "history": self.history},
            path,
        )

    @classmethod
    def load(cls, path) -> "TrainedModel":
        doc = torch.load(path, map_location="cpu", weights_only=False)
        return cls(config=NetConfig.from_dict(doc["config"]),
                   state_dict=doc["state_dict"],
                   manifest_hash=doc["manifest_hash"],
                   history=doc["history"])

    def build(self) -> torch.nn.Module:
        net = build_network(self.config)
        net.load_state_dict(self.state_dict)
        net.eval()
        return net


def _batches(n: int, batch_size: int, gen: torch.Generator):
    order = torch.randperm(n, generator=gen)
    for start in range(0, n, batch_size):
        yield order[start: start + batch_size]


def _fit(net, dataset: FlowDataset, config: NetConfig, compute_loss, evaluate):
    gen = torch.Generator().manual_seed(config.seed + 1)
    opt = torch.optim.Adam(net.parameters(), lr=config.learning_rate)
    sched = torch.optim.lr_scheduler.ExponentialLR(opt, gamma=config.lr_decay)
    train, val = split_train_val(dataset, config.val_fraction, config.seed)
    if len(train) == 0:
        raise ValueError("training split is empty")

    # multithreaded conv backward is not bitwise reproducible on CPU; a
    # fixed seed must fix the whole loss curve
    n_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        history = []
        for epoch in range(config.epochs):
            net.train()
            epoch_terms = []
            for idx in _batches(len(train), config.batch_size, gen):
                opt.zero_grad()
                loss, terms = compute_loss(net, train, idx)
                loss.backward()
                opt.step()
                epoch_terms.append(terms)
            sched.step()
            entry = {k: float(np.mean([t[k] for t in epoch_terms]))
                     for k in epoch_terms[0]}
            entry["epoch"] = epoch
            if len(val):
                net.eval()
                with torch.no_grad():
                    entry.update(evaluate(net, val))
            history.append(entry)
            logger.info("epoch %d: %s", epoch,
                        " ".join(f"{k}={v:.4f}" for k, v in entry.items() if k != "epoch"))
    finally:
        torch.set_num_threads(n_threads)
    return history


def train_single(manifest_path, type_name: str, config: NetConfig | None = None) -> TrainedModel:
    """Fit the known-family network on one family's pairs.

    The network regresses the parameter vector implicitly: its output flow
    is generated analytically from the predicted parameters and supervised
    with endpoint error against the ground-truth flow.
    """
    if config is None:
        config = NetConfig(variant="single", type=type_name)
    if config.variant != "single" or config.type != type_name:
        raise ValueError(f"config is for {config.variant}/{config.type}, "
                         f"not single/{type_name}")
    dataset = load_dataset(manifest_path, type_filter=type_name)
    if dataset.size != config.input_size:
        raise ValueError(f"manifest pairs are {dataset.size}px, "
                         f"config expects {config.input_size}px")
    torch.manual_seed(config.seed)
    net = build_network(config)

    def compute_loss(net, data, idx):
        flow, _rho = net(data.images[idx])
        loss = epe_loss(flow, data.flows[idx])
        return loss, {"trainEpe": float(loss.detach())}

    def evaluate(net, val):
        flow, _ = net(val.images)
        return {"valEpe": float(epe_loss(flow, val.flows))}

    history = _fit(net, dataset, config, compute_loss, evaluate)
    return TrainedModel(config, net.state_dict(), dataset.manifest_hash, history)


def train_multi(manifest_path, config: NetConfig | None = None) -> TrainedModel:
    """Jointly fit flow regression and type classification on all families."""
    config = config or NetConfig(variant="multi")
    if config.variant != "multi":
        raise ValueError("config variant must be 'multi'")
    dataset = load_dataset(manifest_path)
    if dataset.size != config.input_size:
        raise ValueError(f"manifest pairs are {dataset.size}px, "
                         f"config expects {config.input_size}px")
    torch.manual_seed(config.seed)
    net = build_network(config)
    ce = torch.nn.CrossEntropyLoss()

    def compute_loss(net, data, idx):
        flow, scores = net(data.images[idx])
        flow_term = epe_loss(flow, data.flows[idx])
        class_term = ce(scores, data.labels[idx])
        loss = joint_loss(flow_term, class_term, config.class_weight)
        return loss, {"trainLoss": float(loss.detach()),
                      "trainEpe": float(flow_term.detach()),
                      "trainClass": float(class_term.detach())}

    def evaluate(net, val):
        flow, scores = net(val.images)
        acc = float((scores.argmax(dim=1) == val.labels).float().mean())
        zero_epe = float(epe_loss(torch.zeros_like(val.flows), val.flows))
        return {"valEpe": float(epe_loss(flow, val.flows)),
                "valAccuracy": acc, "valZeroFlowEpe": zero_epe}

    history = _fit(net, dataset, config, compute_loss, evaluate)
    return TrainedModel(config, net.state_dict(), dataset.manifest_hash, history)
