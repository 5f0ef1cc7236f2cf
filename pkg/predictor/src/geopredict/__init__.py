"""geopredict: convolutional networks that predict geometric distortion
flow and type from a single image.

Trains on datasets produced by the distortion toolkit's synthesizer
(manifest JSON + PNG + flow files) and emits predicted flows and
classification sidecars in the same interchange formats, so the toolkit's
Hough fitting and resampling consume them directly.
"""

from .data import FlowDataset, load_dataset, split_train_val
from .inference import predict, predict_array
from .model_layers import DistortionFlowLayer, epe_loss
from .networks import GeoNetMulti, GeoNetSingle, NetConfig, build_network, joint_loss
from .training import TrainedModel, train_multi, train_single

__version__ = "0.1.0"

__all__ = [
    "FlowDataset",
    "load_dataset",
    "split_train_val",
    "predict",
    "predict_array",
    "DistortionFlowLayer",
    "epe_loss",
    "GeoNetMulti",
    "GeoNetSingle",
    "NetConfig",
    "build_network",
    "joint_loss",
    "TrainedModel",
    "train_multi",
    "train_single",
    "__version__",
]
