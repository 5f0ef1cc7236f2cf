"""geowarp: synthesis, estimation, and fast correction of parametric
geometric image distortions.

The package covers the full loop around dense forward distortion flows:

* :mod:`geowarp.models` defines six parametric distortion families
  (barrel, pincushion, rotation, shear, perspective, wave) with forward
  point mapping, dense flow generation, and per-pixel inversion;
* :mod:`geowarp.synthesizer` warps images into (distorted image,
  ground-truth flow) pairs and crops away empty regions;
* :mod:`geowarp.fitting` recovers model parameters from a noisy flow by
  Hough voting and regenerates smooth flows at any resolution;
* :mod:`geowarp.resampler` corrects an image from its forward flow with a
  derivative-initialized per-pixel fixed-point search;
* :mod:`geowarp.apps` composes these into distortion transfer,
  exaggeration, and iterated multi-distortion correction;
* :mod:`geowarp.flowio` reads and writes the binary flow container, PNG
  images, dataset manifests and prediction sidecars.
"""

from .apps import ProviderError, correct_iterative, exaggerate, transfer
from .core import (
    DimensionMismatch,
    FlowField,
    GeowarpError,
    ImageBuffer,
    NormalizedCoords,
    OutOfBounds,
    epe,
    sample_flow_bilinear,
    scale_flow,
)
from .fitting import (
    FitResult,
    HoughAccumulator,
    InsufficientData,
    Unidentifiable,
    hough_fit,
    identify_model,
    refine_flow,
)
from .models import (
    DistortionParams,
    DistortionType,
    ParamRange,
    SingularMapping,
    UninformativePixel,
    default_ranges,
    flow_field,
    forward_map,
    invert_pixel,
    sample_params,
)
from .resampler import ResampleOptions, ResampleReport, init_estimate, resample, solve_pixel
from .synthesizer import (
    CropRect,
    DatasetManifest,
    DatasetRecord,
    GenerationFailure,
    crop_valid,
    distort_image,
    generate_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "ProviderError",
    "correct_iterative",
    "exaggerate",
    "transfer",
    "DimensionMismatch",
    "FlowField",
    "GeowarpError",
    "ImageBuffer",
    "NormalizedCoords",
    "OutOfBounds",
    "epe",
    "sample_flow_bilinear",
    "scale_flow",
    "DistortionParams",
    "DistortionType",
    "ParamRange",
    "SingularMapping",
    "UninformativePixel",
    "default_ranges",
    "flow_field",
    "forward_map",
    "invert_pixel",
    "sample_params",
    "FitResult",
    "HoughAccumulator",
    "InsufficientData",
    "Unidentifiable",
    "hough_fit",
    "identify_model",
    "refine_flow",
    "ResampleOptions",
    "ResampleReport",
    "init_estimate",
    "resample",
    "solve_pixel",
    "CropRect",
    "DatasetManifest",
    "DatasetRecord",
    "GenerationFailure",
    "crop_valid",
    "distort_image",
    "generate_dataset",
    "__version__",
]
