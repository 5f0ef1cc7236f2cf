"""Applications composed from fitting + resampling: distortion transfer,
distortion exaggeration, and iterated correction of co-occurring distortions.
"""

from __future__ import annotations

import numpy as np

from .core import FlowField, GeowarpError, ImageBuffer, bilinear_lookup, scale_flow
from .fitting import FitResult, identify_model, refine_flow
from .models import DistortionType, ParamRange
from .resampler import ResampleOptions, resample
from .synthesizer import warp_with_flow

# An identified distortion whose refined flow moves pixels less than this
# (mean, in px) is treated as "no distortion left" by iterated correction.
STOP_MEAN_FLOW = 0.5


class ProviderError(GeowarpError):
    """The flow provider failed; partial results are attached.

    ``image`` holds the most recent corrected image and ``fits`` the fits of
    the rounds completed before the failure.
    """

    def __init__(self, message: str, image: ImageBuffer, fits: list[FitResult]):
        super().__init__(message)
        self.image = image
        self.fits = fits


def _resize_flow(flow: FlowField, width: int, height: int) -> FlowField:
    """Bilinearly resize a flow grid, rescaling vectors by the per-axis ratio.

    Grid positions map corner-to-corner, so displacement vectors scale by
    (W2-1)/(W1-1) horizontally and (H2-1)/(H1-1) vertically.
    """
    if (width, height) == (flow.width, flow.height):
        return flow
    sx = (flow.width - 1) / (width - 1) if width > 1 else 0.0
    sy = (flow.height - 1) / (height - 1) if height > 1 else 0.0
    xs, ys = np.meshgrid(np.arange(width, dtype=np.float64) * sx,
                         np.arange(height, dtype=np.float64) * sy)
    vec = bilinear_lookup(flow.vectors, xs, ys)
    kx = (width - 1) / (flow.width - 1) if flow.width > 1 else 1.0
    ky = (height - 1) / (flow.height - 1) if flow.height > 1 else 1.0
    vec[..., 0] *= kx
    vec[..., 1] *= ky
    return FlowField(vec)


def transfer(reference_flow: FlowField, target: ImageBuffer) -> ImageBuffer:
    """Apply a reference image's distortion flow to a different image.

    The reference flow is resized to the target's dimensions and applied
    directly by backward bilinear sampling, D(p) = target(p + F(p)); no
    iterative inversion is involved.
    """
    flow = _resize_flow(reference_flow, target.width, target.height)
    warped, _ = warp_with_flow(target, flow)
    return warped


def exaggerate(image: ImageBuffer, flow: FlowField, gain: float) -> ImageBuffer:
    """Resample through a gain-scaled flow.

    gain = 1 fully corrects, gain = 0 returns the input, negative gains
    reverse the flow and push pixels further from their undistorted
    positions (distortion exaggeration).
    """
    if not np.isfinite(gain):
        raise ValueError(f"gain must be finite, got {gain}")
    out, _ = resample(image, scale_flow(flow, gain))
    return out


def correct_iterative(
    image: ImageBuffer,
    flow_provider,
    rounds: int = 2,
    ranges: dict[DistortionType, ParamRange] | None = None,
    opts: ResampleOptions | None = None,
) -> tuple[ImageBuffer, list[FitResult]]:
    """Detect-and-correct loop for images with co-occurring distortions.

    Each round asks ``flow_provider(image)`` for a distortion flow,
    identifies the best-fitting family, regenerates its smooth flow at the
    image size and resamples. The loop records one fit per round and stops
    early once the identified flow moves pixels less than
    :data:`STOP_MEAN_FLOW` px on average. ``flow_provider`` may be a
    ground-truth lookup (tests), a learned predictor (deployment), or any
    callable ImageBuffer -> FlowField.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    fits: list[FitResult] = []
    current = image
    for _ in range(rounds):
        try:
            flow = flow_provider(current)
        except Exception as exc:
            raise ProviderError(f"flow provider failed: {exc}", current, fits) from exc
        best = identify_model(flow, ranges)[0]
        fits.append(best)
        refined = refine_flow(best, current.width, current.height)
        mags = np.hypot(refined.vectors[..., 0], refined.vectors[..., 1])
        if float(mags.mean()) < STOP_MEAN_FLOW:
            break
        current, _ = resample(current, refined, opts)
    return current, fits
