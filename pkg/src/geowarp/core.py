"""Shared raster/flow containers, coordinate conventions, and the endpoint-error metric.

Conventions used throughout the package:

* Pixel coordinates are (x, y): x grows rightward, y downward, and the origin
  is the center of the top-left sample.
* A flow field stores forward displacements in pixel units: pixel p of a
  distorted image moves to p + F(p) in the corrected image.
* Parametric model math runs in centered normalized coordinates
  u = (x - cx) / scale, v = (y - cy) / scale with cx = (W - 1) / 2,
  cy = (H - 1) / 2 and scale = max(W, H) / 2, which keeps model parameters
  dimensionless and comparable across image sizes.
* Image samples are floats in [0, 1]; 8-bit data is converted at the file
  boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GeowarpError(Exception):
    """Base class for errors raised by this package."""


class DimensionMismatch(GeowarpError, ValueError):
    """Two grids that must agree in size do not."""


class OutOfBounds(GeowarpError, ValueError):
    """A continuous sample position lies outside the grid domain."""


@dataclass(frozen=True)
class ImageBuffer:
    """H x W raster of RGB(A) samples in [0, 1] with an optional validity mask.

    ``data`` has shape (H, W, C) with C = 3 or 4. ``valid`` is an (H, W)
    boolean mask; ``None`` means every pixel is valid. Instances are
    immutable: the backing arrays are marked read-only on construction, so
    sharing across threads is safe.
    """

    data: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] not in (3, 4):
            raise ValueError(f"image data must have shape (H, W, 3|4), got {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("image must contain at least one pixel")
        if not np.isfinite(data).all():
            raise ValueError("image samples must be finite")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("image samples must lie in [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.valid is not None:
            valid = np.ascontiguousarray(self.valid, dtype=bool)
            if valid.shape != data.shape[:2]:
                raise DimensionMismatch(
                    f"validity mask shape {valid.shape} != image shape {data.shape[:2]}"
                )
            valid.setflags(write=False)
            object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def valid_mask(self) -> np.ndarray:
        """Validity as a concrete (H, W) boolean array."""
        if self.valid is None:
            return np.ones(self.data.shape[:2], dtype=bool)
        return self.valid


@dataclass(frozen=True)
class FlowField:
    """H x W grid of forward 2D displacements in pixel units.

    ``vectors`` has shape (H, W, 2) holding (fx, fy); the corrected position
    of pixel p is p + F(p). ``valid`` marks pixels whose displacement is
    meaningful (``None`` = all valid). Immutable after construction.
    """

    vectors: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        vec = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if vec.ndim != 3 or vec.shape[2] != 2:
            raise ValueError(f"flow vectors must have shape (H, W, 2), got {vec.shape}")
        if vec.shape[0] < 1 or vec.shape[1] < 1:
            raise ValueError("flow must contain at least one pixel")
        if not np.isfinite(vec).all():
            raise ValueError("flow components must be finite")
        vec.setflags(write=False)
        object.__setattr__(self, "vectors", vec)
        if self.valid is not None:
            valid = np.ascontiguousarray(self.valid, dtype=bool)
            if valid.shape != vec.shape[:2]:
                raise DimensionMismatch(
                    f"validity mask shape {valid.shape} != flow shape {vec.shape[:2]}"
                )
            valid.setflags(write=False)
            object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return self.vectors.shape[0]

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    def valid_mask(self) -> np.ndarray:
        if self.valid is None:
            return np.ones(self.vectors.shape[:2], dtype=bool)
        return self.valid


@dataclass(frozen=True)
class NormalizedCoords:
    """Centered normalized frame: u = (x - cx)/scale, v = (y - cy)/scale."""

    cx: float
    cy: float
    scale: float

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"normalization scale must be positive, got {self.scale}")

    @classmethod
    def for_image(cls, width: int, height: int) -> "NormalizedCoords":
        """Canonical frame for a W x H image: center pixel, scale = max(W, H)/2."""
        return cls(cx=(width - 1) / 2.0, cy=(height - 1) / 2.0, scale=max(width, height) / 2.0)

    def to_normalized(self, x, y):
        return (np.asarray(x) - self.cx) / self.scale, (np.asarray(y) - self.cy) / self.scale

    def to_pixels(self, u, v):
        return np.asarray(u) * self.scale + self.cx, np.asarray(v) * self.scale + self.cy


def epe(a: FlowField, b: FlowField) -> float:
    """Mean endpoint error between two flow fields, in pixels.

    The per-pixel error is the Euclidean distance between corresponding
    vectors; the result averages over all pixels, or over the jointly valid
    ones when either field carries a mask.
    """
    if a.vectors.shape != b.vectors.shape:
        raise DimensionMismatch(
            f"flow dimensions differ: {a.vectors.shape[:2]} vs {b.vectors.shape[:2]}"
        )
    diff = a.vectors - b.vectors
    norms = np.hypot(diff[..., 0], diff[..., 1])
    if a.valid is None and b.valid is None:
        return float(norms.mean())
    joint = a.valid_mask() & b.valid_mask()
    if not joint.any():
        raise ValueError("no jointly valid pixels to compare")
    return float(norms[joint].mean())


def scale_flow(f: FlowField, k: float) -> FlowField:
    """Multiply every displacement by ``k``; k = -1 reverses the flow direction."""
    if not np.isfinite(k):
        raise ValueError(f"scale factor must be finite, got {k}")
    return FlowField(f.vectors * float(k), valid=f.valid)


def bilinear_lookup(values: np.ndarray, xs, ys) -> np.ndarray:
    """Bilinear sampling of an (H, W, C) grid at continuous positions.

    Positions are clamped to the grid domain (edge-extension), so callers
    that need out-of-bounds detection must test the raw positions first.
    Returns an array of shape ``xs.shape + (C,)``.
    """
    h, w = values.shape[:2]
    xs = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1.0)
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    tx = (xs - x0)[..., None]
    ty = (ys - y0)[..., None]
    v00 = values[y0, x0]
    v01 = values[y0, x1]
    v10 = values[y1, x0]
    v11 = values[y1, x1]
    top = v00 * (1.0 - tx) + v01 * tx
    bot = v10 * (1.0 - tx) + v11 * tx
    return top * (1.0 - ty) + bot * ty


_BOUNDS_EPS = 1e-9


def sample_flow_bilinear(f: FlowField, p) -> tuple[float, float]:
    """Bilinearly interpolated flow vector at a continuous point p = (x, y).

    Raises :class:`OutOfBounds` when p lies outside [0, W-1] x [0, H-1];
    the caller decides the fallback.
    """
    x, y = float(p[0]), float(p[1])
    if not (-_BOUNDS_EPS <= x <= f.width - 1 + _BOUNDS_EPS
            and -_BOUNDS_EPS <= y <= f.height - 1 + _BOUNDS_EPS):
        raise OutOfBounds(f"sample position ({x}, {y}) outside {f.width}x{f.height} flow")
    v = bilinear_lookup(f.vectors, np.array(x), np.array(y))
    return float(v[0]), float(v[1])
