"""Paired (distorted image, ground-truth flow) synthesis: warping, validity
tracking, empty-region cropping and batch dataset generation.

A distorted image is built by sampling the source at every pixel's corrected
position, D(p) = src(p + F(p)), with bilinear interpolation; pixels whose
source position falls outside the image are masked invalid. Crops keep flow
vectors unchanged (pixel-unit displacements are crop-invariant) and only
re-index positions, so a stored pair can be regenerated exactly from its
record: the full flow at the source size, restricted to the crop rectangle.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from . import flowio
from .core import FlowField, GeowarpError, ImageBuffer, bilinear_lookup
from .models import (
    DistortionParams,
    DistortionType,
    ParamRange,
    default_ranges,
    flow_field,
    sample_params,
)

logger = logging.getLogger(__name__)

MIN_SOURCE_SIZE = 64
MAX_PARAM_REDRAWS = 10


class GenerationFailure(GeowarpError):
    """The valid region is too small for the requested output size."""


@dataclass(frozen=True)
class CropRect:
    """Axis-aligned crop window in pixel indices (x, y = top-left corner)."""

    x: int
    y: int
    width: int
    height: int


@dataclass(frozen=True)
class DatasetRecord:
    image: str
    flow: str
    type: DistortionType
    rho: tuple[float, ...]
    crop: CropRect
    source_id: str
    seed: int


@dataclass(frozen=True)
class DatasetManifest:
    """Index of a generated dataset; serialized as one JSON document."""

    size: tuple[int, int]
    seed: int
    records: tuple[DatasetRecord, ...]

    def to_json(self) -> str:
        doc = {
            "size": list(self.size),
            "seed": self.seed,
            "records": [
                {
                    "image": r.image,
                    "flow": r.flow,
                    "type": r.type.value,
                    "rho": list(r.rho),
                    "crop": {"x": r.crop.x, "y": r.crop.y,
                             "width": r.crop.width, "height": r.crop.height},
                    "sourceId": r.source_id,
                    "seed": r.seed,
                }
                for r in self.records
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        doc = json.loads(text)
        records = tuple(
            DatasetRecord(
                image=r["image"],
                flow=r["flow"],
                type=DistortionType(r["type"]),
                rho=tuple(r["rho"]),
                crop=CropRect(**r["crop"]),
                source_id=r["sourceId"],
                seed=r["seed"],
            )
            for r in doc["records"]
        )
        return cls(size=tuple(doc["size"]), seed=doc["seed"], records=records)


def warp_with_flow(image: ImageBuffer, flow: FlowField) -> tuple[ImageBuffer, np.ndarray]:
    """Sample ``image`` at p + F(p) for every pixel p.

    Returns the warped image and the validity mask (False where the sample
    position leaves the image or the flow itself is masked).
    """
    if (image.height, image.width) != (flow.height, flow.width):
        raise ValueError(
            f"image {image.width}x{image.height} vs flow {flow.width}x{flow.height}"
        )
    h, w = image.height, image.width
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    sx = xs + flow.vectors[..., 0]
    sy = ys + flow.vectors[..., 1]
    eps = 1e-9
    inside = (sx >= -eps) & (sx <= w - 1 + eps) & (sy >= -eps) & (sy <= h - 1 + eps)
    valid = inside & flow.valid_mask() & image.valid_mask()
    data = bilinear_lookup(image.data, sx, sy)
    data[~valid] = 0.0
    warped = ImageBuffer(np.clip(data, 0.0, 1.0), valid=None if valid.all() else valid)
    return warped, valid


def distort_image(
    src: ImageBuffer, params: DistortionParams
) -> tuple[ImageBuffer, FlowField]:
    """Distort ``src`` with the given model and return (image, ground-truth flow).

    The image and flow share one validity mask; invalid pixels are the ones
    whose source position leaves the image or hits a singular mapping.
    """
    if src.width < MIN_SOURCE_SIZE or src.height < MIN_SOURCE_SIZE:
        raise ValueError(
            f"source must be at least {MIN_SOURCE_SIZE}x{MIN_SOURCE_SIZE}, "
            f"got {src.width}x{src.height}"
        )
    flow = flow_field(params, src.width, src.height)
    warped, valid = warp_with_flow(src, flow)
    flow_out = FlowField(flow.vectors, valid=None if valid.all() else valid)
    return warped, flow_out


def _max_centered_rect(valid: np.ndarray) -> tuple[int, int]:
    """Insets (ix, iy) of the maximum-area all-valid rectangle centered on the image.

    Ties in area prefer the smaller vertical inset (the taller crop).
    """
    h, w = valid.shape
    invalid = (~valid).astype(np.int64)
    # summed-area table with a zero border: rect sums in O(1)
    sat = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(np.cumsum(invalid, axis=0), axis=1, out=sat[1:, 1:])

    def rect_clean(ix: int, iy: int) -> bool:
        x1, y1 = w - ix, h - iy
        s = sat[y1, x1] - sat[iy, x1] - sat[y1, ix] + sat[iy, ix]
        return s == 0

    best = None
    max_ix = (w - 1) // 2  # inset of the narrowest (1- or 2-wide) centered rect
    for iy in range((h - 1) // 2 + 1):
        if not rect_clean(max_ix, iy):
            continue
        if rect_clean(0, iy):
            ix = 0
        else:
            lo, hi = 0, max_ix  # invariant: lo dirty, hi clean
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if rect_clean(mid, iy):
                    hi = mid
                else:
                    lo = mid
            ix = hi
        area = (w - 2 * ix) * (h - 2 * iy)
        if best is None or area > best[0]:
            best = (area, ix, iy)
    if best is None:
        raise GenerationFailure("no all-valid centered rectangle exists")
    return best[1], best[2]


def crop_valid(
    img: ImageBuffer,
    flow: FlowField,
    output_size: tuple[int, int] | None = None,
) -> tuple[ImageBuffer, FlowField, CropRect]:
    """Crop a pair to the maximal centered all-valid rectangle.

    The image and flow are expected to share a validity mask (as produced by
    :func:`distort_image`); the intersection is used. With ``output_size``
    (width, height) the result is further center-cropped to exactly that
    size; a valid region smaller than the requested size raises
    :class:`GenerationFailure`. Flow vectors are preserved unchanged.
    """
    if (img.height, img.width) != (flow.height, flow.width):
        raise ValueError(f"image {img.width}x{img.height} vs flow {flow.width}x{flow.height}")
    h, w = img.height, img.width
    valid = img.valid_mask() & flow.valid_mask()

    if valid.all():
        ix = iy = 0
    else:
        ix, iy = _max_centered_rect(valid)
    cw, ch = w - 2 * ix, h - 2 * iy

    if output_size is not None:
        ow, oh = int(output_size[0]), int(output_size[1])
        if cw < ow or ch < oh:
            raise GenerationFailure(
                f"valid region {cw}x{ch} smaller than requested output {ow}x{oh}"
            )
        ix += (cw - ow) // 2
        iy += (ch - oh) // 2
        cw, ch = ow, oh

    rect = CropRect(x=ix, y=iy, width=cw, height=ch)
    data = img.data[iy: iy + ch, ix: ix + cw]
    vecs = flow.vectors[iy: iy + ch, ix: ix + cw]
    return ImageBuffer(data), FlowField(vecs), rect


def apply_crop(flow: FlowField, rect: CropRect) -> FlowField:
    """Restrict a flow to a crop rectangle (positions re-indexed, vectors kept)."""
    return FlowField(flow.vectors[rect.y: rect.y + rect.height,
                                  rect.x: rect.x + rect.width])


_RASTER_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def _load_sources(source_dir: str) -> list[tuple[str, ImageBuffer]]:
    names = sorted(
        n for n in os.listdir(source_dir)
        if n.lower().endswith(_RASTER_EXTENSIONS)
    )
    sources = []
    for name in names:
        path = os.path.join(source_dir, name)
        try:
            sources.append((os.path.splitext(name)[0], flowio.read_image(path)))
        except Exception as exc:  # unreadable file: skip, keep generating
            logger.warning("skipping unreadable source %s: %s", path, exc)
    return sources


def generate_dataset(
    source_dir: str,
    out_dir: str,
    per_type_count: int,
    types: tuple[DistortionType, ...] = tuple(DistortionType),
    ranges: dict[DistortionType, ParamRange] | None = None,
    seed: int = 0,
    size: tuple[int, int] = (256, 256),
) -> DatasetManifest:
    """Write a balanced distorted-image/flow dataset plus its manifest.

    Deterministic under a fixed seed: every record draws parameters from a
    stream derived from (seed, type index, record index), re-drawing up to
    ten times when the valid region cannot cover the output size before
    moving to the next source image.
    """
    ranges = ranges or default_ranges()
    sources = _load_sources(source_dir)
    if not sources:
        raise GeowarpError(f"no usable source images in {source_dir}")
    os.makedirs(out_dir, exist_ok=True)

    records = []
    for t_index, dtype in enumerate(types):
        for i in range(per_type_count):
            record_seed = int(
                np.random.SeedSequence([seed, t_index, i]).generate_state(1)[0]
            )
            rng = np.random.default_rng(record_seed)
            produced = None
            src_offset = (t_index * per_type_count + i) % len(sources)
            for s in range(len(sources)):
                source_id, src = sources[(src_offset + s) % len(sources)]
                for _attempt in range(MAX_PARAM_REDRAWS):
                    params = sample_params(dtype, ranges[dtype], rng)
                    try:
                        img, flow = distort_image(src, params)
                        cropped_img, cropped_flow, rect = crop_valid(img, flow, size)
                    except GenerationFailure:
                        continue
                    produced = (source_id, params, cropped_img, cropped_flow, rect)
                    break
                if produced:
                    break
            if produced is None:
                raise GenerationFailure(
                    f"could not generate a {size[0]}x{size[1]} {dtype.value} sample "
                    f"from any source after {MAX_PARAM_REDRAWS} parameter draws each"
                )
            source_id, params, cropped_img, cropped_flow, rect = produced
            image_name = f"{dtype.value}_{i:04d}.png"
            flow_name = f"{dtype.value}_{i:04d}.flo"
            flowio.write_image(os.path.join(out_dir, image_name), cropped_img)
            flowio.write_flow(os.path.join(out_dir, flow_name), cropped_flow)
            records.append(
                DatasetRecord(
                    image=image_name,
                    flow=flow_name,
                    type=dtype,
                    rho=params.rho,
                    crop=rect,
                    source_id=source_id,
                    seed=record_seed,
                )
            )

    manifest = DatasetManifest(size=tuple(size), seed=seed, records=tuple(records))
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        fh.write(manifest.to_json())
    return manifest
