"""The six parametric distortion models: point mapping, dense flow generation,
per-pixel parameter inversion, and parameter sampling.

Parametrizations, in centered normalized coordinates (u, v) with
r^2 = u^2 + v^2 (the wave model works directly in pixel coordinates):

* barrel / pincushion (single-parameter division model):
  (u, v) / (1 + k * r^2), with k < 0 for barrel and k > 0 for pincushion
* rotation (angle in degrees, positive turns (1, 0) toward (0, -1)):
  (u*cos + v*sin, -u*sin + v*cos)
* shear (horizontal): (u + s*v, v)
* perspective (two-parameter tilt): (u, v) / (1 + a*u + b*v)
* wave (horizontal sinusoid, pixel units): (x + A*sin(2*pi*y/T), y)

A mapping sends the position of a pixel in the distorted image to its
corrected position; dense flows record that displacement in pixel units.
Parameter ranges bound random draws and Hough voting; the model math itself
is defined for any structurally valid parameter vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import FlowField, GeowarpError, NormalizedCoords

# Denominators at or below this magnitude make the division/perspective
# mapping singular for that point.
SINGULAR_DENOMINATOR = 1e-6

# Degeneracy guard for per-pixel inversion, in normalized units.
DEGENERACY_EPS = 1e-6


class SingularMapping(GeowarpError):
    """The model denominator vanished at the requested point."""


class UninformativePixel(GeowarpError):
    """This pixel position carries no information about the parameter."""


class DistortionType(Enum):
    """The six supported distortion families (order fixes ranking tie-breaks)."""

    BARREL = "barrel"
    PINCUSHION = "pincushion"
    ROTATION = "rotation"
    SHEAR = "shear"
    PERSPECTIVE = "perspective"
    WAVE = "wave"


_PARAM_COUNT = {
    DistortionType.BARREL: 1,
    DistortionType.PINCUSHION: 1,
    DistortionType.ROTATION: 1,
    DistortionType.SHEAR: 1,
    DistortionType.PERSPECTIVE: 2,
    DistortionType.WAVE: 2,
}

TYPE_ORDER = tuple(DistortionType)


@dataclass(frozen=True)
class DistortionParams:
    """A distortion family together with its parameter vector.

    ``rho`` has one component for barrel/pincushion/rotation/shear and two
    for perspective (a, b) and wave (amplitude px, period px). Zero
    parameters (amplitude 0 for wave) always denote the identity mapping.
    Sign constraints: barrel k <= 0, pincushion k >= 0, wave amplitude >= 0
    and period > 0.
    """

    type: DistortionType
    rho: tuple[float, ...]

    def __post_init__(self):
        rho = tuple(float(r) for r in np.atleast_1d(np.asarray(self.rho, dtype=np.float64)))
        n = _PARAM_COUNT[self.type]
        if len(rho) != n:
            raise ValueError(f"{self.type.value} expects {n} parameter(s), got {len(rho)}")
        if not all(np.isfinite(rho)):
            raise ValueError(f"parameters must be finite, got {rho}")
        if self.type is DistortionType.BARREL and rho[0] > 0:
            raise ValueError(f"barrel coefficient must be <= 0, got {rho[0]}")
        if self.type is DistortionType.PINCUSHION and rho[0] < 0:
            raise ValueError(f"pincushion coefficient must be >= 0, got {rho[0]}")
        if self.type is DistortionType.WAVE:
            if rho[0] < 0:
                raise ValueError(f"wave amplitude must be >= 0, got {rho[0]}")
            if rho[1] <= 0:
                raise ValueError(f"wave period must be > 0, got {rho[1]}")
        object.__setattr__(self, "rho", rho)


@dataclass(frozen=True)
class ParamRange:
    """Per-component parameter bounds.

    ``lo``/``hi`` bound Hough voting and fitted results; ``sample_lo``/
    ``sample_hi`` bound random draws. For barrel, pincushion and the wave
    amplitude the sampling interval excludes a dead zone next to the
    identity so that synthesized distortions are always visible, while the
    voting range still reaches the identity (a fitted parameter of exactly
    zero is legitimate, e.g. for an undistorted input).
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    sample_lo: tuple[float, ...]
    sample_hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        slo = tuple(float(v) for v in self.sample_lo)
        shi = tuple(float(v) for v in self.sample_hi)
        if not (len(lo) == len(hi) == len(slo) == len(shi)):
            raise ValueError("range component counts differ")
        for l, h, sl, sh in zip(lo, hi, slo, shi):
            if not (l < h):
                raise ValueError(f"range must satisfy min < max, got [{l}, {h}]")
            if not (l <= sl < sh <= h):
                raise ValueError(f"sampling range [{sl}, {sh}] must sit inside [{l}, {h}]")
        for name, val in (("lo", lo), ("hi", hi), ("sample_lo", slo), ("sample_hi", shi)):
            object.__setattr__(self, name, val)

    @property
    def dims(self) -> int:
        return len(self.lo)

    def cell_width(self, cells: int) -> tuple[float, ...]:
        return tuple((h - l) / cells for l, h in zip(self.lo, self.hi))


def default_ranges() -> dict[DistortionType, ParamRange]:
    """Default parameter ranges producing visible but correctable distortions."""
    return {
        DistortionType.BARREL: ParamRange((-0.4,), (0.0,), (-0.4,), (-0.05,)),
        DistortionType.PINCUSHION: ParamRange((0.0,), (0.4,), (0.05,), (0.4,)),
        DistortionType.ROTATION: ParamRange((-30.0,), (30.0,), (-30.0,), (30.0,)),
        DistortionType.SHEAR: ParamRange((-0.4,), (0.4,), (-0.4,), (0.4,)),
        DistortionType.PERSPECTIVE: ParamRange(
            (-0.3, -0.3), (0.3, 0.3), (-0.3, -0.3), (0.3, 0.3)
        ),
        DistortionType.WAVE: ParamRange((0.0, 20.0), (8.0, 100.0), (2.0, 20.0), (8.0, 100.0)),
    }


def sample_params(
    type: DistortionType,
    ranges: ParamRange | None = None,
    rng: np.random.Generator | int | None = None,
) -> DistortionParams:
    """Draw a parameter vector uniformly from the sampling range.

    Deterministic for a fixed integer seed; pass a Generator to share a
    stream across draws.
    """
    if ranges is None:
        ranges = default_ranges()[type]
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    rho = tuple(
        float(gen.uniform(sl, sh)) for sl, sh in zip(ranges.sample_lo, ranges.sample_hi)
    )
    return DistortionParams(type, rho)


def _corrected_positions(params: DistortionParams, xs, ys, geom: NormalizedCoords):
    """Vectorized forward mapping of pixel positions.

    Returns (x2, y2, valid): the corrected positions in pixel units and a
    mask that is False where the mapping is singular (x2/y2 are zero-filled
    there).
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    t = params.type

    if t is DistortionType.WAVE:
        amp, period = params.rho
        x2 = xs + amp * np.sin(2.0 * np.pi * ys / period)
        return x2, ys.copy(), np.ones(xs.shape, dtype=bool)

    u, v = geom.to_normalized(xs, ys)
    valid = np.ones(u.shape, dtype=bool)

    if t in (DistortionType.BARREL, DistortionType.PINCUSHION):
        k = params.rho[0]
        denom = 1.0 + k * (u * u + v * v)
        valid = np.abs(denom) > SINGULAR_DENOMINATOR
        safe = np.where(valid, denom, 1.0)
        u2 = np.where(valid, u / safe, 0.0)
        v2 = np.where(valid, v / safe, 0.0)
    elif t is DistortionType.ROTATION:
        th = np.deg2rad(params.rho[0])
        c, s = np.cos(th), np.sin(th)
        u2 = u * c + v * s
        v2 = -u * s + v * c
    elif t is DistortionType.SHEAR:
        s = params.rho[0]
        u2 = u + s * v
        v2 = v.copy()
    elif t is DistortionType.PERSPECTIVE:
        a, b = params.rho
        denom = 1.0 + a * u + b * v
        valid = np.abs(denom) > SINGULAR_DENOMINATOR
        safe = np.where(valid, denom, 1.0)
        u2 = np.where(valid, u / safe, 0.0)
        v2 = np.where(valid, v / safe, 0.0)
    else:  # pragma: no cover
        raise ValueError(f"unknown distortion type {t}")

    x2, y2 = geom.to_pixels(u2, v2)
    x2 = np.where(valid, x2, 0.0)
    y2 = np.where(valid, y2, 0.0)
    return x2, y2, valid


def forward_map(
    params: DistortionParams, p, geom: NormalizedCoords
) -> tuple[float, float]:
    """Corrected position of a single distorted-image point p = (x, y).

    Raises :class:`SingularMapping` when the model denominator vanishes at p.
    """
    x2, y2, valid = _corrected_positions(
        params, np.asarray(float(p[0])), np.asarray(float(p[1])), geom
    )
    if not bool(valid):
        raise SingularMapping(f"{params.type.value} mapping singular at point {tuple(p)}")
    return float(x2), float(y2)


def flow_field(
    params: DistortionParams,
    width: int,
    height: int,
    geom: NormalizedCoords | None = None,
) -> FlowField:
    """Dense forward flow F(p) = forward_map(p) - p over a W x H lattice.

    Pixels hitting a singular mapping are masked invalid (their vectors are
    zero). ``geom`` defaults to the canonical centered frame for the size.
    """
    width, height = int(width), int(height)
    if width < 2 or height < 2:
        raise ValueError(f"flow grid must be at least 2x2, got {width}x{height}")
    if geom is None:
        geom = NormalizedCoords.for_image(width, height)
    xs, ys = np.meshgrid(np.arange(width, dtype=np.float64),
                         np.arange(height, dtype=np.float64))
    x2, y2, valid = _corrected_positions(params, xs, ys, geom)
    vec = np.empty((height, width, 2), dtype=np.float64)
    vec[..., 0] = np.where(valid, x2 - xs, 0.0)
    vec[..., 1] = np.where(valid, y2 - ys, 0.0)
    return FlowField(vec, valid=None if valid.all() else valid)


def _invert_scalar_grid(type: DistortionType, u, v, du, dv):
    """Vectorized single-parameter inversion in normalized coordinates.

    ``(du, dv)`` is the normalized displacement; returns (estimates, usable).
    """
    if type in (DistortionType.BARREL, DistortionType.PINCUSHION):
        rd = np.hypot(u, v)
        ru = np.hypot(u + du, v + dv)
        usable = (rd > DEGENERACY_EPS) & (ru > DEGENERACY_EPS)
        rd_safe = np.where(usable, rd, 1.0)
        ru_safe = np.where(usable, ru, 1.0)
        est = (rd_safe / ru_safe - 1.0) / (rd_safe * rd_safe)
    elif type is DistortionType.ROTATION:
        u2, v2 = u + du, v + dv
        usable = np.hypot(u, v) > DEGENERACY_EPS
        est = np.degrees(np.arctan2(v * u2 - u * v2, u * u2 + v * v2))
    elif type is DistortionType.SHEAR:
        usable = np.abs(v) > DEGENERACY_EPS
        est = du / np.where(usable, v, 1.0)
    else:
        raise ValueError(f"{type.value} is not a single-parameter model")
    return np.where(usable, est, 0.0), usable


def invert_pixel(
    type: DistortionType, position, vec, geom: NormalizedCoords
) -> list[float]:
    """Parameter information carried by one flow vector.

    For the single-parameter models the return value is ``[estimate]``: the
    unique parameter consistent with this displacement. The two-parameter
    models cannot be pinned down by one pixel, so the per-pixel constraint
    data is returned instead and solved jointly with a paired pixel by the
    fitting module:

    * perspective: ``[cu, cv, rhs]`` with the linear constraint
      cu * a + cv * b = rhs in normalized coordinates;
    * wave: ``[y, fx]``, the data of amplitude * sin(2*pi*y/period) = fx.

    Raises :class:`UninformativePixel` at degenerate positions (image
    center for radial/rotation models, the |v| < eps row for shear).
    """
    x, y = float(position[0]), float(position[1])
    fx, fy = float(vec[0]), float(vec[1])
    if not (np.isfinite(fx) and np.isfinite(fy)):
        raise ValueError(f"flow vector must be finite, got ({fx}, {fy})")

    if type is DistortionType.WAVE:
        return [y, fx]

    u, v = geom.to_normalized(x, y)
    du, dv = fx / geom.scale, fy / geom.scale

    if type is DistortionType.PERSPECTIVE:
        u2, v2 = u + du, v + dv
        m2 = u2 * u2 + v2 * v2
        if m2 <= DEGENERACY_EPS * DEGENERACY_EPS:
            raise UninformativePixel(f"corrected position of ({x}, {y}) is the center")
        d = (u * u2 + v * v2) / m2
        return [float(u), float(v), float(d - 1.0)]

    est, usable = _invert_scalar_grid(
        type, np.asarray(u), np.asarray(v), np.asarray(du), np.asarray(dv)
    )
    if not bool(usable):
        raise UninformativePixel(f"pixel ({x}, {y}) is degenerate for {type.value}")
    return [float(est)]
