"""Hough-transform model fitting: flow vectors are mapped into parameter
space, voted over a uniform cell grid, and the winning cell's sample mean
becomes the fitted parameter. Voting makes the fit robust to outliers: wild
estimates either leave the parameter range (discarded) or scatter thinly
across cells while consistent pixels pile into one.

Single-parameter models invert each non-degenerate pixel independently
(a 1D vote). The two-parameter models need two pixels per estimate:

* perspective pairs each pixel with the one 8 px to its right and solves
  the two linear constraints for (a, b);
* wave pairs each pixel with the one 8 px below (its flow varies only with
  y, so a horizontal pair would be degenerate) and solves the pair's
  transcendental system amplitude*sin(w*y) = fx by scanning the angular
  frequency range for sign changes and bisecting each bracketed root; all
  in-range roots are voted, and only the physical one accumulates.

Estimates outside the parameter range are discarded rather than clamped
(clamping would bias the boundary cells).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import FlowField, GeowarpError, NormalizedCoords, epe
from .models import (
    DEGENERACY_EPS,
    DistortionParams,
    DistortionType,
    ParamRange,
    TYPE_ORDER,
    _invert_scalar_grid,
    default_ranges,
    flow_field,
)

DEFAULT_CELLS = 100
MIN_ESTIMATES = 100

# Pixel offset between the members of a two-parameter estimation pair.
PAIR_OFFSET = 8

# Pairs whose 2x2 perspective system has |det| below this are skipped.
_PAIR_DET_EPS = 1e-4

# Wave pairs where both flow components are this small carry no wave
# information (they are consistent with zero amplitude at any period).
_ZERO_MOTION_EPS = 1e-9

_WAVE_BISECT_ITERS = 16


class InsufficientData(GeowarpError):
    """Fewer usable parameter estimates than the voting minimum."""


class Unidentifiable(GeowarpError):
    """No distortion family could be fitted to the flow."""


@dataclass
class HoughAccumulator:
    """k-dimensional (k <= 2) histogram over parameter space.

    Tracks per-cell vote counts and per-cell sums of the voted parameter
    samples so the winning cell can report its sample mean. Values exactly
    at the upper bound land in the last cell; values outside [lo, hi] are
    discarded.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    cells: int = DEFAULT_CELLS
    counts: np.ndarray = field(init=False)
    sums: np.ndarray = field(init=False)

    def __post_init__(self):
        self.lo = tuple(float(v) for v in self.lo)
        self.hi = tuple(float(v) for v in self.hi)
        if not 1 <= len(self.lo) <= 2 or len(self.lo) != len(self.hi):
            raise ValueError("accumulator supports 1 or 2 dimensions")
        if self.cells < 1:
            raise ValueError(f"cell count must be >= 1, got {self.cells}")
        shape = (self.cells,) * len(self.lo)
        self.counts = np.zeros(shape, dtype=np.int64)
        self.sums = np.zeros(shape + (len(self.lo),), dtype=np.float64)

    @property
    def dims(self) -> int:
        return len(self.lo)

    def add(self, points: np.ndarray) -> int:
        """Vote parameter samples; returns how many fell inside the range."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[1] != self.dims:
            raise ValueError(f"expected {self.dims}-component points, got {pts.shape}")
        lo = np.array(self.lo)
        hi = np.array(self.hi)
        inside = np.all((pts >= lo) & (pts <= hi), axis=1)
        pts = pts[inside]
        if pts.size == 0:
            return 0
        width = (hi - lo) / self.cells
        idx = np.minimum(((pts - lo) / width).astype(np.int64), self.cells - 1)
        if self.dims == 1:
            np.add.at(self.counts, idx[:, 0], 1)
            np.add.at(self.sums, idx[:, 0], pts)
        else:
            np.add.at(self.counts, (idx[:, 0], idx[:, 1]), 1)
            np.add.at(self.sums, (idx[:, 0], idx[:, 1]), pts)
        return int(pts.shape[0])

    def _cell_centers(self, flat_idx: np.ndarray) -> np.ndarray:
        lo = np.array(self.lo)
        width = (np.array(self.hi) - lo) / self.cells
        idx = np.stack(np.unravel_index(flat_idx, self.counts.shape), axis=-1)
        return lo + (idx + 0.5) * width

    def best_cell(self) -> tuple[tuple[int, ...], int]:
        """Winning cell index and its vote count.

        Ties prefer the cell whose center has the smaller parameter
        magnitude, then the first in row-major order, so results are
        deterministic and independent of vote arrival order.
        """
        flat = self.counts.ravel()
        top = int(flat.max())
        tied = np.flatnonzero(flat == top)
        if tied.size > 1:
            mags = np.linalg.norm(self._cell_centers(tied), axis=-1)
            tied = tied[np.lexsort((tied, mags))]
        winner = int(tied[0])
        return np.unravel_index(winner, self.counts.shape), top

    def cell_mean(self, cell: tuple[int, ...]) -> tuple[float, ...]:
        count = self.counts[cell]
        if count == 0:
            raise ValueError("cannot average an empty cell")
        return tuple(float(v) for v in self.sums[cell] / count)


@dataclass(frozen=True)
class FitResult:
    """Outcome of fitting one distortion family to a flow."""

    type: DistortionType
    rho: tuple[float, ...]
    votes: int
    inlier_fraction: float
    refit_epe: float

    def params(self) -> DistortionParams:
        return DistortionParams(self.type, self.rho)


def _normalized_grids(flow: FlowField, geom: NormalizedCoords):
    h, w = flow.height, flow.width
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    u, v = geom.to_normalized(xs, ys)
    du = flow.vectors[..., 0] / geom.scale
    dv = flow.vectors[..., 1] / geom.scale
    return u, v, du, dv


def _scalar_estimates(flow: FlowField, type: DistortionType, geom: NormalizedCoords):
    u, v, du, dv = _normalized_grids(flow, geom)
    est, usable = _invert_scalar_grid(type, u, v, du, dv)
    usable = usable & flow.valid_mask()
    return est[usable].reshape(-1, 1)


def _perspective_estimates(flow: FlowField, geom: NormalizedCoords):
    """Point estimates of (a, b) from horizontally paired pixel constraints.

    Each usable pixel contributes the linear constraint u*a + v*b = D - 1
    with D the least-squares scale between its position and corrected
    position; pairs with a well-conditioned 2x2 system yield one estimate.
    """
    u, v, du, dv = _normalized_grids(flow, geom)
    u2, v2 = u + du, v + dv
    m2 = u2 * u2 + v2 * v2
    usable = (m2 > DEGENERACY_EPS * DEGENERACY_EPS) & flow.valid_mask()
    d = (u * u2 + v * v2) / np.where(usable, m2, 1.0)
    rhs = d - 1.0

    off = PAIR_OFFSET
    if flow.width <= off:
        return np.empty((0, 2))
    ok = usable[:, :-off] & usable[:, off:]
    u1, v1, r1 = u[:, :-off][ok], v[:, :-off][ok], rhs[:, :-off][ok]
    u2p, v2p, r2 = u[:, off:][ok], v[:, off:][ok], rhs[:, off:][ok]
    det = u1 * v2p - u2p * v1
    good = np.abs(det) > _PAIR_DET_EPS
    det = det[good]
    a = (r1[good] * v2p[good] - r2[good] * v1[good]) / det
    b = (u1[good] * r2[good] - u2p[good] * r1[good]) / det
    return np.stack([a, b], axis=1)


def _wave_estimates(flow: FlowField, lo, hi):
    """(amplitude, period) estimates from vertically paired pixels.

    For the pair system f1 = A sin(w y1), f2 = A sin(w y2) with
    w = 2*pi/period, every sign change of g(w) = f1 sin(w y2) - f2 sin(w y1)
    over the period range is bisected to a root and voted; amplitudes come
    from the component with the larger |sin|. Returns (estimates, n_zero,
    n_pairs): zero-motion pairs are counted but vote nothing.
    """
    fx = flow.vectors[..., 0]
    h = flow.height
    off = PAIR_OFFSET
    if h <= off:
        return np.empty((0, 2)), 0, 0
    mask = flow.valid_mask()
    ok = mask[:-off, :] & mask[off:, :]
    y1 = np.broadcast_to(np.arange(h - off, dtype=np.float64)[:, None], ok.shape)[ok]
    f1 = fx[:-off, :][ok]
    f2 = fx[off:, :][ok]
    y2 = y1 + off
    n_pairs = y1.size
    still = np.maximum(np.abs(f1), np.abs(f2)) < _ZERO_MOTION_EPS
    n_zero = int(still.sum())
    y1, y2, f1, f2 = y1[~still], y2[~still], f1[~still], f2[~still]
    if y1.size == 0:
        return np.empty((0, 2)), n_zero, n_pairs

    w_lo = 2.0 * np.pi / hi[1]
    w_hi = 2.0 * np.pi / lo[1] if lo[1] > 0 else 2.0 * np.pi / (hi[1] / DEFAULT_CELLS)
    y_max = float(y2.max())
    scans = max(64, int(np.ceil((w_hi - w_lo) * y_max / np.pi * 2.5)))
    ws = np.linspace(w_lo, w_hi, scans + 1)

    est_a = []
    est_t = []
    chunk = 16384
    for start in range(0, y1.size, chunk):
        sl = slice(start, start + chunk)
        cy1, cy2, cf1, cf2 = y1[sl], y2[sl], f1[sl], f2[sl]
        g = (cf1[:, None] * np.sin(np.outer(cy2, ws))
             - cf2[:, None] * np.sin(np.outer(cy1, ws)))
        sign_change = (g[:, :-1] * g[:, 1:] <= 0) & ~((g[:, :-1] == 0) & (g[:, 1:] == 0))
        pair_idx, w_idx = np.nonzero(sign_change)
        if pair_idx.size == 0:
            continue
        wa = ws[w_idx].copy()
        wb = ws[w_idx + 1].copy()
        ry1, ry2 = cy1[pair_idx], cy2[pair_idx]
        rf1, rf2 = cf1[pair_idx], cf2[pair_idx]

        # cheap amplitude bound at the bracket ends: roots that would imply
        # an amplitude far outside the range cannot win and are not bisected
        amp_cap = 2.5 * max(abs(hi[0]), abs(lo[0]))
        keep = np.zeros(wa.shape, dtype=bool)
        for wend in (wa, wb):
            s1 = np.sin(wend * ry1)
            s2 = np.sin(wend * ry2)
            s_best = np.where(np.abs(s1) >= np.abs(s2), s1, s2)
            f_best = np.where(np.abs(s1) >= np.abs(s2), rf1, rf2)
            with np.errstate(divide="ignore", invalid="ignore"):
                amp_end = np.abs(f_best) / np.abs(s_best)
            keep |= (np.abs(s_best) > 1e-9) & (amp_end <= amp_cap)
        wa, wb = wa[keep], wb[keep]
        ry1, ry2, rf1, rf2 = ry1[keep], ry2[keep], rf1[keep], rf2[keep]
        if wa.size == 0:
            continue
        ga = rf1 * np.sin(wa * ry2) - rf2 * np.sin(wa * ry1)
        for _ in range(_WAVE_BISECT_ITERS):
            wm = 0.5 * (wa + wb)
            gm = rf1 * np.sin(wm * ry2) - rf2 * np.sin(wm * ry1)
            left = ga * gm > 0
            wa = np.where(left, wm, wa)
            ga = np.where(left, gm, ga)
            wb = np.where(left, wb, wm)
        w_root = 0.5 * (wa + wb)
        s1 = np.sin(w_root * ry1)
        s2 = np.sin(w_root * ry2)
        use_first = np.abs(s1) >= np.abs(s2)
        s_best = np.where(use_first, s1, s2)
        f_best = np.where(use_first, rf1, rf2)
        informative = np.abs(s_best) > 1e-6
        amp = f_best[informative] / s_best[informative]
        est_a.append(amp)
        est_t.append(2.0 * np.pi / w_root[informative])

    if not est_a:
        return np.empty((0, 2)), n_zero, n_pairs
    return np.stack([np.concatenate(est_a), np.concatenate(est_t)], axis=1), n_zero, n_pairs


def hough_fit(
    flow: FlowField,
    type: DistortionType,
    ranges: ParamRange | None = None,
    cells: int = DEFAULT_CELLS,
) -> FitResult:
    """Fit one distortion family to a flow by parameter-space voting.

    Raises :class:`InsufficientData` when fewer than 100 usable in-range
    estimates exist. ``refit_epe`` measures the fitted model's flow against
    the input over the jointly valid pixels.
    """
    if ranges is None:
        ranges = default_ranges()[type]
    geom = NormalizedCoords.for_image(flow.width, flow.height)

    if type is DistortionType.PERSPECTIVE:
        estimates = _perspective_estimates(flow, geom)
    elif type is DistortionType.WAVE:
        estimates, n_zero, n_pairs = _wave_estimates(flow, ranges.lo, ranges.hi)
        if n_pairs > 0 and n_zero >= max(MIN_ESTIMATES, n_pairs // 2):
            # A still flow is the zero-amplitude wave; the period is moot.
            rho = (0.0, 0.5 * (ranges.lo[1] + ranges.hi[1]))
            refit = epe(flow, flow_field(DistortionParams(type, rho), flow.width, flow.height))
            return FitResult(type, rho, votes=n_zero,
                             inlier_fraction=n_zero / n_pairs, refit_epe=refit)
    else:
        estimates = _scalar_estimates(flow, type, geom)

    acc = HoughAccumulator(ranges.lo, ranges.hi, cells)
    voted = acc.add(estimates) if estimates.size else 0
    if voted < MIN_ESTIMATES:
        raise InsufficientData(
            f"{type.value}: only {voted} usable estimates (need {MIN_ESTIMATES})"
        )
    cell, votes = acc.best_cell()
    rho = acc.cell_mean(cell)
    refit = epe(flow, flow_field(DistortionParams(type, rho), flow.width, flow.height))
    return FitResult(type, rho, votes=votes,
                     inlier_fraction=votes / voted, refit_epe=refit)


def refine_flow(fit: FitResult, width: int, height: int) -> FlowField:
    """Regenerate the fitted model's smooth flow at any resolution.

    Fitting can therefore run on a small flow and the full-resolution flow
    be produced directly from the parameters.
    """
    return flow_field(fit.params(), width, height)


def identify_model(
    flow: FlowField,
    ranges: dict[DistortionType, ParamRange] | None = None,
    cells: int = DEFAULT_CELLS,
) -> list[FitResult]:
    """Fit all six families and rank them by refit error.

    The first element is the identified type. Exact ties keep the fixed
    family order (barrel, pincushion, rotation, shear, perspective, wave);
    families without enough usable estimates are omitted. Raises
    :class:`Unidentifiable` when every family fails.
    """
    if ranges is None:
        ranges = default_ranges()
    results = []
    for t in TYPE_ORDER:
        try:
            results.append(hough_fit(flow, t, ranges[t], cells))
        except InsufficientData:
            continue
    if not results:
        raise Unidentifiable("no distortion family yielded enough estimates")
    order = {t: i for i, t in enumerate(TYPE_ORDER)}
    results.sort(key=lambda r: (r.refit_epe, order[r.type]))
    return results
