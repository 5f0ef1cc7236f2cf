import numpy as np
import pytest

from geowarp.core import FlowField, epe
from geowarp.fitting import (
    HoughAccumulator,
    InsufficientData,
    Unidentifiable,
    hough_fit,
    identify_model,
    refine_flow,
)
from geowarp.models import (
    DistortionParams,
    DistortionType,
    default_ranges,
    flow_field,
    sample_params,
)

RANGES = default_ranges()


def corrupt(flow: FlowField, fraction: float, rng, span=20.0) -> FlowField:
    """Replace a fraction of vectors with uniform noise in [-span, span]^2."""
    vec = flow.vectors.copy()
    n = vec.shape[0] * vec.shape[1]
    k = int(fraction * n)
    idx = rng.choice(n, k, replace=False)
    vec.reshape(-1, 2)[idx] = rng.uniform(-span, span, (k, 2))
    return FlowField(vec, valid=flow.valid)


class TestAccumulator:
    def test_votes_land_in_cells(self):
        acc = HoughAccumulator((0.0,), (10.0,), cells=10)
        n = acc.add(np.array([[0.5], [1.5], [1.7], [9.99], [10.0], [11.0], [-0.1]]))
        assert n == 5  # two out-of-range points discarded
        assert acc.counts[0] == 1 and acc.counts[1] == 2
        assert acc.counts[9] == 2  # 9.99 and the exact upper bound
        cell, votes = acc.best_cell()
        assert votes == 2

    def test_tie_break_prefers_lower_magnitude(self):
        acc = HoughAccumulator((-1.0,), (1.0,), cells=4)
        acc.add(np.array([[-0.9], [-0.8], [0.3], [0.4]]))  # cells 0 and 2 tie at 2
        cell, votes = acc.best_cell()
        assert votes == 2
        assert cell == (2,)  # |center 0.25| < |center -0.75|

    def test_cell_mean(self):
        acc = HoughAccumulator((0.0, 0.0), (1.0, 1.0), cells=2)
        acc.add(np.array([[0.1, 0.2], [0.3, 0.4]]))
        cell, _ = acc.best_cell()
        assert acc.cell_mean(cell) == pytest.approx((0.2, 0.3))

    def test_two_dims_max(self):
        with pytest.raises(ValueError):
            HoughAccumulator((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


class TestHoughFit:
    @pytest.mark.parametrize("t,rho", [
        (DistortionType.BARREL, (-0.22,)),
        (DistortionType.PINCUSHION, (0.13,)),
        (DistortionType.ROTATION, (10.0,)),
        (DistortionType.SHEAR, (-0.27,)),
        (DistortionType.PERSPECTIVE, (0.21, -0.09)),
        (DistortionType.WAVE, (4.5, 37.0)),
    ])
    def test_noiseless_recovery_within_half_cell(self, t, rho):
        f = flow_field(DistortionParams(t, rho), 128, 128)
        fit = hough_fit(f, t, RANGES[t])
        half = np.array(RANGES[t].cell_width(100)) / 2
        assert (np.abs(np.array(fit.rho) - np.array(rho)) <= half).all()
        # wave period recovery is limited by root-bisection precision
        assert fit.refit_epe < (1e-4 if t is DistortionType.WAVE else 1e-6)
        assert 0.0 <= fit.inlier_fraction <= 1.0

    def test_rotation_recovery_within_documented_tolerance(self):
        f = flow_field(DistortionParams(DistortionType.ROTATION, (10.0,)), 256, 256)
        fit = hough_fit(f, DistortionType.ROTATION)
        assert abs(fit.rho[0] - 10.0) < 0.3

    def test_zero_flow_shear_fits_zero(self):
        f = FlowField(np.zeros((128, 128, 2)))
        fit = hough_fit(f, DistortionType.SHEAR)
        assert fit.rho == (0.0,)
        assert fit.refit_epe == 0.0

    def test_zero_flow_wave_fits_zero_amplitude(self):
        f = FlowField(np.zeros((128, 128, 2)))
        fit = hough_fit(f, DistortionType.WAVE)
        assert fit.rho[0] == 0.0
        assert fit.refit_epe == 0.0

    def test_corrupt_and_recover_barrel(self, rng):
        truth = DistortionParams(DistortionType.BARREL, (-0.2,))
        clean = flow_field(truth, 256, 256)
        noisy = corrupt(clean, 0.10, rng)
        fit = hough_fit(noisy, DistortionType.BARREL)
        cell = RANGES[DistortionType.BARREL].cell_width(100)[0]
        assert abs(fit.rho[0] + 0.2) <= cell
        # refit error vs the noisy input exceeds the clean-model refit error (0)
        assert fit.refit_epe > 0.0
        refined = refine_flow(fit, 256, 256)
        assert epe(refined, clean) < epe(noisy, clean)

    def test_outliers_discarded_out_of_range(self, rng):
        truth = DistortionParams(DistortionType.ROTATION, (-12.0,))
        noisy = corrupt(flow_field(truth, 128, 128), 0.20, rng)
        fit = hough_fit(noisy, DistortionType.ROTATION)
        cell = RANGES[DistortionType.ROTATION].cell_width(100)[0]
        assert abs(fit.rho[0] + 12.0) <= cell

    def test_insufficient_data(self):
        f = FlowField(np.zeros((8, 8, 2)))  # 64 pixels < 100 estimates
        with pytest.raises(InsufficientData):
            hough_fit(f, DistortionType.ROTATION)

    def test_masked_pixels_excluded(self, rng):
        truth = DistortionParams(DistortionType.SHEAR, (0.2,))
        clean = flow_field(truth, 64, 64)
        vec = clean.vectors.copy()
        mask = np.ones((64, 64), bool)
        mask[:16] = False
        vec[:16] = 999.0  # junk that must be ignored
        fit = hough_fit(FlowField(vec, valid=mask), DistortionType.SHEAR)
        assert abs(fit.rho[0] - 0.2) < 0.004


class TestRefineFlow:
    def test_same_size_exact_fit_epe_zero(self):
        truth = DistortionParams(DistortionType.ROTATION, (10.0,))
        f = flow_field(truth, 64, 64)
        fit = hough_fit(f, DistortionType.ROTATION)
        refined = refine_flow(fit, 64, 64)
        assert epe(refined, f) < 1e-9

    def test_cross_resolution_refinement(self):
        truth = DistortionParams(DistortionType.ROTATION, (10.0,))
        small = flow_field(truth, 64, 64)
        fit = hough_fit(small, DistortionType.ROTATION)
        refined = refine_flow(fit, 256, 256)
        target = flow_field(truth, 256, 256)
        assert epe(refined, target) < 0.5

    def test_refined_beats_noisy_input(self, rng):
        truth = DistortionParams(DistortionType.BARREL, (-0.2,))
        clean = flow_field(truth, 256, 256)
        noisy = corrupt(clean, 0.10, rng)
        fit = hough_fit(noisy, DistortionType.BARREL)
        assert epe(refine_flow(fit, 256, 256), clean) < epe(noisy, clean)


class TestScaleConsistency:
    @pytest.mark.parametrize("t,rho", [
        (DistortionType.BARREL, (-0.18,)),
        (DistortionType.PINCUSHION, (0.3,)),
        (DistortionType.ROTATION, (-21.0,)),
        (DistortionType.SHEAR, (0.33,)),
        (DistortionType.PERSPECTIVE, (-0.12, 0.22)),
        (DistortionType.WAVE, (5.0, 30.0)),
    ])
    def test_fit_agrees_across_resolutions(self, t, rho):
        fits = [hough_fit(flow_field(DistortionParams(t, rho), n, n), t, RANGES[t])
                for n in (64, 256)]
        cell = np.array(RANGES[t].cell_width(100))
        assert (np.abs(np.array(fits[0].rho) - np.array(fits[1].rho)) <= cell).all()


class TestIdentifyModel:
    def test_generated_shear_identified(self):
        f = flow_field(DistortionParams(DistortionType.SHEAR, (0.2,)), 128, 128)
        ranked = identify_model(f)
        assert ranked[0].type is DistortionType.SHEAR
        assert ranked[0].refit_epe < 1e-6

    def test_zero_flow_ties_broken_by_type_order(self):
        ranked = identify_model(FlowField(np.zeros((128, 128, 2))))
        assert [r.type for r in ranked[:2]] == [DistortionType.BARREL,
                                                DistortionType.PINCUSHION]
        assert all(r.refit_epe < 1e-9 for r in ranked)

    def test_pincushion_with_outliers_identified(self, rng):
        clean = flow_field(DistortionParams(DistortionType.PINCUSHION, (0.25,)), 128, 128)
        noisy = corrupt(clean, 0.05, rng)
        ranked = identify_model(noisy)
        assert ranked[0].type is DistortionType.PINCUSHION

    def test_unidentifiable_when_everything_fails(self):
        with pytest.raises(Unidentifiable):
            identify_model(FlowField(np.zeros((6, 6, 2))))
