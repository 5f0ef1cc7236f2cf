import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geowarp.core import (
    DimensionMismatch,
    FlowField,
    ImageBuffer,
    NormalizedCoords,
    OutOfBounds,
    epe,
    sample_flow_bilinear,
    scale_flow,
)


def const_flow(h, w, fx, fy):
    vec = np.empty((h, w, 2))
    vec[..., 0] = fx
    vec[..., 1] = fy
    return FlowField(vec)


class TestContainers:
    def test_image_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            ImageBuffer(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            ImageBuffer(np.zeros((4, 4, 2)))

    def test_image_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            ImageBuffer(np.full((2, 2, 3), 1.5))
        with pytest.raises(ValueError):
            ImageBuffer(np.full((2, 2, 3), np.nan))

    def test_flow_rejects_non_finite(self):
        vec = np.zeros((2, 2, 2))
        vec[0, 0, 0] = np.inf
        with pytest.raises(ValueError):
            FlowField(vec)

    def test_arrays_frozen(self):
        f = const_flow(2, 2, 1.0, 0.0)
        with pytest.raises(ValueError):
            f.vectors[0, 0, 0] = 5.0
        img = ImageBuffer(np.zeros((2, 2, 3)))
        with pytest.raises(ValueError):
            img.data[0, 0, 0] = 0.5

    def test_mask_shape_checked(self):
        with pytest.raises(DimensionMismatch):
            FlowField(np.zeros((2, 3, 2)), valid=np.ones((3, 2), bool))

    def test_normalized_coords(self):
        g = NormalizedCoords.for_image(256, 128)
        assert g.cx == 127.5 and g.cy == 63.5 and g.scale == 128.0
        u, v = g.to_normalized(127.5, 63.5)
        assert u == 0.0 and v == 0.0
        x, y = g.to_pixels(1.0, -1.0)
        assert x == 255.5 and y == -64.5
        with pytest.raises(ValueError):
            NormalizedCoords(0.0, 0.0, 0.0)


class TestEpe:
    def test_identity_is_zero(self, rng):
        f = FlowField(rng.standard_normal((9, 7, 2)))
        assert epe(f, f) == 0.0

    def test_three_four_five(self):
        a = const_flow(6, 5, 0.0, 0.0)
        b = const_flow(6, 5, 3.0, 4.0)
        assert epe(a, b) == pytest.approx(5.0, abs=0)

    def test_matches_double_loop_oracle(self, rng):
        a = FlowField(rng.standard_normal((16, 16, 2)))
        b = FlowField(rng.standard_normal((16, 16, 2)))
        total = 0.0
        for y in range(16):
            for x in range(16):
                dx = a.vectors[y, x, 0] - b.vectors[y, x, 0]
                dy = a.vectors[y, x, 1] - b.vectors[y, x, 1]
                total += np.sqrt(dx * dx + dy * dy)
        assert epe(a, b) == pytest.approx(total / 256, abs=1e-9)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(DimensionMismatch):
            epe(const_flow(4, 4, 0, 0), const_flow(4, 5, 0, 0))

    def test_masked_mean_over_joint_valid(self, rng):
        a = FlowField(np.zeros((4, 4, 2)))
        vec = np.zeros((4, 4, 2))
        vec[0, 0] = (3.0, 4.0)
        vec[1, 1] = (30.0, 40.0)  # masked out below
        mask = np.ones((4, 4), bool)
        mask[1, 1] = False
        b = FlowField(vec, valid=mask)
        assert epe(a, b) == pytest.approx(5.0 / 15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_metric_properties(self, seed):
        r = np.random.default_rng(seed)
        a = FlowField(r.standard_normal((5, 5, 2)))
        b = FlowField(r.standard_normal((5, 5, 2)))
        c = FlowField(r.standard_normal((5, 5, 2)))
        assert epe(a, b) == epe(b, a)
        assert epe(a, a) == 0.0
        assert epe(a, c) <= epe(a, b) + epe(b, c) + 1e-12


class TestScaleFlow:
    def test_identity(self, rng):
        f = FlowField(rng.standard_normal((5, 5, 2)))
        assert np.array_equal(scale_flow(f, 1.0).vectors, f.vectors)

    def test_reversal(self):
        f = const_flow(3, 3, 2.0, 0.0)
        g = scale_flow(f, -1.0)
        assert np.array_equal(g.vectors, -f.vectors)

    def test_elementwise_oracle(self, rng):
        f = FlowField(rng.standard_normal((8, 8, 2)))
        g = scale_flow(f, 0.5)
        assert epe(g, FlowField(f.vectors * 0.5)) == 0.0

    def test_power_of_two_roundtrip_exact(self, rng):
        f = FlowField(rng.standard_normal((6, 6, 2)))
        back = scale_flow(scale_flow(f, 4.0), 0.25)
        assert np.array_equal(back.vectors, f.vectors)

    def test_general_roundtrip_close(self, rng):
        f = FlowField(rng.standard_normal((6, 6, 2)))
        back = scale_flow(scale_flow(f, 3.0), 1.0 / 3.0)
        assert np.abs(back.vectors - f.vectors).max() < 1e-6

    def test_non_finite_factor_rejected(self):
        with pytest.raises(ValueError):
            scale_flow(const_flow(2, 2, 0, 0), np.nan)


class TestSampleFlowBilinear:
    def test_exact_on_grid_points(self, rng):
        f = FlowField(rng.standard_normal((6, 7, 2)))
        for (x, y) in [(0, 0), (6, 5), (3, 2)]:
            fx, fy = sample_flow_bilinear(f, (x, y))
            assert (fx, fy) == (f.vectors[y, x, 0], f.vectors[y, x, 1])

    def test_constant_field_everywhere(self):
        f = const_flow(5, 5, 1.25, -0.5)
        assert sample_flow_bilinear(f, (1.7, 3.2)) == (1.25, -0.5)

    def test_hand_evaluated_center(self):
        vec = np.array([[[0.0, 0.0], [1.0, 0.0]],
                        [[0.0, 1.0], [1.0, 1.0]]])
        f = FlowField(vec)
        assert sample_flow_bilinear(f, (0.5, 0.5)) == (0.5, 0.5)

    def test_linear_along_rows(self, rng):
        f = FlowField(rng.standard_normal((4, 6, 2)))
        x0, x1, y = 2, 3, 1
        for t in (0.25, 0.5, 0.75):
            fx, fy = sample_flow_bilinear(f, (x0 + t, y))
            expect = (1 - t) * f.vectors[y, x0] + t * f.vectors[y, x1]
            assert np.allclose((fx, fy), expect, atol=1e-12)

    def test_out_of_domain_signalled(self):
        f = const_flow(4, 4, 0, 0)
        with pytest.raises(OutOfBounds):
            sample_flow_bilinear(f, (-0.5, 1.0))
        with pytest.raises(OutOfBounds):
            sample_flow_bilinear(f, (1.0, 3.5))
