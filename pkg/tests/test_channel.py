"""Optical geometry, channel gains, and the quantized direct-detection channel."""

from __future__ import annotations

import math

import numpy as np
import pytest

from oisac import (
    OpticalGeometry,
    SystemParams,
    build_quantized_channel,
    capacity_bounds,
    comm_gain,
    lambertian_order,
    radiant_intensity,
    sensing_gain,
)


class TestLambertianOrder:
    def test_sixty_degree_half_power_angle_gives_order_one(self):
        assert lambertian_order(math.radians(60.0)) == pytest.approx(1.0, abs=1e-12)

    def test_forty_five_degree_half_power_angle_gives_order_two(self):
        assert lambertian_order(math.radians(45.0)) == pytest.approx(2.0, abs=1e-12)

    def test_narrower_beam_has_larger_order(self):
        assert lambertian_order(math.radians(20.0)) > lambertian_order(math.radians(40.0))


class TestRadiantIntensity:
    def test_on_axis_value_is_order_plus_one_over_two_pi(self):
        m = 2.0
        assert radiant_intensity(0.0, m) == pytest.approx((m + 1) / (2 * math.pi), rel=1e-12)

    def test_decreases_off_axis(self):
        m = lambertian_order(math.radians(60.0))
        vals = [radiant_intensity(phi, m) for phi in (0.0, 0.3, 0.6, 0.9)]
        assert all(a > b for a, b in zip(vals, vals[1:]))


class TestCommGain:
    def geometry(self, **overrides) -> OpticalGeometry:
        base = dict(
            half_power_angle=math.radians(60.0),
            emission_angle=math.radians(10.0),
            incidence_angle=math.radians(10.0),
            fov=math.radians(70.0),
            area=1e-4,
            distance=2.0,
        )
        base.update(overrides)
        return OpticalGeometry(**base)

    def test_inverse_square_in_distance(self):
        g1 = comm_gain(self.geometry(distance=1.0))
        g2 = comm_gain(self.geometry(distance=2.0))
        assert g1 / g2 == pytest.approx(4.0, rel=1e-12)

    def test_linear_in_detector_area(self):
        g1 = comm_gain(self.geometry(area=1e-4))
        g2 = comm_gain(self.geometry(area=2e-4))
        assert g2 / g1 == pytest.approx(2.0, rel=1e-12)

    def test_zero_outside_field_of_view(self):
        g = comm_gain(self.geometry(incidence_angle=math.radians(80.0)))
        assert g == 0.0

    def test_positive_inside_field_of_view(self):
        assert comm_gain(self.geometry()) > 0.0


class TestSensingGain:
    def test_inverse_fourth_power_law(self):
        p = SystemParams()
        assert sensing_gain(2.0, 8.0, p) == pytest.approx(p.rho * 8.0 / 2.0**4, rel=1e-12)

    def test_scales_with_reflectivity(self):
        lo = sensing_gain(1.5, 4.0, SystemParams(rho=1.0))
        hi = sensing_gain(1.5, 4.0, SystemParams(rho=3.0))
        assert hi / lo == pytest.approx(3.0, rel=1e-12)


class TestQuantizedChannel:
    def test_grid_shapes_at_unit_noise(self, channel):
        assert channel.x_grid.shape == (121,)
        assert channel.y_grid.shape == (641,)
        assert channel.likelihood.shape == (121, 641)

    def test_input_grid_spans_zero_to_x_max_in_quarter_steps(self, channel, params):
        assert channel.x_grid[0] == 0.0
        assert channel.x_grid[-1] == params.x_max
        assert np.allclose(np.diff(channel.x_grid), params.q)

    def test_output_grid_covers_noise_span_beyond_inputs(self, channel, params):
        sigma = math.sqrt(params.sigma_c2)
        assert channel.y_grid[0] <= 0.0 - params.noise_span * sigma + 1e-9
        assert channel.y_grid[-1] >= params.x_max + params.noise_span * sigma - 1e-9

    def test_rows_are_probability_distributions(self, channel):
        rows = channel.likelihood.sum(axis=1)
        assert np.allclose(rows, 1.0, atol=1e-12)
        assert np.all(channel.likelihood >= 0.0)

    def test_row_mean_tracks_transmitted_intensity(self, channel):
        # The direct-detection output is the input plus zero-mean noise, so
        # each quantized row's mean must sit on its input level.
        means = channel.likelihood @ channel.y_grid
        assert np.allclose(means, channel.x_grid, atol=5e-3)

    def test_low_noise_grid_is_finer_and_clipped(self):
        ch = build_quantized_channel(SystemParams(sigma_c2=1e-3))
        assert ch.likelihood.shape == (121, 485)


class TestCapacityBounds:
    def test_reference_operating_point(self):
        lb, ub = capacity_bounds(10.0, 1.0, 1.0)
        assert lb == pytest.approx(1.154981, abs=1e-5)
        assert ub == pytest.approx(4.764623, abs=1e-5)

    def test_lower_bound_below_upper_bound(self):
        for budget in (1.0, 5.0, 10.0, 20.0):
            lb, ub = capacity_bounds(budget, 1.0, 1.0)
            assert lb < ub

    def test_both_bounds_increase_with_budget(self):
        pairs = [capacity_bounds(b, 1.0, 1.0) for b in (5.0, 10.0, 20.0)]
        lbs, ubs = zip(*pairs)
        assert lbs[0] < lbs[1] < lbs[2]
        assert ubs[0] < ubs[1] < ubs[2]

    def test_bounds_scale_with_channel_gain_over_noise(self):
        # Doubling the gain at fixed noise is the same as doubling the budget.
        direct = capacity_bounds(20.0, 1.0, 1.0)
        scaled = capacity_bounds(10.0, 2.0, 1.0)
        assert direct[0] == pytest.approx(scaled[0], rel=1e-12)
        assert direct[1] == pytest.approx(scaled[1], rel=1e-12)
