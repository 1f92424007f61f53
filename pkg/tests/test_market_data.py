import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sinkbond.market_data import (
    DiscountCurve,
    TimeGrid,
    build_time_grid,
    discount_factor,
    discount_factors,
    rate_integrals,
)


class TestBuildTimeGrid:
    def test_uniform_quarters(self):
        grid = build_time_grid(1.0, 4)
        assert grid.times == (0.0, 0.25, 0.5, 0.75, 1.0)

    def test_event_insertion_keeps_endpoints(self):
        grid = build_time_grid(1.0, 2, [0.3])
        assert 0.3 in grid.times
        assert grid.times[0] == 0.0 and grid.times[-1] == 1.0
        assert np.all(grid.steps > 0)

    def test_annual_events_on_thirteen_steps_match_reference_density(self):
        grid = build_time_grid(30.0, 13, [float(y) for y in range(1, 31)])
        assert abs(grid.n_steps - 403) <= 31
        for y in range(1, 31):
            assert float(y) in grid.times

    def test_maturity_not_a_step_multiple(self):
        grid = build_time_grid(1.3, 2, [])
        assert grid.times[-1] == 1.3
        assert np.all(grid.steps > 0)

    @pytest.mark.parametrize("dates", [[0.5, 0.5], [0.0], [-0.1], [3.5]])
    def test_bad_event_dates_rejected(self, dates):
        with pytest.raises(ValueError):
            build_time_grid(3.0, 4, dates)

    def test_bad_grid_parameters_rejected(self):
        with pytest.raises(ValueError):
            build_time_grid(0.0, 4)
        with pytest.raises(ValueError):
            build_time_grid(1.0, 0)

    @given(
        steps_per_year=st.integers(min_value=1, max_value=12),
        raw_events=st.lists(
            st.floats(min_value=0.01, max_value=4.99, allow_nan=False), min_size=1, max_size=6
        ),
    )
    @settings(max_examples=200, deadline=None)
    def test_events_are_exact_members_and_snapping_is_local(self, steps_per_year, raw_events):
        maturity = 5.0
        events = sorted(set(round(e, 6) for e in raw_events))
        grid = build_time_grid(maturity, steps_per_year, events)
        h = 1.0 / steps_per_year
        times = set(grid.times)
        for e in events:
            assert e in times  # bit-exact membership
        # every uniform point is either kept or within half a step of an event
        for i in range(1, int(maturity * steps_per_year)):
            p = i / steps_per_year
            if p not in times:
                assert min(abs(p - e) for e in events) < 0.5 * h
        assert np.all(grid.steps > 0)


class TestTimeGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            TimeGrid((0.0,))
        with pytest.raises(ValueError):
            TimeGrid((0.1, 0.5))
        with pytest.raises(ValueError):
            TimeGrid((0.0, 0.5, 0.5))

    def test_index_of(self):
        grid = build_time_grid(2.0, 2)
        assert grid.index_of(1.5) == 3
        assert grid.has_time(1.0)
        with pytest.raises(ValueError):
            grid.index_of(0.6)


class TestDiscountCurve:
    def test_validation(self):
        with pytest.raises(ValueError):
            DiscountCurve((0.5,), (0.01,))
        with pytest.raises(ValueError):
            DiscountCurve((0.0, 0.0), (0.01, 0.02))
        with pytest.raises(ValueError):
            DiscountCurve((0.0,), (float("nan"),))

    def test_piecewise_lookup_and_flat_extension(self):
        curve = DiscountCurve((0.0, 1.0, 2.0), (0.01, 0.02, 0.03))
        assert curve.forward_rate(0.0) == 0.01
        assert curve.forward_rate(0.999) == 0.01
        assert curve.forward_rate(1.0) == 0.02
        assert curve.forward_rate(10.0) == 0.03
        with pytest.raises(ValueError):
            curve.forward_rate(-0.1)

    def test_from_pillars(self):
        curve = DiscountCurve.from_pillars([{"time": 0.0, "rate": 0.02}, {"time": 3.0, "rate": 0.025}])
        assert curve.pillar_rates == (0.02, 0.025)


class TestDiscountFactor:
    def test_zero_rate_is_one(self, zero_curve):
        grid = build_time_grid(3.0, 4)
        assert discount_factor(zero_curve, grid, 0, grid.n_steps) == 1.0

    def test_flat_rate_over_one_year(self, flat_curve):
        grid = build_time_grid(2.0, 4)
        df = discount_factor(flat_curve, grid, 2, 6)  # t=0.5 to t=1.5
        assert df == pytest.approx(math.exp(-0.02), rel=1e-14)
        assert df == pytest.approx(0.980199, abs=5e-7)

    def test_empty_range_is_one(self, flat_curve):
        grid = build_time_grid(1.0, 4)
        for n in range(grid.n_steps + 1):
            assert discount_factor(flat_curve, grid, n, n) == 1.0

    def test_index_validation(self, flat_curve):
        grid = build_time_grid(1.0, 4)
        with pytest.raises(ValueError):
            discount_factor(flat_curve, grid, 3, 2)
        with pytest.raises(ValueError):
            discount_factor(flat_curve, grid, 0, 99)

    @given(
        rates=st.lists(st.floats(min_value=-0.02, max_value=0.15), min_size=1, max_size=4),
        split=st.tuples(
            st.integers(min_value=0, max_value=8),
            st.integers(min_value=0, max_value=8),
            st.integers(min_value=0, max_value=8),
        ),
    )
    @settings(max_examples=200, deadline=None)
    def test_multiplicative_over_concatenated_ranges(self, rates, split):
        pillar_times = tuple(float(i) for i in range(len(rates)))
        curve = DiscountCurve(pillar_times, tuple(rates))
        grid = build_time_grid(2.0, 4)
        n, m, k = sorted(split)
        combined = discount_factor(curve, grid, n, m) * discount_factor(curve, grid, m, k)
        direct = discount_factor(curve, grid, n, k)
        assert combined == pytest.approx(direct, rel=1e-14)

    def test_vector_helpers_agree_with_scalar(self, flat_curve):
        grid = build_time_grid(3.0, 3, [0.4])
        dfv = discount_factors(flat_curve, grid)
        for m in range(grid.n_steps + 1):
            assert dfv[m] == pytest.approx(discount_factor(flat_curve, grid, 0, m), rel=1e-15)
        integrals = rate_integrals(flat_curve, grid)
        assert integrals[0] == 0.0
        assert np.all(np.diff(integrals) >= 0)
