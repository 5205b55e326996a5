import math

import numpy as np
import pytest

from eass.carbon import FuelPriceStats, LmpSeries, expand_to_slots, marginal_factors, membership, monthly_marginal_factors
from eass.domain import ConfigurationError, TimeGrid


def test_membership_closed_form():
    s = FuelPriceStats("gas", 30.0, 5.0)
    assert membership(30.0, s) == 1.0
    assert membership(35.0, s) == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert membership(40.0, s) == pytest.approx(math.exp(-2.0), abs=1e-12)
    assert membership(25.0, s) == membership(35.0, s)


def test_zero_std_rejected():
    with pytest.raises(ConfigurationError):
        FuelPriceStats("gas", 30.0, 0.0)


def test_single_fuel_is_always_marginal():
    f = marginal_factors(np.array([1.0, 50.0, 1e4]), [FuelPriceStats("coal", 40.0, 5.0)])
    np.testing.assert_array_equal(f.weights, 1.0)


def test_identical_fuels_split_evenly():
    stats = [FuelPriceStats("coal", 40.0, 5.0), FuelPriceStats("gas", 40.0, 5.0)]
    f = marginal_factors(np.array([10.0, 40.0, 90.0]), stats)
    np.testing.assert_array_equal(f.weights, 0.5)


def test_two_fuel_worked_example():
    stats = [FuelPriceStats("gas", 30.0, 5.0), FuelPriceStats("coal", 60.0, 10.0)]
    f = marginal_factors(LmpSeries([30.0]), stats)
    # memberships 1 and exp(-4.5)
    m = np.array([1.0, math.exp(-4.5)])
    np.testing.assert_allclose(f.weights[:, 0], m / m.sum(), rtol=1e-13)
    np.testing.assert_allclose(f.weights[:, 0], [0.9891, 0.0109], atol=1e-4)


def test_far_price_does_not_underflow():
    stats = [FuelPriceStats("gas", 30.0, 1.0), FuelPriceStats("coal", 60.0, 1.0)]
    f = marginal_factors(np.array([5000.0, -5000.0]), stats)
    assert np.all(np.isfinite(f.weights))
    np.testing.assert_allclose(f.weights.sum(axis=0), 1.0, atol=1e-15)
    assert f.weights[1, 0] == 1.0 and f.weights[0, 1] == 1.0


def test_lmp_must_be_finite():
    with pytest.raises(ValueError):
        LmpSeries([1.0, np.nan])


def test_monthly_table_is_applied_per_sample():
    table = {1: (FuelPriceStats("a", 10.0, 1.0), FuelPriceStats("b", 20.0, 1.0)),
             2: (FuelPriceStats("a", 20.0, 1.0), FuelPriceStats("b", 10.0, 1.0))}
    f = monthly_marginal_factors(np.array([10.0, 10.0]), np.array([1, 2]), table)
    assert f.weights[0, 0] > 0.99 and f.weights[1, 1] > 0.99
    with pytest.raises(ConfigurationError):
        monthly_marginal_factors(np.array([10.0]), np.array([3]), table)


def test_expand_holds_each_hour():
    g = TimeGrid()
    hourly = np.arange(24.0)
    slots = expand_to_slots(hourly, g, 288)
    assert slots.shape == (288,)
    np.testing.assert_array_equal(slots[:12], 0.0)
    np.testing.assert_array_equal(slots[12:24], 1.0)
    np.testing.assert_array_equal(expand_to_slots(np.full(24, 3.5), g), 3.5)
    with pytest.raises(ValueError):
        expand_to_slots(hourly, g, 280)
