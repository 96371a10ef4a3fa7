import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from d2oc.errors import ConfigError
from d2oc.field import (Domain, GaussianComponent, GroundTruthField, SensorModel, density_at,
                        plume_field, sense, sense_many)
from oracles import gaussian_mixture


def one_plume(amp=2.0, spread=5.0, center=(50.0, 50.0)):
    return GroundTruthField((GaussianComponent(center, amp, spread),), Domain(0, 100, 0, 100))


def test_density_at_center_equals_amplitude():
    assert density_at(one_plume(amp=2.0), (50.0, 50.0)) == 2.0


def test_half_max_radius():
    s = 5.0
    r = s * math.sqrt(2.0 * math.log(2.0))
    assert density_at(one_plume(amp=2.0, spread=s), (50.0 + r, 50.0)) == pytest.approx(1.0, rel=1e-12)


def test_two_components_match_scalar_oracle(rng):
    comps = [((20.0, 30.0), 1.5, 4.0), ((70.0, 60.0), 0.7, 9.0)]
    f = plume_field([(c[0][0], c[0][1], c[1], c[2]) for c in comps], Domain(0, 100, 0, 100))
    for x in rng.random((50, 2)) * 100:
        assert density_at(f, x) == pytest.approx(gaussian_mixture(comps, x), rel=1e-13, abs=1e-300)


def test_outside_domain_is_zero():
    f = one_plume()
    assert density_at(f, (-1.0, 50.0)) == 0.0
    assert density_at(f, (50.0, 100.5)) == 0.0


def test_vectorized_density_matches_pointwise(rng):
    f = one_plume()
    pts = rng.random((20, 2)) * 120 - 10
    np.testing.assert_array_equal(f.density(pts), [density_at(f, p) for p in pts])


@given(st.floats(-50, 150), st.floats(-50, 150))
def test_density_nonnegative(x, y):
    f = plume_field([(10, 10, 1.0, 3.0), (90, 40, 0.5, 20.0)], Domain(0, 100, 0, 100))
    assert density_at(f, (x, y)) >= 0.0


def test_zero_noise_sense_is_exact(rng):
    f = one_plume()
    x = (53.0, 47.5)
    assert sense(f, SensorModel(0.0, 10.0), x, rng) == density_at(f, x)


def test_sense_consumes_one_draw():
    f = one_plume()
    r1, r2 = np.random.default_rng(7), np.random.default_rng(7)
    sense(f, SensorModel(0.1, 10.0), (50, 50), r1)
    r2.standard_normal()
    assert r1.random() == r2.random()


def test_sense_deterministic_sequence():
    f = one_plume()
    m = SensorModel(0.3, 10.0)
    a = [sense(f, m, (50, 40 + k), np.random.default_rng(3)) for k in range(5)]
    b = [sense(f, m, (50, 40 + k), np.random.default_rng(3)) for k in range(5)]
    assert a == b


def test_sense_many_matches_repeated_sense():
    f = one_plume()
    m = SensorModel(0.2, 10.0)
    pts = np.array([[50, 50], [40, 45], [10, 90]], dtype=float)
    r1, r2 = np.random.default_rng(11), np.random.default_rng(11)
    many = sense_many(f, m, pts, r1)
    single = [sense(f, m, p, r2) for p in pts]
    np.testing.assert_allclose(many, single, rtol=0, atol=1e-15)


def test_sense_monte_carlo_moments():
    f = one_plume(amp=1.0)
    x = (52.0, 49.0)
    r = np.random.default_rng(2024)
    vals = np.array([sense(f, SensorModel(0.1, 10.0), x, r) for _ in range(10_000)])
    assert abs(vals.mean() - density_at(f, x)) < 0.01
    assert abs(vals.std(ddof=1) - 0.1) < 0.01


@pytest.mark.parametrize("kw", [dict(amplitude=-1.0, spread=1.0), dict(amplitude=1.0, spread=0.0)])
def test_component_validation(kw):
    with pytest.raises(ConfigError):
        GaussianComponent((0.0, 0.0), **kw)


def test_field_validation():
    with pytest.raises(ConfigError):
        GroundTruthField((), Domain())
    with pytest.raises(ConfigError):
        GroundTruthField((GaussianComponent((300.0, 10.0), 1.0, 1.0),), Domain())
    with pytest.raises(ConfigError):
        SensorModel(0.1, 0.0)
    with pytest.raises(ConfigError):
        SensorModel(-0.1, 1.0)
    with pytest.raises(ConfigError):
        Domain(0, 0, 0, 1)
