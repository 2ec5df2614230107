import numpy as np
import pytest

from gradcert.curvature import (ConcavityProfile, bracket_sublevel, classify_concavity,
                                lambda_min_hessian, level_grid, m_star,
                                negative_curvature_measure, upper_envelope)
from gradcert.fields import catalog_get
from gradcert.region import Region

# Exact Lebesgue fraction of {cos x < −½} in [−100, 100], summed over periods
COS_NEG_FRACTION = 0.33510321638291124


def test_lambda_min_examples(quad2, cos, asinh):
    assert lambda_min_hessian(quad2, [0.3, 2.0]) == pytest.approx(1.0)
    assert lambda_min_hessian(cos, np.pi) == pytest.approx(-1.0)
    assert lambda_min_hessian(asinh, 0.0) == pytest.approx(1.0)


def test_negative_curvature_measure(cos, quad2):
    frac = negative_curvature_measure(cos, Region.cube(100, 1, counts=(200001,)))
    assert 0.32 <= frac <= 0.35
    assert frac == pytest.approx(COS_NEG_FRACTION, abs=1e-4)
    assert negative_curvature_measure(quad2, Region.cube(10, 2)) == 0.0
    dimpled = catalog_get("dimpled_quadratic", {"dim": 2})
    ball = Region.ball([0.0, 0.0], 10.0, kind="grid", counts=(401,))
    assert negative_curvature_measure(dimpled, ball) > 0
    X = ball.samples(dimpled)
    r = np.linalg.norm(X[dimpled.lambda_min(X) < 0], axis=1)
    assert r.min() > 1.0 and r.max() < 4.0


@pytest.mark.parametrize("m", [0.1, 0.5, 1.0])
def test_cos_state_bounded_fails(cos, m):
    res = classify_concavity(cos, m, Region.cube(100, 1, counts=(20001,)))
    assert res.state_bounded.verdict == "fail"
    assert res.state_bounded.witnesses[0]["outer_fraction"] >= 0.9


def test_cos_magnitude_bounded(cos):
    box = Region.cube(100, 1, counts=(20001,))
    assert classify_concavity(cos, 1.01, box).magnitude_bounded.passed
    assert classify_concavity(cos, 0.9, box).magnitude_bounded.verdict == "fail"


def test_dimpled_both_classes():
    f = catalog_get("dimpled_quadratic", {"dim": 2})
    box = Region.cube(10, 2, counts=(201,))
    res = classify_concavity(f, 0.5, box)
    assert res.state_bounded.passed
    assert res.state_bounded.details["violation_extent_fraction"] < 0.5
    # the dimple dips to λmin ≈ −6.17, so magnitude-boundedness needs m above that
    assert res.magnitude_bounded.verdict == "fail"
    assert classify_concavity(f, 7.0, box).magnitude_bounded.passed


def test_classify_errors(cos):
    with pytest.raises(ValueError):
        classify_concavity(cos, 0.0, Region.cube(10))
    with pytest.raises(ValueError):
        classify_concavity(cos, 1.0, Region.cube(10, counts=(1,)))


def test_m_star_examples(quad2, cos, asinh):
    assert m_star(quad2, 2.0, 1.0) == pytest.approx(0.0, abs=1e-12)
    val, x = m_star(cos, float(cos.value(np.pi)), 3.0, return_point=True)
    assert val == pytest.approx(4.0, abs=1e-8)
    assert abs(abs(x[0]) - np.pi) < 1e-6
    assert m_star(asinh, float(asinh.value(2.0)), 1.0) == pytest.approx(1 - 1 / np.sqrt(5), abs=1e-10)


def test_m_star_errors(cos):
    with pytest.raises(ValueError):
        m_star(cos, cos.f_star, 3.0)
    with pytest.raises(ValueError):
        m_star(cos, cos.f_star + 100.0, 3.0, search_region=Region.cube(3.0))


def test_bracket_sublevel(cos):
    R = bracket_sublevel(cos, 50.0)
    assert np.all(cos.gap(np.array([[-R], [R]])) > 50.0)


def test_envelope_quadratic_constant(quad2):
    prof = upper_envelope(quad2, 1.0, level_grid(1e-2, 1e2, 5), margin=0.1)
    assert np.allclose(prof.values, 0.1)
    assert prof.tail_slope == 0.0
    assert prof(1e6) == pytest.approx(0.1)


def test_envelope_cos_covers_pi_level(cos):
    gaps = level_grid(1e-2, 200.0, 10)
    prof = upper_envelope(cos, 3.0, cos.f_star + gaps, margin=0.1)
    assert prof(float(cos.value(np.pi))) >= 4.1 - 1e-9
    assert prof.breakpoint_slack() >= 0.1 - 1e-12
    assert np.all(np.diff(prof.values) >= 0)
    assert prof.tail_slope >= 0.0
    # dominance on fresh samples never used in the construction
    rng = np.random.default_rng(99)
    X = rng.uniform(-19.0, 19.0, size=(20000, 1))
    X = X[cos.gap(X) <= gaps[-1]]
    assert np.all(prof(cos.value(X)) > 3.0 - cos.lambda_min(X))
    back = ConcavityProfile.from_dict(prof.to_dict())
    assert np.array_equal(back.values, prof.values)


def test_envelope_staircase_dips():
    f = catalog_get("staircase_radial", {"dim": 1})
    nu = 1.0
    gaps = level_grid(1e-2, float(f.gap(np.array([[6.0]]))[0]), 10)
    prof = upper_envelope(f, nu, f.f_star + gaps, margin=0.1)
    for k in (2, 3, 4, 5):
        y = float(f.value(np.array([[float(k)]]))[0])
        assert prof(y) >= nu + 1 + 0.1 - 1e-9
    rng = np.random.default_rng(3)
    X = rng.uniform(-6.0, 6.0, size=(20000, 1))
    assert np.all(prof(f.value(X)) > nu - f.lambda_min(X))


def test_envelope_errors(cos):
    with pytest.raises(ValueError):
        upper_envelope(cos, 3.0, cos.f_star + np.array([1.0, 0.5]))
    with pytest.raises(ValueError):
        upper_envelope(cos, 3.0, cos.f_star + np.array([1.0, 2.0]), margin=0.0)
