import numpy as np
import pytest
from hypothesis import given, strategies as st

from gradcert.region import Region, SamplePlan, sphere_points


def test_grid_box_includes_corners():
    X = Region.box([-1.0, 0.0], [1.0, 2.0], kind="grid", counts=(3, 5)).samples()
    assert X.shape == (15, 2)
    assert np.allclose(X.min(axis=0), [-1, 0]) and np.allclose(X.max(axis=0), [1, 2])


def test_log_plan_symmetric_and_contains_origin():
    X = Region.cube(1e4, 1, kind="log", counts=(1001,)).samples().ravel()
    assert 0.0 in X
    assert np.allclose(np.sort(X), np.sort(-X))
    assert X.max() == pytest.approx(1e4)
    pos = X[X > 0]
    assert np.allclose(np.diff(np.log(pos)), np.diff(np.log(pos))[0])


def test_log_plan_positive_interval():
    X = Region.box([0.0], [1e6], kind="log", counts=(1000,), log_min=1e-3).samples().ravel()
    assert X.min() == pytest.approx(1e-3) and X.max() == pytest.approx(1e6)
    assert np.all(np.diff(X) > 0)


def test_ball_and_shell_samples_inside():
    ball = Region.ball([1.0, -1.0], 2.0, kind="random", n=500, seed=3)
    assert np.all(ball.contains(ball.samples()))
    shell = Region.shell([0.0, 0.0], 1.0, 4.0, kind="random", n=500, seed=3)
    r = np.linalg.norm(shell.samples(), axis=1)
    assert np.all((r >= 1.0) & (r <= 4.0))


def test_sublevel_needs_field_and_filters(quad2):
    reg = Region.sublevel(0.5, [-2, -2], [2, 2])
    with pytest.raises(ValueError):
        reg.samples()
    X = reg.samples(quad2)
    assert np.all(quad2.value(X) <= 0.5)
    with pytest.raises(ValueError):
        Region.sublevel(-1.0, [-2, -2], [2, 2]).samples(quad2)


def test_invalid_regions():
    with pytest.raises(ValueError):
        Region.box([1.0], [0.0])
    with pytest.raises(ValueError):
        Region.ball([0.0], -1.0)
    with pytest.raises(ValueError):
        Region.shell([0.0], 3.0, 2.0)
    with pytest.raises(ValueError):
        SamplePlan("lattice")
    with pytest.raises(ValueError):
        SamplePlan("grid", (0,))


def test_dict_round_trip():
    for reg in (Region.cube(3.0, 2, kind="sobol", n=64, seed=5),
                Region.shell([0.0, 0.0], 1.0, 4.0),
                Region.sublevel(2.0, [-1.0], [1.0])):
        assert Region.from_dict(reg.to_dict()) == reg
    cube = Region.from_dict({"kind": "cube", "dim": 2, "half_width": 5})
    assert cube.lower == (-5.0, -5.0)


def test_sobol_deterministic():
    a = Region.cube(1.0, 3, kind="sobol", n=100, seed=9).samples()
    b = Region.cube(1.0, 3, kind="sobol", n=100, seed=9).samples()
    assert a.shape == (100, 3) and np.array_equal(a, b)


def test_sphere_points_unit():
    for dim in (1, 2, 3):
        V = sphere_points(dim, 64)
        assert V.shape == (64, dim)
        assert np.allclose(np.linalg.norm(V, axis=1), 1.0)


@given(st.floats(0.1, 100), st.integers(1, 3))
def test_outer_fraction_boundary(hw, dim):
    reg = Region.cube(hw, dim, counts=(5,))
    X = reg.samples()
    frac = reg.outer_fraction(X)
    assert np.all(frac <= 1 + 1e-12)
    assert np.isclose(frac.max(), 1.0) and np.isclose(frac.min(), 0.0)
