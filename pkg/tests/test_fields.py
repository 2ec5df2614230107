import numpy as np
import pytest
from hypothesis import given, strategies as st

from gradcert.fields import (CallableField, catalog_get, catalog_names, fd_gradient, fd_hessian,
                             refine_minimizer)
from gradcert.region import Region

from conftest import CATALOG_CASES


def test_catalog_names():
    assert set(catalog_names()) == {"quadratic", "cos_example", "asinh_example",
                                    "dimpled_quadratic", "staircase_radial"}


def test_asinh_at_minimizer(asinh):
    assert asinh.value(0.0) == 0.0
    assert np.allclose(asinh.gradient(0.0), 0.0)
    assert np.allclose(asinh.hessian(0.0), 1.0)


def test_quadratic_origin(quad2):
    assert quad2.value([0.0, 0.0]) == 0.0
    assert np.array_equal(quad2.gradient([0.0, 0.0]), [0.0, 0.0])


def test_cos_hessian_at_pi(cos):
    assert cos.hessian(np.pi).item() == pytest.approx(-1.0, abs=1e-14)
    assert cos.f_star == -2.0


def test_closed_forms_against_formulas(cos, asinh):
    # independent formulas for the two analytic examples
    x = np.linspace(-30, 30, 301)
    assert np.allclose(cos.value(x), 0.5 * x**2 - 2 * np.cos(x), atol=1e-12)
    assert np.allclose(cos.gradient(x).ravel(), x + 2 * np.sin(x), atol=1e-12)
    s = np.sqrt(1 + x**2)
    assert np.allclose(asinh.value(x), x * np.log(x + s) - s + 1, rtol=1e-12, atol=1e-12)
    assert np.allclose(asinh.gradient(x).ravel(), np.arcsinh(x), rtol=1e-13)
    assert np.allclose(asinh.hessian(x).ravel(), 1 / s, rtol=1e-13)


def test_fd_examples(cos, asinh):
    q = catalog_get("quadratic", {"dim": 2})
    assert np.allclose(fd_gradient(q, [1.0, 0.0], 1e-5), [1.0, 0.0], atol=1e-8)
    assert abs(fd_gradient(cos, 1.0, 1e-5)[0] - (1 + 2 * np.sin(1.0))) < 1e-7
    assert abs(fd_gradient(asinh, 3.0, 1e-5)[0] - np.log(3 + np.sqrt(10))) < 1e-7
    q3 = catalog_get("quadratic", {"dim": 3})
    assert np.allclose(fd_hessian(q3, [0.3, -1.0, 2.0]), np.eye(3), atol=1e-6)
    assert fd_hessian(cos, 0.0)[0, 0] == pytest.approx(3.0, abs=1e-6)


def test_fd_rejects_bad_step(cos):
    with pytest.raises(ValueError):
        fd_gradient(cos, 1.0, 0.0)
    with pytest.raises(ValueError):
        fd_hessian(cos, 1.0, -1.0)


@pytest.mark.parametrize("name,params", CATALOG_CASES)
def test_fd_agreement_and_symmetry(name, params):
    field = catalog_get(name, params)
    rng = np.random.default_rng(7)
    X = rng.uniform(-9.5, 9.5, size=(100, field.dim))
    worst_g = worst_h = 0.0
    for x in X:
        g, H = field.gradient(x), field.hessian(x)
        assert np.array_equal(H, H.T)
        gf, Hf = fd_gradient(field, x), fd_hessian(field, x)
        worst_g = max(worst_g, np.linalg.norm(g - gf) / max(1.0, np.linalg.norm(g)))
        worst_h = max(worst_h, np.linalg.norm(H - Hf) / max(1.0, np.linalg.norm(H)))
    assert worst_g < 1e-5
    assert worst_h < 1e-4


@pytest.mark.parametrize("name,params", CATALOG_CASES)
def test_minimizer_metadata(name, params):
    field = catalog_get(name, params)
    assert np.linalg.norm(field.gradient(field.x_star)) < 1e-10
    X = Region.cube(20, field.dim).samples(field)
    assert np.all(field.value(X) - field.f_star >= -1e-12)
    assert np.all(field.gap(X) >= -1e-12)


def test_batch_and_point_shapes(quad2, cos):
    assert np.shape(quad2.value(np.zeros((5, 2)))) == (5,)
    assert quad2.gradient(np.zeros((5, 2))).shape == (5, 2)
    assert quad2.hessian(np.zeros((5, 2))).shape == (5, 2, 2)
    assert np.shape(cos.value(np.zeros(4))) == (4,)  # flat arrays are points for dim 1
    with pytest.raises(ValueError):
        quad2.value(np.zeros((3, 3)))


def test_dimpled_validity_oracle():
    # independent oracle: f restricted to a ray is strictly increasing in r > 0,
    # so the origin is the only critical point; and curvature goes negative.
    for dim in (1, 2, 3):
        f = catalog_get("dimpled_quadratic", {"dim": dim})
        u = np.ones(dim) / np.sqrt(dim)
        r = np.linspace(1e-3, 12, 200001)
        vals = f.value(r[:, None] * u)
        assert np.all(np.diff(vals) > 0)
        assert np.min(f.lambda_min(r[:, None] * u)) < 0
        assert np.allclose(f.x_star, 0.0, atol=1e-12)
        inner = r < 1.0
        outer = r > 4.0
        assert np.all(f.lambda_min(r[inner | outer, None] * u) >= 1 - 1e-12)


def test_dimpled_invalid_parameters():
    with pytest.raises(ValueError):
        catalog_get("dimpled_quadratic", {"A": 50.0})
    with pytest.raises(ValueError):
        catalog_get("dimpled_quadratic", {"dim": 4})
    with pytest.raises(ValueError):
        catalog_get("dimpled_quadratic", {"r1": 3.0, "r2": 2.0})


def test_catalog_errors():
    with pytest.raises(KeyError):
        catalog_get("rosenbrock")
    with pytest.raises(ValueError):
        catalog_get("cos_example", {"bogus": 1})


def test_staircase_profile_construction():
    f = catalog_get("staircase_radial", {"dim": 1})
    # h'(0) = h(0) = 0 and the antiderivative chain is exact
    assert f.pp1(0.0) == 0.0 and f.pp0(0.0) == 0.0
    r = np.linspace(0, 30, 30001)
    h2 = f.pp2(r)
    outside = np.min(np.abs(r[:, None] - np.arange(2, 31)[None, :]), axis=1) > 0.1
    assert np.allclose(h2[outside], 1 + r[outside] ** 2, rtol=1e-12)
    assert np.allclose(f.pp2(np.arange(2.0, 31.0)), -1.0, atol=1e-12)
    assert h2.min() >= -1 - 1e-12
    # independent trapezoid integration of h'' reproduces h' (O(dr²) oracle)
    rf = np.linspace(0, 30, 600001)
    h2f = f.pp2(rf)
    h1 = np.concatenate([[0.0], np.cumsum(0.5 * (h2f[1:] + h2f[:-1]) * np.diff(rf))])
    assert np.allclose(h1, f.pp1(rf), rtol=1e-7, atol=1e-7)
    assert np.all(f.pp1(r[1:]) > 0)  # unique critical point at the origin


def test_callable_field_and_refinement():
    field = CallableField("shifted", 2, lambda x: np.sum((x - 1.0) ** 2),
                          lambda x: 2 * (x - 1.0), lambda x: 2 * np.eye(2), x_star=[1.0, 1.0])
    assert field.f_star == 0.0
    assert np.allclose(refine_minimizer(field, [5.0, -3.0]), [1.0, 1.0])
    assert field.value(np.zeros((3, 2))).shape == (3,)
    assert field.describe()["name"] == "shifted"


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=2))
def test_quadratic_gradient_is_identity(x):
    q = catalog_get("quadratic", {"dim": 2})
    assert np.allclose(q.gradient(x), x)
    assert q.value(x) == pytest.approx(0.5 * np.dot(x, x))


@given(st.floats(-1e3, 1e3))
def test_cos_value_bounded_below(x):
    f = catalog_get("cos_example")
    assert f.value(x) >= f.f_star - 1e-12
