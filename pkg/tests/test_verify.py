import json

import numpy as np
import pytest

from gradcert.certificate import Certificate
from gradcert.fields import CallableField, catalog_get
from gradcert.flow import StepControls, integrate_many
from gradcert.metric import ConformalMetric, build_theorem1_metric, partition_metrics, LinearProfile
from gradcert.pli import ComparisonFunction
from gradcert.region import Region
from gradcert.verify import (annulus_ies_check, certify_region, critical_point_scan, curly_L,
                             empirical_decay, forward_invariance_check, lemma2_residual,
                             matrix_form_L, riemann_distance_1d, riemann_distance_bounds)

from conftest import CATALOG_CASES


@pytest.fixture(scope="module")
def cos_metric():
    cos = catalog_get("cos_example")
    metric, _ = build_theorem1_metric(cos, ComparisonFunction.sqrt_mu(0.25), 3.0,
                                      region=Region.cube(10))
    return metric


def double_well():
    return CallableField("double_well", 1, lambda x: 0.25 * (x[0] ** 2 - 1) ** 2,
                         lambda x: x * (x**2 - 1), lambda x: np.array([[3 * x[0] ** 2 - 1]]),
                         x_star=[1.0])


def test_curly_L_examples(quad2, cos, cos_metric):
    ident = ConformalMetric.identity()
    assert np.allclose(curly_L(quad2, ident, np.random.default_rng(0).normal(size=(20, 2))), -1.0)
    assert curly_L(cos, ident, np.pi) == pytest.approx(1.0)
    assert curly_L(cos, cos_metric, np.pi) <= -2.7 + 1e-9


@pytest.mark.parametrize("name,params", CATALOG_CASES)
def test_matrix_form_matches_scalar(name, params):
    field = catalog_get(name, params)
    metric = partition_metrics(ConformalMetric(LinearProfile(0.3), field.f_star), None, 5.0, 0.5)
    X = np.random.default_rng(2).uniform(-5, 5, size=(50, field.dim))
    mat = np.array([matrix_form_L(field, metric, x) for x in X])
    assert np.allclose(mat, curly_L(field, metric, X), atol=1e-10)
    assert np.max(np.abs(lemma2_residual(field, metric, X))) < 1e-10


def test_certify_quadratic_pass(quad2):
    cert = certify_region(quad2, ConformalMetric.identity(), Region.cube(5, 2), 0.9)
    assert cert.passed and cert.margin == pytest.approx(0.1 + 1e-6)
    assert cert.details["matrix_form_consistent"]
    assert json.loads(cert.to_json())["sampled_not_proven"] is True


def test_certify_cos_identity_fails_near_pi(cos):
    cert = certify_region(cos, ConformalMetric.identity(cos.f_star),
                          Region.cube(10, counts=(2001,)), 0.1)
    assert cert.verdict == "fail"
    near = [w for w in cert.witnesses if w["kind"] == "nearest_to_minimizer"][0]
    assert abs(abs(near["refined_x"][0]) - np.pi) < 1e-4
    assert near["refined_value"] == pytest.approx(1.0, abs=1e-8)


def test_certify_domain_error(cos, cos_metric):
    with pytest.raises(ValueError, match="does not cover"):
        certify_region(cos, cos_metric, Region.cube(1e3), 2.7)


def test_certify_cos_theorem1_pass(cos, cos_metric):
    cert = certify_region(cos, cos_metric, Region.cube(10, counts=(4001,)), 2.7)
    assert cert.passed
    assert cert.bounds["log_alpha_up"] >= cert.bounds["log_beta_low"]


def test_riemann_distance_1d_examples(cos, cos_metric):
    assert riemann_distance_1d(ConformalMetric.identity(), cos, 1.0, 4.0) == pytest.approx(3.0)
    assert riemann_distance_1d(ConformalMetric.constant(1.0), cos, 4.0, 1.0) == \
        pytest.approx(3 * np.e)
    a = riemann_distance_1d(cos_metric, cos, 2.0, 5.0)
    b = riemann_distance_1d(cos_metric, cos, 2.0, 5.0, epsrel=1e-11)
    assert abs(a - b) < 1e-8 * a
    assert np.log(a) == pytest.approx(cos_metric.log_length_1d(cos, 2.0, 5.0)[0], abs=1e-9)
    with pytest.raises(ValueError):
        riemann_distance_1d(ConformalMetric.identity(), catalog_get("quadratic", {"dim": 2}),
                            0.0, 1.0)


def test_riemann_bounds(quad2):
    const = ConformalMetric.constant(0.7)
    lo, hi = riemann_distance_bounds(const, quad2, [0.0, 0.0], [3.0, 4.0])
    assert lo == pytest.approx(5 * np.exp(0.7)) and hi == pytest.approx(lo)
    with pytest.raises(ValueError):
        riemann_distance_bounds(ConformalMetric(LinearProfile(1.0)), quad2, [0, 0], [1, 1])


def test_riemann_bounds_dimpled_theorem2():
    from gradcert.metric import build_theorem2_metric
    f = catalog_get("dimpled_quadratic", {"dim": 2})
    m = build_theorem2_metric(f, 0.5, 0.9, Region.ball([0.0, 0.0], 12.0))
    rng = np.random.default_rng(8)
    for _ in range(20):
        x0, x1 = rng.uniform(-6, 6, (2, 2))
        lo, hi = riemann_distance_bounds(m, f, x0, x1)
        assert 0 < lo <= hi
        assert np.log(hi / lo) <= 0.5 * m.log_ratio + 1e-12


def test_riemann_bounds_segment_outside_region(cos, cos_metric):
    bounded = cos_metric.with_bounds(cos, Region.cube(2.0))
    riemann_distance_bounds(bounded, cos, [0.5], [1.5])
    with pytest.raises(ValueError):
        riemann_distance_bounds(bounded, cos, [0.5], [8.0])


def test_empirical_decay_quadratic_pairs(quad2):
    rng = np.random.default_rng(3)
    starts = rng.uniform(-5, 5, size=(10, 2, 2))
    cert = empirical_decay(quad2, starts, 20.0, rate=1.0, log_overshoot_bound=0.0)
    assert cert.passed
    assert np.all(np.abs(cert.details["kappas"] - 1.0) < 1e-3)
    assert np.all(cert.details["overshoots"] <= 1 + 1e-6)


def test_empirical_decay_cos_points_tail_rate(cos):
    starts = np.array([[20.0], [-20.0], [5.0], [-5.0]])
    cert = empirical_decay(cos, starts, 30.0, mode="points", tail_level=1e-3)
    assert cert.passed
    assert np.all(np.abs(cert.details["kappas"] - 3.0) < 0.15)


def test_empirical_decay_metric_one_step_and_sges(cos, cos_metric):
    rng = np.random.default_rng(5)
    pairs = rng.uniform(-10, 10, size=(6, 2, 1))
    cert = empirical_decay(cos, pairs, 15.0, metric=cos_metric, rate=2.7)
    assert cert.passed and cert.details["one_step_min_slack"] >= 0
    bounded = cos_metric.with_bounds(cos, Region.cube(10))
    cert = empirical_decay(cos, [[9.0], [-7.5]], 15.0, mode="points", metric=bounded, rate=2.7)
    assert cert.details["sges_bound_min_log_slack"] >= 0


def test_empirical_decay_inconclusive_short_horizon(quad2):
    cert = empirical_decay(quad2, [[[1.0, 0.0], [0.0, 1.0]]], 0.01,
                           controls=StepControls(n_samples=4))
    assert cert.verdict == "inconclusive"


def test_empirical_decay_too_close(quad2):
    with pytest.raises(ValueError):
        empirical_decay(quad2, [[[1.0, 0.0], [1.0, 0.0]]], 5.0)


def test_empirical_decay_rate_violation_fails(quad2):
    cert = empirical_decay(quad2, [[[1.0, 0.0], [0.0, 1.0]]], 10.0, rate=2.0)
    assert cert.verdict == "fail" and cert.witnesses


def test_forward_invariance_examples(quad2, cos):
    cert = forward_invariance_check(quad2, [0.0, 0.0], 1.0, 0.9, boundary_samples=16)
    assert cert.passed and cert.details["n_exits"] == 0
    cert = forward_invariance_check(cos, [0.0], 0.5, 1 + 2 * np.cos(0.5) - 1e-3)
    assert cert.passed and cert.details["n_exits"] == 0
    cert = forward_invariance_check(cos, [0.0], 4.0, 0.1)
    assert cert.verdict == "inconclusive"


def test_variational_contraction_on_certified_ball(cos):
    # finite-difference pairs at separation 1e-6 contract at the certified rate
    nu = 1 + 2 * np.cos(0.5)
    assert certify_region(cos, ConformalMetric.identity(cos.f_star),
                          Region.ball([0.0], 0.5), nu - 1e-9).passed
    x0 = np.linspace(-0.45, 0.45, 7)
    starts = np.stack([x0, x0 + 1e-6], axis=1).reshape(-1, 1)
    trajs = integrate_many(cos, starts, 1.0, StepControls(rtol=1e-13, atol=1e-16, grad_tol=0.0))
    for k in range(len(x0)):
        a, b = trajs[2 * k], trajs[2 * k + 1]
        d = np.abs(a.states[:, 0] - b.states[:, 0])
        rate = -np.log(d[-1] / d[0]) / a.times[-1]
        assert rate >= nu - 1e-3


def test_critical_point_scan(cos):
    eq = critical_point_scan(cos, Region.cube(20, counts=(41,)))
    assert eq.shape == (1, 1) and abs(eq[0, 0]) < 1e-6
    eq = critical_point_scan(double_well(), Region.cube(3, counts=(41,)))
    assert sorted(np.round(eq[:, 0], 4)) == [-1.0, 0.0, 1.0]


def test_annulus_examples():
    q = catalog_get("quadratic", {"dim": 2})
    cert = annulus_ies_check(q, Region.shell([0.0, 0.0], 1.0, 3.0), 0.9, n_pairs=10)
    assert cert.passed and cert.provenance["c_hat"] >= 1.0
    cert = annulus_ies_check(double_well(), Region.shell([0.0], 2.0, 3.0), 0.5, n_pairs=5)
    assert cert.verdict == "inconclusive"
    with pytest.raises(ValueError):
        annulus_ies_check(q, Region.ball([0.0, 0.0], 2.0), 0.9)


def test_certificates_replay_deterministically(cos):
    def run():
        return certify_region(cos, ConformalMetric.identity(cos.f_star),
                              Region.cube(10, kind="sobol", n=512, seed=4), 0.1).to_json()
    assert run() == run()
