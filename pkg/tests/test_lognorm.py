import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from gradcert.lognorm import (measure_report, mu, mu2, mu_limit_oracle, mu_p, mu_weighted2,
                              spectral_abscissa, strong_convexity_iff_contraction)
from gradcert.region import Region
from gradcert.fields import catalog_get

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_mu2_examples(cos):
    assert mu2(-np.eye(3)) == pytest.approx(-1.0)
    assert mu2([[0, 1], [0, 0]]) == pytest.approx(0.5)
    assert mu2(-cos.hessian(0.0)) == pytest.approx(-3.0)


def test_mu_p_examples():
    for p in (1, np.inf):
        assert mu_p(-np.eye(3), p) == -1.0
    A = np.array([[-2.0, 1.0], [0.0, -3.0]])
    # column sums: (-2 + 0, -3 + 1); row sums: (-2 + 1, -3 + 0)
    assert mu_p(A, 1) == -2.0
    assert mu_p(A, np.inf) == -1.0
    assert mu_limit_oracle(A, 1) == pytest.approx(-2.0, abs=1e-6)
    assert mu_limit_oracle(A, np.inf) == pytest.approx(-1.0, abs=1e-6)


def test_unsupported_and_nonsquare():
    with pytest.raises(ValueError):
        mu_p(np.eye(2), 3)
    with pytest.raises(ValueError):
        mu_p(np.eye(2), 2)
    with pytest.raises(ValueError):
        mu2(np.ones((2, 3)))


def test_weighted_examples():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 3))
    assert mu_weighted2(A, np.eye(3)) == pytest.approx(mu2(A))
    assert mu_weighted2(np.diag([-1.0, -2.0]), np.diag([4.0, 1.0])) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        mu_weighted2(A, -np.eye(3))
    with pytest.raises(ValueError):
        mu_weighted2(A, np.triu(np.ones((3, 3))))


def test_limit_oracle_examples():
    assert mu_limit_oracle(np.zeros((2, 2))) == 0.0
    assert mu_limit_oracle(-np.eye(2), 2) == pytest.approx(-1.0, abs=1e-6)
    with pytest.raises(ValueError):
        mu_limit_oracle(np.eye(2), 2, [1e-3, 1e-2])


def test_spectral_abscissa_examples():
    assert spectral_abscissa(-np.eye(3)) == pytest.approx(-1.0)
    assert spectral_abscissa([[0, 1], [-1, 0]]) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("p", [1, 2, np.inf])
def test_chain_on_seeded_matrices(p):
    rng = np.random.default_rng(2024)
    worst = np.inf
    for _ in range(1000):
        n = rng.integers(1, 7)
        A = rng.standard_normal((n, n)) * rng.uniform(0.1, 10)
        worst = min(worst, measure_report(A, p).chain_slack())
    assert worst >= -1e-8


@pytest.mark.parametrize("p", [1, 2, np.inf])
def test_limit_oracle_matches_closed_form(p):
    rng = np.random.default_rng(11)
    for _ in range(50):
        A = rng.standard_normal((4, 4))
        assert abs(mu_limit_oracle(A, p) - mu(A, p)) < 1e-4


def test_symmetric_abscissa_equals_mu2():
    rng = np.random.default_rng(5)
    for _ in range(200):
        B = rng.standard_normal((5, 5))
        S = B + B.T
        assert abs(mu2(S) - spectral_abscissa(S)) < 1e-10
        assert abs(mu_limit_oracle(S, 2) - np.linalg.eigvalsh(S)[-1]) < 1e-4


@given(arrays(float, (3, 3), elements=finite), arrays(float, (3, 3), elements=finite),
       st.sampled_from([1, 2, np.inf]))
def test_subadditive(A, B, p):
    assert mu(A + B, p) <= mu(A, p) + mu(B, p) + 1e-9


@given(arrays(float, (3, 3), elements=finite), st.sampled_from([1, 2, np.inf]))
def test_chain_property(A, p):
    assert measure_report(A, p).chain_slack() >= -1e-8


@given(arrays(float, (3, 3), elements=finite), arrays(float, (3, 3), elements=finite))
def test_weighted_chain_property(A, B):
    Q = B @ B.T + 0.5 * np.eye(3)
    rep = measure_report(A, 2, Q=Q)
    assert rep.chain_slack() >= -1e-8 * max(1.0, rep.matrix_norm)
    assert rep.mu == pytest.approx(mu_weighted2(A, Q))


def test_weighted_report_rejects_other_p():
    with pytest.raises(ValueError):
        measure_report(np.eye(2), 1, Q=np.eye(2))


def test_strong_convexity_examples(quad2, cos, asinh):
    cert = strong_convexity_iff_contraction(quad2, Region.cube(5, 2), 0.9)
    assert cert.passed and cert.margin >= 0
    assert cert.details["pointwise_agreement"] < 1e-12
    cert = strong_convexity_iff_contraction(asinh, Region.cube(10, 1, counts=(2001,)), 0.05)
    assert cert.passed and cert.details["min_lambda_min"] == pytest.approx(1 / np.sqrt(101))


def test_strong_convexity_fail_witness_near_pi(cos):
    cert = strong_convexity_iff_contraction(cos, Region.cube(10, 1, counts=(2001,)), 0.1)
    assert cert.verdict == "fail" and cert.witnesses
    near = [w for w in cert.witnesses if w.get("kind") == "nearest_to_minimizer"]
    assert near, "expected a witness nearest to the minimizer"
    assert abs(abs(near[0]["refined_x"][0]) - np.pi) < 1e-4
    assert near[0]["refined_mu2_neg_hessian"] == pytest.approx(1.0, abs=1e-8)
    for w in cert.witnesses:
        assert w["mu2_neg_hessian"] > -0.1


def test_strong_convexity_errors(quad2):
    with pytest.raises(ValueError):
        strong_convexity_iff_contraction(quad2, Region.cube(1, 2), 0.0)


def test_dimpled_is_not_strongly_convex():
    f = catalog_get("dimpled_quadratic", {"dim": 1})
    cert = strong_convexity_iff_contraction(f, Region.cube(6, 1, counts=(4001,)), 0.5)
    assert cert.verdict == "fail"
