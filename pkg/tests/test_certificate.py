import json

import numpy as np
import pytest

from gradcert.certificate import Certificate, jsonable, refine_witness, verdict_rank


def test_pass_requires_nonnegative_margin():
    with pytest.raises(ValueError):
        Certificate("pli", "pass", -1e-3)
    assert Certificate("pli", "pass", 0.0).passed


def test_fail_requires_witness():
    with pytest.raises(ValueError):
        Certificate("pli", "fail", -1.0)
    assert not Certificate("pli", "fail", -1.0, witnesses=[{"x": [0.0]}]).passed


def test_unknown_claim_and_verdict():
    with pytest.raises(ValueError):
        Certificate("stability", "pass", 1.0)
    with pytest.raises(ValueError):
        Certificate("pli", "maybe", 1.0)


def test_json_is_strict_and_marked_sampled():
    cert = Certificate("sges", "inconclusive", float("nan"),
                       details={"a": np.float64(np.inf), "b": np.arange(3), "c": np.bool_(True)})
    d = json.loads(cert.to_json())
    assert d["sampled_not_proven"] is True
    assert d["margin"] == "nan" and d["details"]["a"] == "inf"
    assert d["details"]["b"] == [0, 1, 2] and d["details"]["c"] is True
    assert "schema_version" in d


def test_jsonable_nested():
    out = jsonable({1: (np.int64(2), [-np.inf])})
    assert out == {"1": [2, ["-inf"]]}


def test_verdict_rank_order():
    assert verdict_rank("pass") < verdict_rank("inconclusive") < verdict_rank("fail")


def test_refine_witness_climbs_and_respects_region():
    fn = lambda z: -float(np.sum((np.asarray(z) - 2.0) ** 2))
    x, v = refine_witness(fn, [0.0, 0.0])
    assert np.allclose(x, [2.0, 2.0], atol=1e-5) and v >= fn([0.0, 0.0])
    # a refinement leaving the region is discarded in favour of the sample
    x, v = refine_witness(fn, [0.0, 0.0], inside=lambda Z: np.all(np.abs(Z) <= 1.0, axis=1))
    assert np.array_equal(x, [0.0, 0.0]) and v == fn([0.0, 0.0])
