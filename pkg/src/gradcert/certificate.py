"""Machine-readable verdicts shared by every checking routine."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = "1.0"
CLAIMS = ("contraction_region", "sges", "ies", "forward_invariance", "annulus_ies", "pli",
          "concavity")
VERDICTS = ("pass", "fail", "inconclusive")


def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


@dataclass(frozen=True)
class Certificate:
    """Outcome of a sampled check.

    ``margin`` is the worst slack including the declared tolerance, so a
    passing certificate always has ``margin >= 0``; failing certificates
    carry at least one witness. Every certificate is sampled, not proven.
    """

    claim: str
    verdict: str
    margin: float
    region: dict = None
    grid: dict = None
    witnesses: list = field(default_factory=list)
    rates: dict = None
    bounds: dict = None
    provenance: dict = field(default_factory=dict)
    field_spec: dict = None
    metric: dict = None
    details: dict = field(default_factory=dict)
    sampled_not_proven: bool = True

    def __post_init__(self):
        if self.claim not in CLAIMS:
            raise ValueError(f"unknown claim {self.claim!r}")
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "pass" and not self.margin >= 0:
            raise ValueError("a passing certificate needs margin >= 0")
        if self.verdict == "fail" and not self.witnesses:
            raise ValueError("a failing certificate needs a witness")

    @property
    def passed(self):
        return self.verdict == "pass"

    def to_dict(self):
        return jsonable({
            "schema_version": SCHEMA_VERSION,
            "claim": self.claim,
            "field": self.field_spec,
            "metric": self.metric,
            "region": self.region,
            "grid": self.grid,
            "verdict": self.verdict,
            "margin": self.margin,
            "witnesses": self.witnesses,
            "rates": self.rates,
            "bounds": self.bounds,
            "provenance": self.provenance,
            "details": self.details,
            "sampled_not_proven": True,
        })

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary(self):
        return f"{self.claim}: {self.verdict} (margin {self.margin:.4g})"


def grid_descriptor(region, n_samples):
    if region is None:
        return None
    plan = region.plan
    return {"kind": plan.kind, "seed": plan.seed, "counts": list(plan.counts),
            "n_samples": int(n_samples)}


def verdict_rank(verdict):
    """Exit-code ordering: pass < inconclusive < fail."""
    return {"pass": 0, "inconclusive": 1, "fail": 2}[verdict]


def refine_witness(fn, x, maxiter=400, inside=None):
    """Locally maximize a violation measure from a sampled witness (Nelder–Mead).

    Returns the refined point when it is at least as bad as the sample and,
    given ``inside``, still lies in the region.
    """
    from scipy.optimize import minimize

    x = np.asarray(x, dtype=float).ravel()
    start = float(fn(x))
    res = minimize(lambda z: -float(fn(z)), x, method="Nelder-Mead",
                   options={"maxiter": maxiter, "xatol": 1e-10, "fatol": 1e-14})
    ok = np.all(np.isfinite(res.x)) and -res.fun >= start
    if ok and inside is not None:
        ok = bool(np.all(inside(res.x[None, :])))
    if ok:
        return res.x, float(-res.fun)
    return x, start
