"""Łojasiewicz-type inequalities: K∞ comparison functions, gPLI fits, strong-PLI tails."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import integrate

from .certificate import Certificate, grid_descriptor

__all__ = ["ComparisonFunction", "StrongPLIResult", "check_kinf_pli", "fit_gpli_mu",
           "lojasiewicz_exponent_probe", "strong_pli_check", "fit_power_alpha",
           "fit_tail_exponent", "check_exp_gradient_bound", "EXCLUSION_RADIUS"]

EXCLUSION_RADIUS = 1e-8
TAIL_MARGIN = 0.05


@dataclass(frozen=True, eq=False)
class ComparisonFunction:
    """A K∞ comparison function α evaluated on the gap s = f − f*.

    Families: ``sqrt_mu`` √(μs); ``power`` c·s^q; ``log`` scale·log(1+s);
    ``custom`` wraps a vectorized callable.
    """

    family: str
    params: dict = dc_field(default_factory=dict)
    fn: object = None
    tail_exponent: float = None

    def __post_init__(self):
        p = dict(self.params)
        fam = self.family
        if fam == "sqrt_mu":
            if p.get("mu", 0) <= 0:
                raise ValueError("sqrt_mu needs mu > 0")
            tail = 0.5
        elif fam == "power":
            p.setdefault("c", 1.0)
            if p["c"] <= 0 or p.get("q", 0) <= 0:
                raise ValueError("power needs c > 0 and q > 0")
            tail = float(p["q"])
        elif fam == "log":
            p.setdefault("scale", 1.0)
            if p["scale"] <= 0:
                raise ValueError("log needs scale > 0")
            tail = 0.0
        elif fam == "custom":
            if not callable(self.fn):
                raise ValueError("custom comparison functions need a callable")
            tail = self.tail_exponent
        else:
            raise ValueError(f"unknown comparison family {fam!r}")
        object.__setattr__(self, "params", p)
        if self.tail_exponent is None:
            object.__setattr__(self, "tail_exponent", tail)

    @classmethod
    def sqrt_mu(cls, mu):
        return cls("sqrt_mu", {"mu": float(mu)})

    @classmethod
    def power(cls, q, c=1.0):
        return cls("power", {"q": float(q), "c": float(c)})

    @classmethod
    def log(cls, scale=1.0):
        return cls("log", {"scale": float(scale)})

    @classmethod
    def from_dict(cls, spec):
        spec = dict(spec)
        fam = spec.pop("family")
        tail = spec.pop("tail_exponent", None)
        return cls(fam, spec, tail_exponent=tail)

    def to_dict(self):
        out = {"family": self.family, **self.params}
        if self.tail_exponent is not None:
            out["tail_exponent"] = self.tail_exponent
        return out

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        p = self.params
        if self.family == "sqrt_mu":
            out = np.sqrt(p["mu"] * np.maximum(s, 0.0))
        elif self.family == "power":
            out = p["c"] * np.maximum(s, 0.0) ** p["q"]
        elif self.family == "log":
            out = p["scale"] * np.log1p(np.maximum(s, 0.0))
        else:
            out = np.asarray(self.fn(s), dtype=float)
        return float(out) if out.ndim == 0 else out

    def kinf_probe(self, n=200, s_max=1e12):
        """Sampled K∞ evidence: α(0)=0, strictly increasing and not saturating.

        Saturation is judged per decade: a bounded α gains geometrically less
        over each further decade, while log-like or power growth does not.
        """
        s = np.concatenate([[0.0], np.geomspace(1e-8, s_max, n)])
        a = np.atleast_1d(self(s))
        mid = np.sqrt(s_max)
        gain_top = float(self(s_max) - self(s_max / 10.0))
        gain_mid = float(self(mid) - self(mid / 10.0))
        return {"zero_at_zero": bool(a[0] == 0.0), "increasing": bool(np.all(np.diff(a) > 0)),
                "max_probe_value": float(a[-1]),
                "unbounded_trend": bool(gain_mid > 0 and gain_top >= 0.5 * gain_mid)}


def _require_fstar(field):
    if getattr(field, "f_star", None) is None or not np.isfinite(field.f_star):
        raise ValueError("field has no finite f_star")


def _pli_tol(a):
    return 1e-9 * (1.0 + a)


def check_kinf_pli(field, alpha, region):
    """Sampled check of ‖∇f(x)‖ ≥ α(f(x) − f*) with relative round-off slack."""
    _require_fstar(field)
    X = region.samples(field)
    gap = np.maximum(np.atleast_1d(field.gap(X)), 0.0)
    gn = np.atleast_1d(field.grad_norm(X))
    a = np.atleast_1d(alpha(gap))
    slack = gn - a + _pli_tol(a)
    i = int(np.argmin(slack))
    margin = float(slack[i])
    verdict = "pass" if margin >= 0 else "fail"
    wit = [] if verdict == "pass" else [{"x": X[i], "grad_norm": gn[i], "alpha": a[i],
                                         "gap": gap[i]}]
    return Certificate(
        claim="pli", verdict=verdict, margin=margin, region=region.to_dict(),
        grid=grid_descriptor(region, X.shape[0]), witnesses=wit, field_spec=field.describe(),
        provenance={"alpha": alpha.to_dict(), "tol": "1e-9*(1+alpha)"},
        details={"inequality": "grad_norm >= alpha(f - f*)", "worst_point": X[i],
                 "min_raw_slack": float(np.min(gn - a))})


def _ratio_samples(field, region, exclude=EXCLUSION_RADIUS):
    X = region.samples(field)
    keep = np.linalg.norm(X - field.x_star, axis=1) > exclude
    X = X[keep]
    if X.shape[0] == 0:
        raise ValueError("region contains no samples away from the minimizer")
    gap = np.atleast_1d(field.gap(X))
    good = gap > 0
    if not good.any():
        raise ValueError("no samples with f > f* in the region")
    return X[good], gap[good], np.atleast_1d(field.grad_norm(X[good]))


def fit_gpli_mu(field, region, exclude=EXCLUSION_RADIUS):
    """Best sampled gPLI constant: min ‖∇f‖² / (f − f*) away from the minimizer."""
    _require_fstar(field)
    _, gap, gn = _ratio_samples(field, region, exclude)
    return float(np.min(gn**2 / gap))


def lojasiewicz_exponent_probe(field, p, ray_points, direction=None):
    """‖∇f(x)‖^p / (f(x) − f*) at x = x* + r·u along a ray."""
    if p <= 0:
        raise ValueError("p must be positive")
    r = np.asarray(ray_points, dtype=float)
    if np.any(np.diff(r) <= 0) or np.any(r <= 0):
        raise ValueError("ray_points must be positive and increasing")
    u = np.zeros(field.dim)
    u[0] = 1.0
    if direction is not None:
        u = np.asarray(direction, dtype=float) / np.linalg.norm(direction)
    X = field.x_star + r[:, None] * u
    return np.atleast_1d(field.grad_norm(X)) ** p / np.atleast_1d(field.gap(X))


def fit_tail_exponent(alpha, s_top, n=64):
    """Least-squares slope of log α against log s over the decade [s_top/10, s_top]."""
    s = np.geomspace(s_top / 10.0, s_top, n)
    a = np.atleast_1d(alpha(s))
    if np.any(a <= 0) or not np.all(np.isfinite(a)):
        raise ValueError("alpha must be positive and finite on the tail decade")
    q, logc = np.polyfit(np.log(s), np.log(a), 1)
    return float(q), float(np.exp(logc))


@dataclass(frozen=True)
class StrongPLIResult:
    verdict: str
    finite_part: float
    tail_exponent: float
    tail_coefficient: float
    tail_bound: float
    s0: float
    tail_horizon: float

    @property
    def total_estimate(self):
        return self.finite_part + self.tail_bound

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {
            "total_estimate": self.total_estimate}


def _inverse_square_integral(alpha, lo, hi):
    """∫_lo^hi α(s)^(-2) ds, panelled per half decade in log coordinates."""
    if hi <= lo:
        return 0.0
    edges = np.log(np.geomspace(lo, hi, max(2, int(np.ceil(2 * np.log10(hi / lo))) + 1)))
    probe = np.exp(np.linspace(edges[0], edges[-1], 257))
    if np.any(np.atleast_1d(alpha(probe)) <= 0):
        raise ValueError("alpha must be positive on the integration interval")

    def integrand(u):
        s = np.exp(u)
        return s / float(alpha(s)) ** 2

    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=1e-12, epsrel=1e-10, limit=200)
        total += val
    return total


def strong_pli_check(alpha, s0, tail_horizon=1e8):
    """Classify ∫_{s0}^∞ α(s)^(-2) ds as convergent, divergent or inconclusive.

    The finite part is integrated on [s0, tail_horizon]; the tail is classified
    from a power law fitted on the last decade before the horizon.
    """
    if s0 <= 0:
        raise ValueError("s0 must be positive (the check works on the gap variable)")
    if tail_horizon <= 10 * s0:
        raise ValueError("tail_horizon must exceed 10*s0")
    finite = _inverse_square_integral(alpha, s0, tail_horizon)
    q, c = fit_tail_exponent(alpha, tail_horizon)
    if q > 0.5 + TAIL_MARGIN:
        verdict = "convergent"
        tail = tail_horizon ** (1.0 - 2.0 * q) / (c**2 * (2.0 * q - 1.0))
    elif q <= 0.5 + 1e-6:
        verdict = "divergent"
        tail = np.inf
    else:
        verdict = "inconclusive"
        tail = np.nan
    return StrongPLIResult(verdict, finite, q, c, float(tail), float(s0), float(tail_horizon))


def fit_power_alpha(field, region, safety=0.9, top_fraction=0.1, exclude=EXCLUSION_RADIUS):
    """Power-law comparison function c·s^q under the sampled gradient norms.

    The exponent is fitted on the largest gaps (log-log least squares, using
    the lower envelope per gap bin); c is ``safety`` times the smallest ratio
    ‖∇f‖/s^q over all samples so the inequality holds on the region.
    """
    _require_fstar(field)
    _, gap, gn = _ratio_samples(field, region, exclude)
    order = np.argsort(gap)
    gap, gn = gap[order], gn[order]
    top = gap >= gap[-1] * top_fraction
    q, _ = np.polyfit(np.log(gap[top]), np.log(gn[top]), 1)
    c = safety * float(np.min(gn / gap**q))
    return ComparisonFunction.power(q=float(q), c=c)


def check_exp_gradient_bound(field, X, scale=2.0):
    """Sampled check of exp(scale·‖∇f‖) ≥ 1 + (f − f*), compared in log form."""
    _require_fstar(field)
    X = np.asarray(X, dtype=float).reshape(-1, field.dim)
    gn = np.atleast_1d(field.grad_norm(X))
    gap = np.maximum(np.atleast_1d(field.gap(X)), 0.0)
    lhs, rhs = scale * gn, np.log1p(gap)
    slack = lhs - rhs + 1e-12 * (1.0 + rhs)
    i = int(np.argmin(slack))
    margin = float(slack[i])
    verdict = "pass" if margin >= 0 else "fail"
    wit = [] if verdict == "pass" else [{"x": X[i], "lhs_log": lhs[i], "rhs_log": rhs[i]}]
    return Certificate(
        claim="pli", verdict=verdict, margin=margin, witnesses=wit, field_spec=field.describe(),
        grid={"kind": "explicit", "seed": None, "counts": [int(X.shape[0])]},
        provenance={"scale": scale},
        details={"inequality": f"exp({scale}*grad_norm) >= 1 + f - f*",
                 "n_points": int(X.shape[0])})
