"""Conformal contraction metrics M(x) = exp(2 g(f(x))) I.

Profiles are functions of the gap s = f(x) − f*; every profile exposes
``value`` and an exact ``deriv`` so 𝓛 can use g′ without differencing.
Large metrics are handled in log space: ``log_beta_low``/``log_alpha_up``
store 2·inf g and 2·sup g.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline

from .certificate import jsonable
from .curvature import (ConcavityProfile, bracket_sublevel, level_grid, ray_samples,
                        upper_envelope, classify_concavity)
from .pli import ComparisonFunction, strong_pli_check

__all__ = ["bump_sigma", "bump_sigma_prime", "bump_integral", "ConstantProfile",
           "LinearProfile", "IntegralProfile", "PartitionProfile", "ConformalMetric",
           "HypothesisError", "strong_convexity_radius", "build_g_theorem1",
           "build_psi_theorem3", "partition_metrics", "build_theorem1_metric",
           "build_theorem2_metric", "build_theorem3_metric"]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


class HypothesisError(ValueError):
    """A construction's hypothesis does not hold on the sampled data."""


# -- smooth transition -----------------------------------------------------------
def _phi(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)


def bump_sigma(t):
    """C∞ step: 0 for t ≤ 0, 1 for t ≥ 1, φ(t)/(φ(t)+φ(1−t)) in between."""
    t = np.asarray(t, dtype=float)
    a, b = _phi(t), _phi(1.0 - t)
    out = np.where(t >= 1, 1.0, np.where(t <= 0, 0.0, a / np.where(a + b > 0, a + b, 1.0)))
    return float(out) if out.ndim == 0 else out


def bump_sigma_prime(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    tt = np.where(inside, t, 0.5)
    a, b = _phi(tt), _phi(1.0 - tt)
    da, db = a / tt**2, b / (1.0 - tt) ** 2
    out = np.where(inside, (da * b + a * db) / (a + b) ** 2, 0.0)
    return float(out) if out.ndim == 0 else out


def bump_integral(t):
    """∫₀ᵗ σ; equals ½ + (t − 1) for t ≥ 1 (σ(u) + σ(1−u) = 1)."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 1, 0.5 + (t - 1.0), 0.0)
    inside = (t > 0) & (t < 1)
    if np.any(inside):
        ti = t[inside]
        nodes = 0.5 * ti[:, None] * (_GL_X + 1.0)
        out[inside] = 0.5 * ti * np.sum(_GL_W * bump_sigma(nodes), axis=-1)
    return float(out) if out.ndim == 0 else out


# -- profiles ---------------------------------------------------------------------
def _out(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


class ConstantProfile:
    kind = "constant"

    def __init__(self, c=0.0):
        self.c = float(c)
        self.flat_below = np.inf

    def value(self, s):
        return _out(np.full(np.shape(s), self.c))

    def deriv(self, s):
        return _out(np.zeros(np.shape(s)))

    def limit(self):
        return self.c

    def describe(self):
        return {"kind": self.kind, "c": self.c}


class LinearProfile:
    """g(s) = c·s, i.e. M = exp(2c(f − f*)) I."""

    kind = "linear"

    def __init__(self, c):
        if c < 0:
            raise ValueError("c must be nonnegative")
        self.c = float(c)
        self.flat_below = 0.0

    def value(self, s):
        return _out(self.c * np.maximum(np.asarray(s, dtype=float), 0.0))

    def deriv(self, s):
        return _out(np.where(np.asarray(s, dtype=float) >= 0, self.c, 0.0))

    def limit(self):
        return np.inf if self.c > 0 else 0.0

    def describe(self):
        return {"kind": self.kind, "c": self.c}


class IntegralProfile:
    """g(s) = ∫_{s_start}^{s} w(τ)·σ((τ − s_start)/join) dτ, zero below ``s_start``.

    Node values come from panel-wise adaptive quadrature; between nodes g is
    the cubic Hermite interpolant through (g, w). g′ is evaluated exactly.
    Beyond the table g is extended by direct quadrature.
    """

    kind = "integral"

    def __init__(self, integrand, s_start, s_end, join_width=0.0, breakpoints=(),
                 per_decade=32, epsabs=1e-10, limit_fn=None, meta=None):
        if not (0 < s_start < s_end):
            raise ValueError("need 0 < s_start < s_end")
        self.w = integrand
        self.s_start = float(s_start)
        self.s_end = float(s_end)
        self.join = float(join_width)
        self.epsabs = epsabs
        self.flat_below = self.s_start
        self._limit_fn = limit_fn
        self.meta = dict(meta or {})
        nodes = [np.geomspace(self.s_start, self.s_end,
                              max(2, int(np.ceil(per_decade * np.log10(s_end / s_start))) + 1))]
        if self.join > 0:
            nodes.append(self.s_start + self.join * np.linspace(0, 1, 129))
        bp = np.asarray(breakpoints, dtype=float)
        nodes.append(bp[(bp > self.s_start) & (bp < self.s_end)])
        s = np.unique(np.concatenate(nodes))
        pieces = [self._quad(a, b) for a, b in zip(s[:-1], s[1:])]
        g = np.concatenate([[0.0], np.cumsum(pieces)])
        self.nodes, self.node_values = s, g
        self._spline = CubicHermiteSpline(s, g, self.deriv(s))

    def _raw(self, s):
        s = np.asarray(s, dtype=float)
        w = np.asarray(self.w(np.maximum(s, self.s_start)), dtype=float)
        if self.join > 0:
            w = w * bump_sigma((s - self.s_start) / self.join)
        return np.where(s > self.s_start, w, 0.0)

    def _quad(self, a, b):
        val, _ = integrate.quad(lambda t: float(self._raw(t)), a, b, epsabs=self.epsabs,
                                epsrel=1e-12, limit=200)
        return val

    def deriv(self, s):
        return _out(self._raw(s))

    def value(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape)
        inside = (s > self.s_start) & (s <= self.s_end)
        out[inside] = self._spline(s[inside])
        beyond = s > self.s_end
        if beyond.any():
            top = self.node_values[-1]
            out[beyond] = [top + self._quad_long(self.s_end, v) for v in s[beyond]]
        return _out(out)

    def _quad_long(self, a, b):
        edges = np.geomspace(a, b, max(2, int(np.ceil(4 * np.log10(b / a))) + 1))
        return sum(self._quad(lo, hi) for lo, hi in zip(edges[:-1], edges[1:]))

    def limit(self):
        """sup g = lim_{s→∞} g(s) when a tail rule is available, else +inf."""
        if self._limit_fn is None:
            return np.inf
        return float(self.node_values[-1] + self._limit_fn(self.s_end))

    def describe(self):
        return {"kind": self.kind, "s_start": self.s_start, "s_end": self.s_end,
                "join_width": self.join, "n_nodes": int(self.nodes.size), **self.meta}


class PartitionProfile:
    """ĝ = G∘g with G′ = 0 below a−ε, σ ramp up to a, 1 on [a, b], 1−σ ramp above b.

    G(v) = v on [a, b]; ``a=None`` drops the lower ramp and ``b=inf`` the upper one.
    """

    kind = "partition"

    def __init__(self, inner, a, b, eps):
        if eps <= 0:
            raise ValueError("eps must be positive")
        if a is not None and b is not None and not a < b:
            raise ValueError("need a < b")
        self.inner, self.a, self.b, self.eps = inner, a, b, float(eps)
        self.flat_below = inner.flat_below

    def G(self, v):
        v = np.asarray(v, dtype=float)
        out = v.copy()
        e = self.eps
        if self.a is not None:
            a = self.a
            t = (v - (a - e)) / e
            out = np.where(v < a, a - e / 2 + e * bump_integral(t), out)
        if self.b is not None and np.isfinite(self.b):
            b = self.b
            t = (v - b) / e
            up = b + e * (np.clip(t, 0, 1) - bump_integral(np.clip(t, 0, 1)))
            out = np.where(v > b, up, out)
        return out

    def G_prime(self, v):
        v = np.asarray(v, dtype=float)
        out = np.ones(v.shape)
        e = self.eps
        if self.a is not None:
            out = np.where(v < self.a, bump_sigma((v - (self.a - e)) / e), out)
        if self.b is not None and np.isfinite(self.b):
            out = np.where(v > self.b, 1.0 - bump_sigma((v - self.b) / e), out)
        return out

    def value(self, s):
        return _out(self.G(self.inner.value(s)))

    def deriv(self, s):
        return _out(self.G_prime(self.inner.value(s)) * np.asarray(self.inner.deriv(s)))

    def limit(self):
        if self.b is not None and np.isfinite(self.b):
            return self.b + self.eps / 2
        return float(self.G(self.inner.limit()))

    def describe(self):
        return {"kind": self.kind, "a": self.a, "b": self.b, "eps": self.eps,
                "inner": self.inner.describe()}


# -- metric -----------------------------------------------------------------------
def _exp_or_inf(x):
    return math.exp(x) if x < 709.0 else math.inf


@dataclass(frozen=True, eq=False)
class ConformalMetric:
    """M(x) = exp(2 g(f(x) − f*)) I with optional bounds on a stated region."""

    profile: object
    f_star: float = 0.0
    family: str = "custom"
    level_max: float = np.inf
    log_beta_low: float = None
    log_alpha_up: float = None
    bounds_region: dict = None
    gap_range: tuple = None
    provenance: dict = dc_field(default_factory=dict)

    @classmethod
    def identity(cls, f_star=0.0):
        return cls(ConstantProfile(0.0), f_star, "identity", log_beta_low=0.0, log_alpha_up=0.0)

    @classmethod
    def constant(cls, c, f_star=0.0):
        return cls(ConstantProfile(c), f_star, "constant", log_beta_low=2 * c,
                   log_alpha_up=2 * c)

    # level-variable API (absolute levels y)
    def g(self, y):
        return self.profile.value(np.asarray(y, dtype=float) - self.f_star)

    def g_prime(self, y):
        return self.profile.deriv(np.asarray(y, dtype=float) - self.f_star)

    @property
    def domain_start(self):
        return self.f_star + self.profile.flat_below

    # field-point API
    def V(self, field, X):
        return self.profile.value(field.gap(X))

    def dV(self, field, X):
        return self.profile.deriv(field.gap(X))

    @property
    def beta_low(self):
        return None if self.log_beta_low is None else _exp_or_inf(self.log_beta_low)

    @property
    def alpha_up(self):
        return None if self.log_alpha_up is None else _exp_or_inf(self.log_alpha_up)

    @property
    def log_ratio(self):
        """log(alpha_up / beta_low)."""
        return self.log_alpha_up - self.log_beta_low

    def sup_g(self):
        return self.profile.limit()

    def with_bounds(self, field, region):
        """Bounds over ``region`` from its sampled gap range (g is nondecreasing)."""
        gaps = np.atleast_1d(field.gap(region.samples(field)))
        lo = 0.0 if region.contains(field.x_star[None], field)[0] else float(gaps.min())
        hi = float(gaps.max())
        return replace(self, log_beta_low=2.0 * float(self.profile.value(lo)),
                       log_alpha_up=2.0 * float(self.profile.value(hi)),
                       bounds_region=region.to_dict(), gap_range=(lo, hi))

    def with_global_bounds(self):
        return replace(self, log_beta_low=2.0 * float(self.profile.value(0.0)),
                       log_alpha_up=2.0 * float(self.sup_g()), bounds_region={"kind": "global"},
                       gap_range=(0.0, np.inf))

    # distances
    def log_length_1d(self, field, a, b, panels=16):
        """log ∫_a^b exp(g(f(x))) dx (composite Gauss–Legendre, log-sum-exp scaled)."""
        a, b = np.broadcast_arrays(np.atleast_1d(np.asarray(a, dtype=float)),
                                   np.atleast_1d(np.asarray(b, dtype=float)))
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        xg, wg = np.polynomial.legendre.leggauss(16)
        t = (np.arange(panels)[:, None] + 0.5 * (xg[None, :] + 1.0)) / panels
        wt = np.broadcast_to(wg[None, :] / (2.0 * panels), t.shape).ravel()
        t = t.ravel()
        pts = lo[:, None] + (hi - lo)[:, None] * t[None, :]
        G = np.asarray(self.profile.value(field.gap(pts[..., None]))).reshape(pts.shape)
        gmax = G.max(axis=1)
        with np.errstate(divide="ignore"):
            out = gmax + np.log(np.sum(wt * np.exp(G - gmax[:, None]), axis=1)) + np.log(hi - lo)
        return np.where(hi > lo, out, -np.inf)

    def length_1d(self, field, a, b, panels=16):
        with np.errstate(over="ignore"):
            return np.exp(self.log_length_1d(field, a, b, panels))

    def log_distance_bounds(self, field, A, B):
        """log of (β^{1/2}‖Δ‖, min(α^{1/2}‖Δ‖, straight-line length))."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if self.log_beta_low is None or self.log_alpha_up is None:
            raise ValueError("metric bounds are not set")
        dist = np.linalg.norm(A - B, axis=1)
        with np.errstate(divide="ignore"):
            ld = np.log(dist)
        lower = 0.5 * self.log_beta_low + ld
        xg, wg = np.polynomial.legendre.leggauss(32)
        t = 0.5 * (xg + 1.0)
        P = A[:, None, :] + t[None, :, None] * (B - A)[:, None, :]
        G = np.asarray(self.profile.value(field.gap(P.reshape(-1, A.shape[1])))).reshape(
            P.shape[:2])
        gmax = G.max(axis=1)
        line = gmax + np.log(np.sum(0.5 * wg * np.exp(G - gmax[:, None]), axis=1)) + ld
        upper = np.minimum(0.5 * self.log_alpha_up + ld, line)
        return lower, upper

    def distance_bounds(self, field, A, B):
        lo, hi = self.log_distance_bounds(field, A, B)
        with np.errstate(over="ignore"):
            return np.exp(lo), np.exp(hi)

    # serialization
    def header(self):
        return jsonable({"family": self.family, "f_star": self.f_star,
                         "profile": self.profile.describe(), "level_max": self.level_max,
                         "bounds": {"beta_low": self.beta_low, "alpha_up": self.alpha_up,
                                    "log_beta_low": self.log_beta_low,
                                    "log_alpha_up": self.log_alpha_up},
                         "bounds_region": self.bounds_region, "gap_range": self.gap_range,
                         "provenance": self.provenance})

    def table(self, gaps=None):
        if gaps is None:
            top = self.level_max if np.isfinite(self.level_max) else 1e3
            lo = max(min(self.profile.flat_below, top) * 0.5, 1e-8) if np.isfinite(
                self.profile.flat_below) else 1e-8
            gaps = np.concatenate([[0.0], np.geomspace(lo, top, 400)])
        gaps = np.asarray(gaps, dtype=float)
        return self.f_star + gaps, np.atleast_1d(self.profile.value(gaps)), np.atleast_1d(
            self.profile.deriv(gaps))

    def write(self, csv_path, json_path=None, gaps=None):
        s, g, gp = self.table(gaps)
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "g", "g_prime"])
            for row in zip(s, g, gp):
                w.writerow([repr(float(v)) for v in row])
        if json_path is not None:
            with open(json_path, "w") as fh:
                json.dump(self.header(), fh, indent=2, sort_keys=True)


# -- constructions ------------------------------------------------------------------
def strong_convexity_radius(field, nu, eps, search_region=None, factor=1.25, n_radial=20001):
    """Largest δ on a geometric grid with sampled λmin > ν − ε wherever f − f* < δ."""
    lmin_star = field.lambda_min(field.x_star)
    if lmin_star <= nu - eps:
        raise HypothesisError(f"lambda_min at the minimizer is {lmin_star:.6g} <= nu - eps")
    R = bracket_sublevel(field, 1.0)
    for _ in range(4):
        Xr, _, U = ray_samples(field, R, None, n_radial)
        near = field.x_star + np.geomspace(1e-9 * R, R, 2001)[None, :, None] * U[:, None, :]
        X = np.vstack([Xr, near.reshape(-1, field.dim)])
        if search_region is not None:
            X = np.vstack([X, search_region.samples(field)])
        gaps = np.atleast_1d(field.gap(X))
        bad = np.atleast_1d(field.lambda_min(X)) <= nu - eps
        if bad.any():
            break
        R *= 4.0
    limit = float(gaps[bad].min()) if bad.any() else np.inf
    probed = float(np.min(np.atleast_1d(field.gap(field.x_star + R * U))))
    cap = min(limit, probed)
    delta = factor ** np.floor(np.log(cap) / np.log(factor))
    while delta >= cap:
        delta /= factor
    return float(delta)


def build_g_theorem1(profile: ConcavityProfile, alpha: ComparisonFunction, f_star, delta,
                     join_width=None, s_end=None):
    """g(s) = ∫_{δ/2}^{s} mᵘ/α² (gap variable), σ-smoothed over [δ/2, δ/2 + δ/10]."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if np.any(profile.values < 0):
        raise ValueError("m_upper must be nonnegative")
    join = delta / 10.0 if join_width is None else float(join_width)
    s_end = float(profile.gaps[-1]) if s_end is None else float(s_end)

    def w(s):
        return profile.at_gap(s) / np.asarray(alpha(s), dtype=float) ** 2

    prof = IntegralProfile(w, delta / 2.0, max(s_end, delta), join, breakpoints=profile.gaps,
                           meta={"integrand": "m_upper/alpha^2"})
    return ConformalMetric(prof, float(f_star), "theorem1_g", level_max=s_end,
                           provenance={"delta": delta, "join_width": join,
                                       "alpha": alpha.to_dict(), "margin": profile.margin})


def build_psi_theorem3(alpha, s0, c, f_star, join_width=0.0, s_end=None, tail_horizon=1e8):
    """g = c·ψ with ψ(s) = ∫_{s0}^{s} α^{-2}; rejects α failing the strong-PLI check."""
    if c <= 0:
        raise ValueError("c must be positive")
    res = strong_pli_check(alpha, s0, max(tail_horizon, 100 * s0))
    if res.verdict != "convergent":
        raise HypothesisError(f"strong-PLI check is {res.verdict} (tail exponent "
                              f"{res.tail_exponent:.4g})")
    s_end = 1e4 * s0 if s_end is None else float(s_end)

    def w(s):
        return c / np.asarray(alpha(s), dtype=float) ** 2

    def tail(a):
        r = strong_pli_check(alpha, a, max(tail_horizon, 100 * a))
        return c * r.total_estimate

    prof = IntegralProfile(w, s0, s_end, join_width, limit_fn=tail,
                           meta={"integrand": "c/alpha^2", "c": c})
    metric = ConformalMetric(prof, float(f_star), "theorem3_psi",
                             provenance={"s0": s0, "c": c, "alpha": alpha.to_dict(),
                                         "strong_pli": res.to_dict()})
    return metric.with_global_bounds()


def partition_metrics(metric, a, b, eps, nu=None):
    """Compose the metric's profile with the partition map G (constant outside (a−ε, b+ε))."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    g0 = float(metric.profile.value(0.0))
    if a is not None and a - eps < g0:
        raise ValueError(f"a - eps = {a - eps:.6g} lies below the profile's minimum {g0:.6g}")
    prof = PartitionProfile(metric.profile, a, b, eps)
    prov = dict(metric.provenance)
    prov.update({"partition_a": a, "partition_b": b, "partition_eps": eps})
    if nu is not None:
        prov["partition_nu"] = nu
    return replace(metric, profile=prof, family=metric.family + "+partition", provenance=prov,
                   log_beta_low=None, log_alpha_up=None, bounds_region=None, gap_range=None)


def build_theorem1_metric(field, alpha, nu, eps=None, delta=None, margin=0.1, level_max=None,
                          per_decade=20, region=None):
    """Full construction: δ, mᵘ, the g-integral and the partition at a = g(f*+δ).

    ``level_max`` (gap) defaults to 1.5 times the largest gap on ``region``,
    or 1e4·δ without a region.
    """
    if level_max is None and region is not None:
        level_max = 1.5 * float(np.max(field.gap(region.samples(field))))
    eps = 0.1 * nu if eps is None else float(eps)
    if not 0 < eps < nu:
        raise ValueError("need 0 < eps < nu")
    if delta is None:
        delta = strong_convexity_radius(field, nu, eps)
    if level_max is None:
        level_max = 1e4 * delta
    grid = level_grid(delta / 2.0, max(level_max, delta), per_decade)
    profile = upper_envelope(field, nu, field.f_star + grid, margin)
    base = build_g_theorem1(profile, alpha, field.f_star, delta)
    a = float(base.profile.value(delta))
    part_eps = 0.1 * (a - float(base.profile.value(delta / 2.0)))
    metric = partition_metrics(base, a, None, part_eps, nu)
    prov = dict(metric.provenance)
    prov.update({"nu": nu, "eps": eps, "delta": delta, "margin": margin,
                 "rate": nu - eps, "level_max": float(grid[-1])})
    return replace(metric, family="theorem1", provenance=prov).with_global_bounds(), profile


def build_theorem2_metric(field, m, nu_local, search_box, n_dirs=None):
    """exp(2c(f − f*)) I with c bisected so 𝓛 ≤ −l on X ⊃ S = {λmin < m}, then capped above b."""
    cls = classify_concavity(field, m, search_box)
    if not cls.state_bounded.passed:
        raise HypothesisError("state_bounded: fail")
    lstar = field.lambda_min(field.x_star)
    if lstar < nu_local:
        raise HypothesisError(f"lambda_min at the minimizer {lstar:.6g} < nu_local")
    ell = 0.1 * min(m, nu_local)
    lo, hi = search_box.bounding_box()
    R = float(np.max(np.linalg.norm(np.stack([lo, hi]) - field.x_star, axis=1)))
    Xr, _, _ = ray_samples(field, R, n_dirs, 20001)
    X = np.vstack([search_box.samples(field), Xr])
    lmin = np.atleast_1d(field.lambda_min(X))
    gaps = np.atleast_1d(field.gap(X))
    in_S = lmin < m
    gap_b = 1.05 * float(gaps[in_S].max()) if in_S.any() else float(np.quantile(gaps, 0.01))
    inside = gaps <= gap_b
    gn2 = np.atleast_1d(field.grad_norm(X[inside])) ** 2
    li = lmin[inside]

    def worst(c):
        return float(np.max(-li - c * gn2))

    c_lo, c_hi = 1e-4, 1e4
    if worst(c_hi) > -ell:
        raise HypothesisError(f"no c in [1e-4, 1e4] gives L <= -l; worst margin "
                              f"{-ell - worst(c_hi):.6g}")
    if worst(c_lo) <= -ell:
        c_hi = c_lo
    else:
        for _ in range(60):
            mid = math.sqrt(c_lo * c_hi)
            if worst(mid) <= -ell:
                c_hi = mid
            else:
                c_lo = mid
    c = c_hi
    b = c * gap_b
    eps = 0.1 * b
    metric = ConformalMetric(LinearProfile(c), float(field.f_star), "theorem2")
    metric = partition_metrics(metric, None, b, eps, m)
    prov = dict(metric.provenance)
    prov.update({"c": c, "l": ell, "m": m, "nu_local": nu_local, "gap_b": gap_b,
                 "rate": min(m, ell), "worst_L_on_X": worst(c)})
    return replace(metric, family="theorem2", provenance=prov).with_global_bounds()


def build_theorem3_metric(field, alpha, m, nu, eps=None, delta=None, beta=None):
    """c·ψ metric with c = β + m, smoothed at δ/2 and partitioned at a = g(f*+δ)."""
    eps = 0.1 * nu if eps is None else float(eps)
    if delta is None:
        delta = strong_convexity_radius(field, nu, eps)
    ell = 0.1 * min(m, nu)
    beta = ell if beta is None else float(beta)
    c = beta + m
    base = build_psi_theorem3(alpha, delta / 2.0, c, field.f_star, join_width=delta / 10.0)
    a = float(base.profile.value(delta))
    metric = partition_metrics(base, a, None, 0.1 * a, nu)
    prov = dict(metric.provenance)
    prov.update({"nu": nu, "eps": eps, "delta": delta, "m": m, "beta": beta, "c": c,
                 "l": ell, "rate": min(beta, nu - eps)})
    return replace(metric, family="theorem3", provenance=prov).with_global_bounds()
