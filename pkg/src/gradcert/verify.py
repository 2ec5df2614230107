"""Sampled certificates: contraction regions, distances, decay rates, invariance, annulus IES."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

from .certificate import Certificate, grid_descriptor, refine_witness
from .flow import StepControls, integrate_many, settle_time
from .lognorm import mu2
from .metric import ConformalMetric
from .region import Region, SamplePlan, sphere_points

__all__ = ["curly_L", "matrix_form_L", "lemma2_residual", "certify_region",
           "riemann_distance_1d", "riemann_distance_bounds", "DecayFit", "decay_experiment",
           "empirical_decay", "forward_invariance_check", "annulus_ies_check",
           "critical_point_scan", "L_TOL", "RATE_TOL"]

L_TOL = 1e-6
RATE_TOL = 0.05
DIST_FLOOR = 1e-10


def curly_L(field, metric, x):
    """−λmin(∇²f(x)) − g′(f(x))·‖∇f(x)‖² for M = exp(2g(f)) I."""
    lmin = np.asarray(field.lambda_min(x), dtype=float)
    gp = np.asarray(metric.dV(field, x), dtype=float)
    gn = np.asarray(field.grad_norm(x), dtype=float)
    out = -lmin - gp * gn**2
    return float(out) if out.ndim == 0 else out


def matrix_form_L(field, metric, x):
    """Half the largest generalized eigenvalue of (MJ + JᵀM + Ṁ, M) with J = −∇²f.

    M = exp(2(V − V(x))) I is rescaled by its value at x, which leaves the
    generalized eigenvalues unchanged; Ṁ = 2 V̇ M with V̇ = g′(f)∇f·(−∇f).
    """
    x = np.asarray(x, dtype=float).reshape(field.dim)
    J = -field.hessian(x)
    grad = field.gradient(x)
    V_dot = float(metric.dV(field, x)) * float(grad @ -grad)
    M = np.eye(field.dim)
    S = M @ J + J.T @ M + 2.0 * V_dot * M
    return 0.5 * float(linalg.eigh(0.5 * (S + S.T), M, eigvals_only=True)[-1])


def lemma2_residual(field, metric, X):
    """𝓛_{e^{2V}I} − 𝓛_I − V̇ evaluated through the matrix form."""
    X = np.asarray(X, dtype=float).reshape(-1, field.dim)
    ident = ConformalMetric.identity(field.f_star)
    out = np.empty(X.shape[0])
    for k, x in enumerate(X):
        v_dot = -float(metric.dV(field, x)) * float(field.grad_norm(x)) ** 2
        out[k] = matrix_form_L(field, metric, x) - matrix_form_L(field, ident, x) - v_dot
    return out


def _bounds_dict(metric):
    if metric.log_beta_low is None:
        return None
    return {"beta_low": metric.beta_low, "alpha_up": metric.alpha_up,
            "log_beta_low": metric.log_beta_low, "log_alpha_up": metric.log_alpha_up}


def _metric_desc(metric):
    return {"family": metric.family, "profile": metric.profile.describe()}


def _witness_points(X, values, bad, x_star, fn=None, inside=None):
    """Worst violating sample plus the violating sample nearest the minimizer.

    With ``fn`` each witness is also refined to a nearby local maximum of the
    violation; the sampled point is kept alongside.
    """
    i = int(np.argmax(values))
    picks = [(i, "worst")]
    idx = np.flatnonzero(bad)
    if idx.size:
        j = idx[np.argmin(np.linalg.norm(X[idx] - x_star, axis=1))]
        if j != i:
            picks.append((j, "nearest_to_minimizer"))
    out = []
    for k, kind in picks:
        w = {"x": X[k], "value": values[k], "kind": kind}
        if fn is not None:
            xr, vr = refine_witness(fn, X[k], inside=inside)
            w.update(refined_x=xr, refined_value=vr)
        out.append(w)
    return out


def certify_region(field, metric, region, nu, tol=L_TOL, n_cross=10, seed=0):
    """Pass iff max sampled 𝓛_M ≤ −ν + tol; cross-checks the matrix form at random samples."""
    X = region.samples(field)
    gaps = np.atleast_1d(field.gap(X))
    if np.isfinite(metric.level_max) and gaps.max() > metric.level_max * (1 + 1e-9):
        raise ValueError(f"metric domain (gap <= {metric.level_max:.6g}) does not cover the "
                         f"region (max gap {gaps.max():.6g})")
    L = np.atleast_1d(curly_L(field, metric, X))
    worst = float(L.max())
    margin = -nu - worst + tol
    verdict = "pass" if margin >= 0 else "fail"
    bad = L > -nu + tol

    rng = np.random.default_rng(seed)
    pick = rng.choice(X.shape[0], size=min(n_cross, X.shape[0]), replace=False)
    mat = np.array([matrix_form_L(field, metric, X[k]) for k in pick])
    cross = float(np.max(np.abs(mat - L[pick])))
    agree = bool(np.all((mat <= -nu + tol) == (L[pick] <= -nu + tol)))

    bounded = metric.with_bounds(field, region)
    return Certificate(
        claim="contraction_region", verdict=verdict, margin=margin, region=region.to_dict(),
        grid=grid_descriptor(region, X.shape[0]),
        witnesses=[] if verdict == "pass" else _witness_points(
            X, L, bad, field.x_star, lambda z: curly_L(field, metric, z),
            lambda Z: region.contains(Z, field)),
        rates={"nu": nu}, bounds=_bounds_dict(bounded), field_spec=field.describe(),
        metric=_metric_desc(metric), provenance=dict(metric.provenance, tol=tol),
        details={"max_L": worst, "n_violations": int(bad.sum()),
                 "matrix_form_max_discrepancy": cross,
                 "matrix_form_consistent": bool(agree and cross < 1e-6),
                 "gap_range": [float(gaps.min()), float(gaps.max())]})


# -- distances -----------------------------------------------------------------------
def riemann_distance_1d(metric, field, x0, x1, epsrel=1e-10):
    """∫ exp(g(f(s))) ds between two points of a 1-D field (adaptive quadrature)."""
    if field.dim != 1:
        raise ValueError("riemann_distance_1d needs a one-dimensional field")
    a, b = sorted((float(x0), float(x1)))
    if a == b:
        return 0.0
    probe = np.linspace(a, b, 257)
    g_ref = float(np.max(metric.V(field, probe)))
    cuts = [a] + [float(field.x_star[0])] * bool(a < field.x_star[0] < b) + [b]

    def integrand(s):
        return math.exp(float(metric.V(field, s)) - g_ref)

    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=epsrel, limit=500)
        total += val
    return total * math.exp(g_ref) if g_ref < 700 else math.inf


def riemann_distance_bounds(metric, field, x0, x1):
    """(β^{1/2}‖Δ‖, min(α^{1/2}‖Δ‖, straight-line length)) from the metric's stored bounds."""
    if metric.log_beta_low is None:
        raise ValueError("metric bounds are not set")
    x0 = np.asarray(x0, dtype=float).reshape(1, field.dim)
    x1 = np.asarray(x1, dtype=float).reshape(1, field.dim)
    if metric.gap_range is not None and np.isfinite(metric.gap_range[1]):
        t = np.linspace(0.0, 1.0, 65)[:, None]
        seg_gap = np.atleast_1d(field.gap(x0 + t * (x1 - x0)))
        if seg_gap.max() > metric.gap_range[1] * (1 + 1e-9) or \
                seg_gap.min() < metric.gap_range[0] * (1 - 1e-9) - 1e-12:
            raise ValueError("segment leaves the region on which the metric bounds hold")
    lo, hi = metric.distance_bounds(field, x0, x1)
    return float(lo[0]), float(hi[0])


# -- decay experiments ------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class DecayFit:
    times: np.ndarray
    distance: np.ndarray
    kappa: float
    overshoot: float
    t_end: float
    n_fit: int
    metric_log_distance: np.ndarray = None


def _fit_one(times, d, t_end_traj, transient, floor, tail_level):
    below = np.flatnonzero(d < floor)
    t_end = min(t_end_traj, times[below[0]] if below.size else times[-1])
    if t_end <= 0 or d[0] < floor:
        raise ValueError("distance floor reached immediately (pair too close)")
    win = (times >= transient * t_end) & (times <= t_end) & (d >= floor)
    if tail_level is not None:
        win &= d <= tail_level
    if win.sum() < 5:
        return np.nan, np.nan, t_end, int(win.sum())
    slope = np.polyfit(times[win], np.log(d[win]), 1)[0]
    kappa = -float(slope)
    upto = (times <= t_end) & (d >= floor)
    with np.errstate(over="ignore"):
        c = float(np.max(d[upto] * np.exp(kappa * times[upto])) / d[0])
    return kappa, c, t_end, int(win.sum())


def decay_experiment(field, starts, horizon, mode="pairs", controls=None, transient=0.2,
                     floor=DIST_FLOOR, tail_level=None, metric=None):
    """Integrate pairs (P,2,d) or points (P,d) and fit log-distance slopes per run."""
    starts = np.asarray(starts, dtype=float)
    c = controls or StepControls()
    if mode == "pairs":
        starts = starts.reshape(-1, 2, field.dim)
        trajs = integrate_many(field, starts.reshape(-1, field.dim), horizon, c)
        runs = [(trajs[2 * k], trajs[2 * k + 1]) for k in range(starts.shape[0])]
    elif mode == "points":
        starts = starts.reshape(-1, field.dim)
        runs = [(t, None) for t in integrate_many(field, starts, horizon, c)]
    else:
        raise ValueError("mode must be 'pairs' or 'points'")
    fits = []
    for a, b in runs:
        times = a.times if b is None else np.union1d(a.times, b.times)
        xa = a.state_at(times)
        t_term = a.times[-1]
        if b is None:
            xb = np.broadcast_to(field.x_star, xa.shape)
        else:
            xb = b.state_at(times)
            t_term = min(t_term, b.times[-1])
        d = np.linalg.norm(xa - xb, axis=1)
        kappa, over, t_end, n = _fit_one(times, d, t_term, transient, floor, tail_level)
        logdm = None
        if metric is not None and field.dim == 1:
            logdm = metric.log_length_1d(field, xa[:, 0], xb[:, 0])
        fits.append(DecayFit(times, d, kappa, over, t_end, n, logdm))
    return fits


def empirical_decay(field, starts, horizon, mode="pairs", metric=None, rate=None,
                    log_overshoot_bound=None, controls=None, tail_level=None,
                    transient=0.2, floor=DIST_FLOOR, rate_tol=RATE_TOL, fits=None):
    """Fit per-run decay rates and overshoots and compare with the certified ones.

    Pass requires every κ̂ > 0, κ̂ ≥ (1 − rate_tol)·rate when ``rate`` is given,
    log ĉ ≤ ``log_overshoot_bound`` + log(1 + rate_tol) when given, and with a
    1-D metric the one-step inequality d_M(t+Δ) ≤ e^{−rate·Δ} d_M(t)(1 + 1e-6).
    Points mode with a metric also checks ‖φ(t,x0) − x*‖ ≤ β^{-1/2} d_M(x0,x*) e^{−rate·t}.
    """
    if fits is None:
        fits = decay_experiment(field, starts, horizon, mode, controls, transient, floor,
                                tail_level, metric if (metric is not None and rate is not None)
                                else None)
    kappas = np.array([f.kappa for f in fits])
    overs = np.array([f.overshoot for f in fits])
    claim = "ies" if mode == "pairs" else "sges"
    details = {"kappas": kappas, "overshoots": overs, "n_runs": len(fits),
               "transient_fraction": transient, "floor": floor, "tail_level": tail_level,
               "horizon": horizon}
    base = dict(claim=claim, field_spec=field.describe(),
                metric=None if metric is None else _metric_desc(metric),
                bounds=None if metric is None else _bounds_dict(metric),
                provenance={} if metric is None else dict(metric.provenance))
    if np.any(np.isnan(kappas)):
        k = int(np.flatnonzero(np.isnan(kappas))[0])
        return Certificate(verdict="inconclusive", margin=float("nan"),
                           witnesses=[{"run": k, "reason": "too few samples in fit window"}],
                           rates={"nu": rate, "kappa_fit": None, "overshoot_fit": None},
                           details=dict(details, reason="horizon too short for a rate fit"),
                           **base)
    slacks, witnesses = [], []
    k = int(np.argmin(kappas))
    slacks.append(kappas[k])
    if kappas[k] <= 0:
        witnesses.append({"run": k, "kappa": kappas[k], "check": "kappa>0"})
    if rate is not None:
        s = kappas[k] - (1.0 - rate_tol) * rate
        slacks.append(s)
        if s < 0:
            witnesses.append({"run": k, "kappa": kappas[k], "check": "kappa>=rate"})
    if log_overshoot_bound is not None:
        j = int(np.argmax(overs))
        s = log_overshoot_bound + math.log1p(rate_tol) - math.log(overs[j])
        slacks.append(s)
        details["log_overshoot_bound"] = log_overshoot_bound
        if s < 0:
            witnesses.append({"run": j, "overshoot": overs[j], "check": "overshoot"})
    if metric is not None and rate is not None and field.dim == 1 and mode == "pairs":
        worst = np.inf
        for r, f in enumerate(fits):
            ok = f.distance >= 1e-8
            ok = ok[:-1] & ok[1:] & (f.times[1:] <= f.t_end)
            dt = np.diff(f.times)
            excess = (f.metric_log_distance[1:] - f.metric_log_distance[:-1] + rate * dt
                      - math.log1p(1e-6))[ok]
            if excess.size:
                w = float(-excess.max())
                if w < worst:
                    worst = w
                    if w < 0:
                        witnesses.append({"run": r, "check": "one_step_metric_contraction",
                                          "excess": -w})
        if np.isfinite(worst):
            slacks.append(worst)
            details["one_step_min_slack"] = worst
    if metric is not None and rate is not None and mode == "points":
        worst = np.inf
        starts_arr = np.asarray(starts, dtype=float).reshape(-1, field.dim)
        for r, (f, x0) in enumerate(zip(fits, starts_arr)):
            if field.dim == 1:
                logd0 = float(metric.log_length_1d(field, x0[0], field.x_star[0])[0])
            else:
                logd0 = float(metric.log_distance_bounds(field, x0[None], field.x_star[None])[1][0])
            ok = (f.distance >= floor) & (f.times <= f.t_end)
            rhs = -0.5 * metric.log_beta_low + logd0 - rate * f.times[ok] + math.log1p(L_TOL)
            w = float(np.min(rhs - np.log(f.distance[ok])))
            if w < worst:
                worst = w
                if w < 0:
                    witnesses.append({"run": r, "check": "sges_bound", "excess": -w})
        slacks.append(worst)
        details["sges_bound_min_log_slack"] = worst
    margin = float(min(slacks))
    verdict = "fail" if witnesses else "pass"
    if verdict == "pass":
        margin = max(margin, 0.0)
    return Certificate(verdict=verdict, margin=margin, witnesses=witnesses,
                       rates={"nu": rate, "kappa_fit": float(kappas.min()),
                              "overshoot_fit": float(overs.max())},
                       details=details, **base)


# -- forward invariance and annulus IES -------------------------------------------------
def forward_invariance_check(field, center, radius, nu, boundary_samples=64, horizon=10.0,
                             controls=None, seed=0):
    """Integrate from the sphere of the ball; pass iff no trajectory leaves radius·(1+1e-6)."""
    center = np.asarray(center, dtype=float).reshape(field.dim)
    ball = Region.ball(center, radius, plan=SamplePlan.default(field.dim, seed))
    hyp = certify_region(field, ConformalMetric.identity(field.f_star), ball, nu)
    base = dict(claim="forward_invariance", region=ball.to_dict(), field_spec=field.describe(),
                rates={"nu": nu}, metric={"family": "identity"})
    if not hyp.passed:
        return Certificate(verdict="inconclusive", margin=float("nan"),
                           details={"hypothesis": "contraction_region: fail",
                                    "hypothesis_margin": hyp.margin,
                                    "hypothesis_witnesses": hyp.witnesses}, **base)
    starts = center + radius * sphere_points(field.dim, boundary_samples, seed)
    trajs = integrate_many(field, starts, horizon, controls)
    dmax = np.array([np.max(np.linalg.norm(t.states - center, axis=1)) for t in trajs])
    limit = radius * (1.0 + 1e-6)
    exits = np.flatnonzero(dmax > limit)
    margin = float(limit - dmax.max())
    return Certificate(
        verdict="fail" if exits.size else "pass", margin=margin,
        witnesses=[{"start": starts[k], "max_distance": dmax[k]} for k in exits[:5]],
        grid={"kind": "sphere", "seed": seed, "counts": [boundary_samples]},
        details={"n_exits": int(exits.size), "hypothesis": "contraction_region: pass",
                 "hypothesis_margin": hyp.margin, "horizon": horizon}, **base)


def critical_point_scan(field, region, n_starts=64, horizon=50.0, cluster_tol=1e-4,
                        controls=None):
    """Distinct limit points reached by the gradient flow from region samples.

    Starts sitting exactly on an unstable equilibrium stay there and are reported.
    """
    X = region.samples(field)
    if X.shape[0] > n_starts:
        X = X[np.linspace(0, X.shape[0] - 1, n_starts).astype(int)]
    ends = np.array([t.final_state for t in integrate_many(field, X, horizon, controls)])
    ends = ends[np.atleast_1d(field.grad_norm(ends)) < 1e-6]
    found = []
    for e in ends:
        if not any(np.linalg.norm(e - f) <= cluster_tol * (1 + np.linalg.norm(f)) for f in found):
            found.append(e)
    return np.array(found).reshape(-1, field.dim)


def _complement_proxy(K, factor):
    c = np.array(K.center) if K.center is not None else 0.5 * np.add(*K.bounding_box())
    if K.kind == "shell":
        r_in, r_out = K.inner, K.radius
    else:
        lo, hi = K.bounding_box()
        r_in, r_out = 0.0, float(np.linalg.norm(hi - lo) / 2)
    parts = []
    if r_in > 0:
        parts.append(Region.ball(c, r_in, plan=SamplePlan.default(len(c))))
    parts.append(Region.shell(c, r_out, factor * r_out, plan=SamplePlan.default(len(c))))
    return c, r_in, r_out, parts


def annulus_ies_check(field, K, nu, horizon=30.0, n_pairs=20, seed=0, eps_radius=None,
                      n_settle=64, shell_factor=3.0, tol=L_TOL, controls=None):
    """Overshoot e^{max(M+ν,0)T} from sampled curvature in K and settle times into B_ε(x*)."""
    if K.contains(field.x_star[None], field)[0]:
        raise ValueError("the minimizer lies inside K")
    c, r_in, r_out, proxy = _complement_proxy(K, shell_factor)
    base = dict(claim="annulus_ies", region=K.to_dict(), field_spec=field.describe(),
                metric={"family": "identity"})
    box = Region.ball(c, shell_factor * r_out, plan=SamplePlan.default(field.dim, seed))
    eq = critical_point_scan(field, box, controls=controls)
    if eq.shape[0] != 1:
        return Certificate(verdict="inconclusive", margin=float("nan"), rates={"nu": nu},
                           details={"hypothesis": "unique equilibrium probe failed",
                                    "equilibria": eq}, **base)
    ident = ConformalMetric.identity(field.f_star)
    hyps = [certify_region(field, ident, p, nu, tol) for p in proxy]
    if not all(h.passed for h in hyps):
        bad = next(h for h in hyps if not h.passed)
        return Certificate(verdict="inconclusive", margin=float("nan"), rates={"nu": nu},
                           details={"hypothesis": "contraction outside K: fail",
                                    "hypothesis_witnesses": bad.witnesses}, **base)
    XK = K.samples(field)
    M_hat = float(np.max([mu2(-h) for h in field.hessian(XK).reshape(-1, field.dim, field.dim)]))
    if eps_radius is None:
        eps_radius = 0.5 * float(np.min(np.linalg.norm(XK - field.x_star, axis=1)))
    starts = XK[np.linspace(0, XK.shape[0] - 1, min(n_settle, XK.shape[0])).astype(int)]
    settle = [settle_time(t, field.x_star, eps_radius)
              for t in integrate_many(field, starts, horizon, controls)]
    T_hat = float(np.max(settle))
    if not np.isfinite(T_hat):
        raise ValueError("settle time exceeds the horizon")
    log_c = max(M_hat + nu, 0.0) * T_hat

    rng = np.random.default_rng(seed)
    P = box.center + (shell_factor * r_out) * rng.uniform(-1, 1, size=(2 * n_pairs, field.dim))
    trajs = integrate_many(field, P, horizon, controls)
    worst, witnesses, overs = np.inf, [], []
    for k in range(n_pairs):
        a, b = trajs[2 * k], trajs[2 * k + 1]
        times = np.union1d(a.times, b.times)
        times = times[times <= min(a.times[-1], b.times[-1])]
        d = np.linalg.norm(a.state_at(times) - b.state_at(times), axis=1)
        ok = d >= DIST_FLOOR
        slack = (log_c - nu * times[ok] + math.log(d[0]) + math.log1p(tol)
                 - np.log(d[ok]))
        overs.append(float(np.max(d[ok] * np.exp(nu * times[ok])) / d[0]))
        w = float(slack.min())
        if w < 0:
            witnesses.append({"pair": k, "x0": P[2 * k], "z0": P[2 * k + 1], "log_excess": -w})
        worst = min(worst, w)
    verdict = "fail" if witnesses else "pass"
    return Certificate(
        verdict=verdict, margin=worst,
        witnesses=witnesses, rates={"nu": nu, "kappa_fit": None, "overshoot_fit": max(overs)},
        grid={"kind": "random", "seed": seed, "counts": [n_pairs]},
        provenance={"M_hat": M_hat, "T_hat": T_hat, "eps_radius": eps_radius,
                    "log_c_hat": log_c, "c_hat": math.exp(min(log_c, 700.0)),
                    "shell_factor": shell_factor},
        details={"complement_proxy": [p.to_dict() for p in proxy],
                 "margin_is_log_slack": True, "horizon": horizon}, **base)
