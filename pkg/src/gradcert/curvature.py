"""Hessian-spectrum analysis: m(x), level maxima m*(y), the envelope mᵘ, concavity classes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .certificate import Certificate, grid_descriptor
from .region import Region, SamplePlan, sphere_points

__all__ = ["ConcavityProfile", "ConcavityClassification", "lambda_min_hessian",
           "classify_concavity", "negative_curvature_measure", "m_star", "upper_envelope",
           "level_grid", "ray_samples", "bracket_sublevel"]

OUTER_SHELL = 0.1


def lambda_min_hessian(field, x):
    return field.lambda_min(x)


@dataclass(frozen=True)
class ConcavityClassification:
    state_bounded: Certificate
    magnitude_bounded: Certificate


def classify_concavity(field, m, search_box, shell=OUTER_SHELL, tol=1e-9):
    """Sampled state-bounded / magnitude-bounded concavity verdicts for threshold ``m``.

    State-bounded passes when no sample of {λmin < m} lies in the outer
    ``shell`` fraction of the box; magnitude-bounded passes when min λmin > −m.
    """
    if m <= 0:
        raise ValueError("m must be positive")
    X = search_box.samples(field)
    if X.shape[0] < 2:
        raise ValueError("degenerate search box")
    lmin = np.atleast_1d(field.lambda_min(X))
    outer = search_box.boundary_mask(X, shell)
    if not outer.any():
        raise ValueError("search box sample plan has no points in the outer shell")
    bad = lmin < m
    frac = search_box.outer_fraction(X)
    common = dict(region=search_box.to_dict(), grid=grid_descriptor(search_box, X.shape[0]),
                  field_spec=field.describe(), provenance={"m": m, "outer_shell": shell})

    bad_outer = bad & outer
    sb_margin = float(np.min(lmin[outer] - m)) + tol
    if bad_outer.any():
        idx = np.flatnonzero(bad_outer)
        j = idx[np.argmax(frac[idx])]
        sb = Certificate(claim="concavity", verdict="fail", margin=min(sb_margin, -tol),
                         witnesses=[{"x": X[j], "lambda_min": lmin[j],
                                     "outer_fraction": frac[j]}],
                         details={"class": "state_bounded", "n_outer_violations":
                                  int(bad_outer.sum()), "n_outer": int(outer.sum())}, **common)
    else:
        extent = float(frac[bad].max()) if bad.any() else 0.0
        sb = Certificate(claim="concavity", verdict="pass", margin=max(sb_margin, 0.0),
                         details={"class": "state_bounded", "n_outer": int(outer.sum()),
                                  "violation_extent_fraction": extent,
                                  "n_violations": int(bad.sum())}, **common)

    i = int(np.argmin(lmin))
    mb_margin = float(lmin[i] + m)
    if mb_margin > 0:
        mb = Certificate(claim="concavity", verdict="pass", margin=mb_margin,
                         details={"class": "magnitude_bounded", "min_lambda_min": lmin[i]},
                         **common)
    else:
        mb = Certificate(claim="concavity", verdict="fail", margin=mb_margin,
                         witnesses=[{"x": X[i], "lambda_min": lmin[i]}],
                         details={"class": "magnitude_bounded", "min_lambda_min": lmin[i]},
                         **common)
    return ConcavityClassification(sb, mb)


def negative_curvature_measure(field, region):
    """Fraction of (uniform) region samples with λmin(∇²f) < 0."""
    X = region.samples(field)
    return float(np.mean(np.atleast_1d(field.lambda_min(X)) < 0.0))


# -- level sets -----------------------------------------------------------------
def bracket_sublevel(field, gap_level, start_radius=1.0, n_dirs=64, max_doublings=60):
    """Radius R of a ball about x* whose boundary sphere has f − f* > ``gap_level``."""
    U = sphere_points(field.dim, n_dirs)
    R = float(start_radius)
    for _ in range(max_doublings):
        if np.min(np.atleast_1d(field.gap(field.x_star + R * U))) > gap_level:
            return R
        R *= 2.0
    raise ValueError("could not bracket the sublevel set; is the field proper?")


def _check_properness(field, gap_level, region):
    X = region.samples(field)
    shell = region.boundary_mask(X, 0.05)
    if not shell.any() or np.min(np.atleast_1d(field.gap(X[shell]))) <= gap_level:
        raise ValueError("search region does not contain the sublevel set "
                         "(f <= level on its boundary shell)")
    return X


def ray_samples(field, R, n_dirs=None, n_radial=20001):
    """Points x* + r·u on a radial grid over [0, R] along deterministic directions."""
    if n_dirs is None:
        n_dirs = {1: 2, 2: 64, 3: 256}.get(field.dim, 512)
    U = sphere_points(field.dim, n_dirs)
    r = np.linspace(0.0, R, n_radial)[1:]
    X = field.x_star + (r[None, :, None] * U[:, None, :])
    return X.reshape(-1, field.dim), r, U


def _level_crossings(field, gap_level, R, n_dirs=None, n_radial=4001):
    """Exact points of the level set {f − f* = gap_level} along rays from x*."""
    _, r, U = ray_samples(field, R, n_dirs, n_radial)
    r = np.union1d(np.concatenate([[0.0], r]), np.geomspace(1e-9 * R, R, 2001))
    pts = []
    for u in U:
        g = np.atleast_1d(field.gap(field.x_star + r[:, None] * u)) - gap_level
        idx = np.flatnonzero(np.sign(g[:-1]) != np.sign(g[1:]))
        for k in idx:
            root = optimize.brentq(lambda t: field.gap(field.x_star + t * u) - gap_level,
                                   r[k], r[k + 1], xtol=1e-14, rtol=1e-15)
            pts.append(field.x_star + root * u)
    return np.array(pts).reshape(-1, field.dim)


def _refine_on_level(field, x, nu, gap_level, iters=30):
    """Projected gradient ascent of m on the level set (finite-difference gradient of λmin)."""
    if field.dim == 1:
        return x, nu - field.lambda_min(x)

    def project(z):
        for _ in range(20):
            gr = field.gradient(z)
            n2 = gr @ gr
            if n2 == 0:
                break
            z = z - (field.gap(z) - gap_level) * gr / n2
        return z

    best = nu - field.lambda_min(x)
    step = 1e-2 * max(1.0, np.linalg.norm(x - field.x_star))
    E = np.eye(field.dim) * 1e-6
    for _ in range(iters):
        d = np.array([(field.lambda_min(x - e) - field.lambda_min(x + e)) / 2e-6 for e in E])
        gr = field.gradient(x)
        d -= (d @ gr) / max(gr @ gr, 1e-300) * gr
        if np.linalg.norm(d) == 0:
            break
        moved = False
        while step > 1e-10:
            z = project(x + step * d / np.linalg.norm(d))
            val = nu - field.lambda_min(z)
            if val > best:
                x, best, moved = z, val, True
                break
            step *= 0.5
        if not moved:
            break
    return x, best


def m_star(field, y, nu, level_tol=None, search_region=None, return_point=False):
    """max of m(x) = ν − λmin(∇²f(x)) over the level set f(x) = y (sampled and refined)."""
    gap_level = float(y) - field.f_star
    if gap_level <= 0:
        raise ValueError("level must exceed f*")
    tol = 1e-3 * gap_level if level_tol is None else float(level_tol)
    if search_region is None:
        R = bracket_sublevel(field, gap_level)
        search_region = Region.ball(field.x_star, R, plan=SamplePlan.default(field.dim))
        X = search_region.samples(field)
    else:
        X = _check_properness(field, gap_level, search_region)
        lo, hi = search_region.bounding_box()
        R = float(np.max(np.abs(np.concatenate([lo, hi]) - np.concatenate(
            [field.x_star, field.x_star]))) * np.sqrt(field.dim))
    band = X[np.abs(np.atleast_1d(field.gap(X)) - gap_level) <= tol]
    exact = _level_crossings(field, gap_level, R)
    cand = np.vstack([band, exact]) if band.size else exact
    if cand.shape[0] == 0:
        raise ValueError("no samples hit the level band; increase level_tol or refine the grid")
    vals = nu - np.atleast_1d(field.lambda_min(cand))
    i = int(np.argmax(vals))
    x, best = _refine_on_level(field, cand[i], nu, gap_level)
    best = max(best, float(vals[i]))
    return (best, x) if return_point else best


# -- envelope ---------------------------------------------------------------------
def level_grid(gap_lo, gap_hi, per_decade=20):
    n = max(2, int(np.ceil(per_decade * np.log10(gap_hi / gap_lo))) + 1)
    return np.geomspace(gap_lo, gap_hi, n)


@dataclass(frozen=True, eq=False)
class ConcavityProfile:
    """Nondecreasing piecewise-linear mᵘ on the gap variable s = y − f*.

    ``values[i]`` dominates m over the level slabs adjacent to ``gaps[i]``
    by at least ``margin``; beyond the last breakpoint mᵘ continues with
    ``tail_slope`` (0 for state-bounded fields).
    """

    nu: float
    f_star: float
    gaps: np.ndarray
    m_star_samples: np.ndarray
    values: np.ndarray
    margin: float
    tail_slope: float

    @property
    def y_grid(self):
        return self.f_star + self.gaps

    def at_gap(self, s):
        s = np.asarray(s, dtype=float)
        out = np.interp(s, self.gaps, self.values)
        out = np.where(s > self.gaps[-1], self.values[-1] + self.tail_slope * (s - self.gaps[-1]),
                       out)
        return float(out) if out.ndim == 0 else out

    def __call__(self, y):
        return self.at_gap(np.asarray(y, dtype=float) - self.f_star)

    def breakpoint_slack(self):
        return float(np.min(self.values - np.maximum(self.m_star_samples, 0.0)))

    def to_dict(self):
        return {"nu": self.nu, "f_star": self.f_star, "gaps": self.gaps.tolist(),
                "m_star": self.m_star_samples.tolist(), "values": self.values.tolist(),
                "margin": self.margin, "tail_slope": self.tail_slope}

    @classmethod
    def from_dict(cls, d):
        return cls(d["nu"], d["f_star"], np.asarray(d["gaps"]), np.asarray(d["m_star"]),
                   np.asarray(d["values"]), d["margin"], d["tail_slope"])


def _slab_max(gaps, vals, edges):
    """max of vals over samples with gap in [edges[i], edges[i+1]] (−inf when empty)."""
    out = np.full(len(edges) - 1, -np.inf)
    idx = np.searchsorted(edges, gaps, side="right") - 1
    ok = (idx >= 0) & (idx < len(edges) - 1)
    np.maximum.at(out, idx[ok], vals[ok])
    # samples sitting exactly on an interior edge belong to both neighbours
    on_edge = np.isin(gaps, edges[1:-1])
    if on_edge.any():
        j = np.searchsorted(edges, gaps[on_edge]) - 1
        np.maximum.at(out, j, vals[on_edge])
    return out


def upper_envelope(field, nu, y_grid, margin=0.1, search_region=None, state_bounded=None,
                   n_radial=None, n_dirs=None):
    """Build mᵘ from level maxima and slab maxima of m = ν − λmin on ray and region samples."""
    if margin <= 0:
        raise ValueError("margin must be positive")
    y_grid = np.asarray(y_grid, dtype=float)
    gaps = y_grid - field.f_star
    if np.any(np.diff(gaps) <= 0) or gaps[0] <= 0:
        raise ValueError("y_grid must be increasing and start above f*")
    R = bracket_sublevel(field, gaps[-1])
    if search_region is None:
        search_region = Region.ball(field.x_star, R, plan=SamplePlan.default(field.dim))
    else:
        _check_properness(field, gaps[-1], search_region)
    if n_radial is None:
        n_radial = int(min(2_000_001, max(20_001, 200 * R)))
    Xr, _, _ = ray_samples(field, R, n_dirs, n_radial)
    X = np.vstack([search_region.samples(field), Xr])
    sg = np.atleast_1d(field.gap(X))
    sm = nu - np.atleast_1d(field.lambda_min(X))

    mstar = np.array([_level_max_exact(field, nu, g, R, n_dirs) for g in gaps])
    slab = _slab_max(sg, sm, gaps)
    slab = _refine_slabs(field, nu, X, sg, sm, gaps, slab, R / (n_radial - 1))
    left = np.concatenate([[-np.inf], slab])
    right = np.concatenate([slab, [-np.inf]])
    below = sm[sg < gaps[0]]
    left[0] = below.max() if below.size else -np.inf
    top = np.maximum.reduce([mstar, left, right])
    vals = margin + np.maximum(top, 0.0)
    vals = np.maximum.accumulate(vals)

    if state_bounded is None:
        # any sample with m > 0 (λmin < ν) in the outer tenth of the probed ball?
        far = np.linalg.norm(X - field.x_star, axis=1) >= (1.0 - OUTER_SHELL) * R
        state_bounded = not np.any(sm[far] > 0.0)
    tail = 0.0
    if not state_bounded and len(gaps) > 1:
        tail = max(0.0, (vals[-1] - vals[-2]) / (gaps[-1] - gaps[-2]))
    return ConcavityProfile(nu=float(nu), f_star=float(field.f_star), gaps=gaps,
                            m_star_samples=mstar, values=vals, margin=float(margin),
                            tail_slope=float(tail))


def _refine_slabs(field, nu, X, sg, sm, edges, slab, h):
    """Locally maximize m along the ray through each slab's best sample."""
    idx = np.searchsorted(edges, sg, side="right") - 1
    ok = np.flatnonzero((idx >= 0) & (idx < len(edges) - 1))
    order = ok[np.lexsort((sm[ok], idx[ok]))]
    last = np.flatnonzero(np.diff(np.append(idx[order], -1)) != 0)
    out = slab.copy()
    for j in order[last]:
        k = idx[j]
        d = X[j] - field.x_star
        r = float(np.linalg.norm(d))
        if r == 0.0:
            continue
        u = d / r

        def neg_m(t):
            return field.lambda_min(field.x_star + t * u) - nu

        res = optimize.minimize_scalar(neg_m, bounds=(max(r - h, 0.0), r + h), method="bounded",
                                       options={"xatol": 1e-12 * max(1.0, r)})
        z = field.x_star + res.x * u
        if edges[k] <= field.gap(z) <= edges[k + 1]:
            out[k] = max(out[k], -float(res.fun))
    return out


def _level_max_exact(field, nu, gap_level, R, n_dirs):
    pts = _level_crossings(field, gap_level, R, n_dirs)
    if pts.shape[0] == 0:
        raise ValueError(f"level {gap_level} not reached along any ray")
    return float(np.max(nu - np.atleast_1d(field.lambda_min(pts))))
