"""Sampled regions: boxes, balls, ball shells and sublevel sets."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field as dc_field

import numpy as np
from scipy.stats import qmc

__all__ = ["SamplePlan", "Region", "sphere_points"]


@dataclass(frozen=True)
class SamplePlan:
    """How a region is sampled.

    kind: ``grid`` (tensor grid, ``counts`` per axis), ``log`` (tensor grid
    log-spaced away from 0, mirrored through the origin), ``random``
    (``n`` uniform samples) or ``sobol`` (``n`` scrambled Sobol points).
    """

    kind: str = "grid"
    counts: tuple = (41,)
    n: int = 10_000
    seed: int = 0
    log_min: float = 1e-6

    def __post_init__(self):
        if self.kind not in ("grid", "log", "random", "sobol"):
            raise ValueError(f"unknown sample plan kind {self.kind!r}")
        counts = self.counts
        if np.isscalar(counts):
            counts = (int(counts),)
        object.__setattr__(self, "counts", tuple(int(c) for c in counts))
        if any(c < 1 for c in self.counts) or self.n < 1:
            raise ValueError("sample counts must be positive")

    def axis_counts(self, dim):
        if len(self.counts) == 1:
            return self.counts * dim
        if len(self.counts) != dim:
            raise ValueError(f"plan has {len(self.counts)} axis counts for dimension {dim}")
        return self.counts

    @classmethod
    def default(cls, dim, seed=0):
        if dim <= 3:
            return cls("grid", (41,), seed=seed)
        return cls("sobol", n=10_000, seed=seed)


def _axis(lo, hi, count, kind, log_min):
    if count == 1:
        return np.array([0.5 * (lo + hi)])
    if kind != "log":
        return np.linspace(lo, hi, count)
    if lo >= 0.0 or hi <= 0.0:
        positive = lo >= 0.0
        a, b = (lo, hi) if positive else (-hi, -lo)
        a = max(a, log_min)
        pts = np.geomspace(a, b, count)
        return pts if positive else -pts[::-1]
    n_neg = max(1, int(round((count - 1) * (-lo) / (hi - lo))))
    n_pos = max(1, count - 1 - n_neg)
    neg = -np.geomspace(log_min, -lo, n_neg)[::-1]
    pos = np.geomspace(log_min, hi, n_pos)
    return np.concatenate([neg, [0.0], pos])


def sphere_points(dim, n, seed=0):
    """``n`` deterministic unit vectors; ±1 alternating in one dimension."""
    if dim == 1:
        return np.where(np.arange(n) % 2 == 0, 1.0, -1.0)[:, None]
    if dim == 2:
        ang = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass(frozen=True)
class Region:
    kind: str
    lower: tuple = None
    upper: tuple = None
    center: tuple = None
    radius: float = None
    inner: float = 0.0
    level: float = None
    plan: SamplePlan = dc_field(default=None)

    def __post_init__(self):
        for name in ("lower", "upper", "center"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, tuple(float(v) for v in np.atleast_1d(val)))
        if self.kind in ("box", "sublevel"):
            if self.lower is None or self.upper is None or len(self.lower) != len(self.upper):
                raise ValueError("box regions need lower/upper of equal length")
            if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
                raise ValueError("empty box: need lower < upper on every axis")
        elif self.kind in ("ball", "shell"):
            if self.center is None or self.radius is None or self.radius <= 0:
                raise ValueError("ball regions need a center and a positive radius")
            if self.kind == "shell" and not (0.0 <= self.inner < self.radius):
                raise ValueError("shell needs 0 <= inner < radius")
        else:
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.plan is None:
            object.__setattr__(self, "plan", SamplePlan.default(self.dim))

    # -- constructors ---------------------------------------------------
    @classmethod
    def box(cls, lower, upper, plan=None, **plan_kw):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        return cls("box", lower=lower, upper=upper, plan=plan or _plan(len(lower), plan_kw))

    @classmethod
    def cube(cls, half_width, dim=1, plan=None, **plan_kw):
        hw = float(half_width)
        return cls.box([-hw] * dim, [hw] * dim, plan=plan, **plan_kw)

    @classmethod
    def ball(cls, center, radius, plan=None, **plan_kw):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return cls("ball", center=center, radius=float(radius),
                   plan=plan or _plan(len(center), plan_kw))

    @classmethod
    def shell(cls, center, inner, outer, plan=None, **plan_kw):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return cls("shell", center=center, radius=float(outer), inner=float(inner),
                   plan=plan or _plan(len(center), plan_kw))

    @classmethod
    def sublevel(cls, level, lower, upper, plan=None, **plan_kw):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        return cls("sublevel", lower=lower, upper=upper, level=float(level),
                   plan=plan or _plan(len(lower), plan_kw))

    # -- geometry -------------------------------------------------------
    @property
    def dim(self):
        return len(self.lower) if self.lower is not None else len(self.center)

    def bounding_box(self):
        if self.kind in ("box", "sublevel"):
            return np.array(self.lower), np.array(self.upper)
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    def contains(self, X, field=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind in ("box", "sublevel"):
            lo, hi = self.bounding_box()
            inside = np.all((X >= lo) & (X <= hi), axis=1)
            if self.kind == "sublevel":
                if field is None:
                    raise ValueError("sublevel regions need the field")
                inside &= field.value(X) <= self.level
            return inside
        d = np.linalg.norm(X - np.array(self.center), axis=1)
        inside = d <= self.radius
        if self.kind == "shell":
            inside &= d >= self.inner
        return inside

    def outer_fraction(self, X):
        """0 at the center of the region, 1 on its outer boundary."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind in ("box", "sublevel"):
            lo, hi = self.bounding_box()
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            return np.max(np.abs(X - mid) / half, axis=1)
        return np.linalg.norm(X - np.array(self.center), axis=1) / self.radius

    def boundary_mask(self, X, shell=0.05):
        return self.outer_fraction(X) >= 1.0 - shell

    # -- sampling -------------------------------------------------------
    def samples(self, field=None):
        plan, dim = self.plan, self.dim
        lo, hi = self.bounding_box()
        if plan.kind in ("grid", "log"):
            axes = [_axis(a, b, n, plan.kind, plan.log_min)
                    for a, b, n in zip(lo, hi, plan.axis_counts(dim))]
            mesh = np.meshgrid(*axes, indexing="ij")
            X = np.stack([m.ravel() for m in mesh], axis=1)
        elif self.kind in ("ball", "shell"):
            rng = np.random.default_rng(plan.seed)
            dirs = rng.standard_normal((plan.n, dim))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            r_in = self.inner if self.kind == "shell" else 0.0
            u = rng.uniform(r_in ** dim, self.radius ** dim, plan.n)
            X = np.array(self.center) + dirs * u[:, None] ** (1.0 / dim)
            return X
        elif plan.kind == "random":
            rng = np.random.default_rng(plan.seed)
            X = lo + (hi - lo) * rng.uniform(size=(plan.n, dim))
        else:
            sob = qmc.Sobol(dim, scramble=True, seed=plan.seed)
            m = int(np.ceil(np.log2(plan.n)))
            X = lo + (hi - lo) * sob.random_base2(m)[: plan.n]
        if self.kind != "box":
            X = X[self.contains(X, field)]
        if X.shape[0] == 0:
            raise ValueError("region sample plan produced no points")
        return X

    def to_dict(self):
        out = {"kind": self.kind}
        for key in ("lower", "upper", "center"):
            if getattr(self, key) is not None:
                out[key] = list(getattr(self, key))
        if self.kind in ("ball", "shell"):
            out["radius"] = self.radius
        if self.kind == "shell":
            out["inner"] = self.inner
        if self.kind == "sublevel":
            out["level"] = self.level
        plan = asdict(self.plan)
        plan["counts"] = list(plan["counts"])
        out["plan"] = plan
        return out

    @classmethod
    def from_dict(cls, spec):
        spec = dict(spec)
        plan = spec.pop("plan", None)
        if isinstance(plan, dict):
            plan = SamplePlan(**plan)
        kind = spec.pop("kind")
        if kind == "cube":
            dim = int(spec.pop("dim", 1))
            hw = float(spec.pop("half_width"))
            return cls.box([-hw] * dim, [hw] * dim, plan=plan)
        return cls(kind, plan=plan, **spec)


def _plan(dim, kw):
    if not kw:
        return SamplePlan.default(dim)
    return SamplePlan(**kw)
