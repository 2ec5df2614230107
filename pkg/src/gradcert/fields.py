"""Objective catalog with closed-form differentials and finite-difference oracles.

Every field evaluates on arrays of points of shape ``(..., dim)``; 1-D fields
also accept bare scalars and flat arrays of abscissae.
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import PPoly

from .region import Region  # noqa: F401  (re-exported: Region lives next to the catalog)

__all__ = [
    "ScalarField",
    "CallableField",
    "QuadraticField",
    "CosExampleField",
    "AsinhExampleField",
    "DimpledQuadratic",
    "StaircaseRadial",
    "Region",
    "catalog_get",
    "catalog_names",
    "fd_gradient",
    "fd_hessian",
    "refine_minimizer",
]

# kernel codes understood by gradcert._kernels
KERNEL_QUADRATIC, KERNEL_COS, KERNEL_ASINH, KERNEL_DIMPLED, KERNEL_STAIRCASE = range(5)


class ScalarField:
    """Objective f with value, gradient and Hessian.

    Subclasses implement the batch hooks ``_value``, ``_grad`` and ``_hess`` on
    ``(N, dim)`` arrays. ``_gap`` (f - f*) and ``_lmin`` may be overridden
    when a numerically better closed form exists.
    """

    name = "field"
    smoothness = "C_infinity"
    kernel = None
    # length of the narrowest curvature feature; integrators cap each step's
    # displacement by a fraction of it so no feature is stepped over
    feature_scale = None

    def __init__(self, dim, params=None):
        if int(dim) < 1:
            raise ValueError("dim must be a positive integer")
        self.dim = int(dim)
        self.params = dict(params or {})
        self.x_star = np.zeros(self.dim)
        self.f_star = 0.0

    # -- shape handling -------------------------------------------------
    def _points(self, x):
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0:
            arr = arr[None]
        if arr.shape[-1] != self.dim:
            if self.dim == 1:
                arr = arr[..., None]
            else:
                raise ValueError(f"expected trailing dimension {self.dim}, got shape {arr.shape}")
        lead = arr.shape[:-1]
        return arr.reshape(-1, self.dim), lead

    def _scalar_out(self, vals, lead):
        vals = vals.reshape(lead)
        return float(vals) if vals.ndim == 0 else vals

    # -- public API -----------------------------------------------------
    def value(self, x):
        X, lead = self._points(x)
        return self._scalar_out(self._value(X), lead)

    def gap(self, x):
        """f(x) - f*, evaluated without cancellation where the family allows it."""
        X, lead = self._points(x)
        return self._scalar_out(self._gap(X), lead)

    def gradient(self, x):
        X, lead = self._points(x)
        return self._grad(X).reshape(lead + (self.dim,))

    def hessian(self, x):
        X, lead = self._points(x)
        return self._hess(X).reshape(lead + (self.dim, self.dim))

    def lambda_min(self, x):
        X, lead = self._points(x)
        return self._scalar_out(self._lmin(X), lead)

    def grad_norm(self, x):
        X, lead = self._points(x)
        return self._scalar_out(np.linalg.norm(self._grad(X), axis=-1), lead)

    # -- defaults -------------------------------------------------------
    def _gap(self, X):
        return self._value(X) - self.f_star

    def _lmin(self, X):
        return np.linalg.eigvalsh(self._hess(X))[:, 0]

    def describe(self):
        return {"name": self.name, "params": dict(self.params)}

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, params={self.params})"


class CallableField(ScalarField):
    """Field assembled from user callables.

    ``value``/``gradient``/``hessian`` take one point of shape ``(dim,)``
    unless ``vectorized=True``, in which case they receive ``(N, dim)``.
    """

    smoothness = "C2"

    def __init__(self, name, dim, value, gradient, hessian, x_star, f_star=None,
                 vectorized=False, params=None):
        super().__init__(dim, params)
        self.name = name
        self._fv, self._fg, self._fh = value, gradient, hessian
        self._vectorized = vectorized
        self.x_star = np.asarray(x_star, dtype=float).reshape(self.dim)
        self.f_star = float(self.value(self.x_star)) if f_star is None else float(f_star)

    def _map(self, fn, X, shape):
        if self._vectorized:
            return np.asarray(fn(X), dtype=float).reshape((X.shape[0],) + shape)
        return np.array([np.asarray(fn(x), dtype=float).reshape(shape) for x in X]).reshape(
            (X.shape[0],) + shape)

    def _value(self, X):
        return self._map(self._fv, X, ())

    def _grad(self, X):
        return self._map(self._fg, X, (self.dim,))

    def _hess(self, X):
        return self._map(self._fh, X, (self.dim, self.dim))


class QuadraticField(ScalarField):
    """f(x) = ½‖x‖²."""

    name = "quadratic"
    kernel_code = KERNEL_QUADRATIC

    def __init__(self, dim=1):
        super().__init__(dim, {"dim": int(dim)})
        self.kernel = (KERNEL_QUADRATIC, np.zeros(1), np.zeros(2), np.zeros((1, 1)))

    def _value(self, X):
        return 0.5 * np.einsum("ij,ij->i", X, X)

    def _grad(self, X):
        return X.copy()

    def _hess(self, X):
        return np.broadcast_to(np.eye(self.dim), (X.shape[0], self.dim, self.dim)).copy()

    def _lmin(self, X):
        return np.ones(X.shape[0])


class CosExampleField(ScalarField):
    """f(x) = ½x² − 2cos(x): PL with constant ¼ yet concave on an unbounded set."""

    name = "cos_example"

    def __init__(self):
        super().__init__(1, {})
        self.f_star = -2.0
        self.kernel = (KERNEL_COS, np.zeros(1), np.zeros(2), np.zeros((1, 1)))

    def _value(self, X):
        x = X[:, 0]
        return 0.5 * x * x - 2.0 * np.cos(x)

    def _gap(self, X):
        x = X[:, 0]
        return 0.5 * x * x + 4.0 * np.sin(0.5 * x) ** 2

    def _grad(self, X):
        return X + 2.0 * np.sin(X)

    def _hess(self, X):
        return (1.0 + 2.0 * np.cos(X))[:, :, None]

    def _lmin(self, X):
        return 1.0 + 2.0 * np.cos(X[:, 0])


class AsinhExampleField(ScalarField):
    """f(x) = x·log(x + √(1+x²)) − √(1+x²) + 1, which satisfies no global Łojasiewicz inequality."""

    name = "asinh_example"

    def __init__(self):
        super().__init__(1, {})
        self.kernel = (KERNEL_ASINH, np.zeros(1), np.zeros(2), np.zeros((1, 1)))

    def _value(self, X):
        x = X[:, 0]
        # √(1+x²) − 1 rewritten to avoid cancellation near the minimizer
        return x * np.arcsinh(x) - x * x / (1.0 + np.sqrt(1.0 + x * x))

    def _grad(self, X):
        return np.arcsinh(X)

    def _hess(self, X):
        return (1.0 / np.sqrt(1.0 + X * X))[:, :, None]

    def _lmin(self, X):
        return 1.0 / np.sqrt(1.0 + X[:, 0] ** 2)


class RadialField(ScalarField):
    """f(x) = h(‖x‖) with h'(0) = 0, given h, h', h'' and h'(r)/r."""

    def _radius(self, X):
        return np.sqrt(np.einsum("ij,ij->i", X, X))

    def _value(self, X):
        return self.h(self._radius(X))

    def _grad(self, X):
        return self.dh_over_r(self._radius(X))[:, None] * X

    def _hess(self, X):
        r = self._radius(X)
        q = self.dh_over_r(r)
        d2 = self.d2h(r)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(r[:, None] > 0, X / np.where(r > 0, r, 1.0)[:, None], 0.0)
        outer = u[:, :, None] * u[:, None, :]
        eye = np.eye(self.dim)[None]
        return q[:, None, None] * eye + (d2 - q)[:, None, None] * outer

    def _lmin(self, X):
        r = self._radius(X)
        d2 = self.d2h(r)
        if self.dim == 1:
            return d2
        return np.minimum(d2, self.dh_over_r(r))


class DimpledQuadratic(RadialField):
    """½‖x‖² − A·w(‖x‖)·cos(ω‖x‖²) with a C² polynomial bump w supported on [r1, r2].

    The bump is w(r) = (1 − u²)³/8 with u the affine map of [r1, r2] onto
    [−1, 1]; outside the annulus the field is exactly ½‖x‖². Parameters that
    create a second critical point are rejected.
    """

    name = "dimpled_quadratic"
    smoothness = "C2"
    BUMP_PEAK = 0.125

    def __init__(self, dim=1, A=2.0, omega=1.0, r1=1.0, r2=4.0):
        if dim not in (1, 2, 3):
            raise ValueError("dimpled_quadratic is defined in dimensions 1-3")
        if not (0.0 < r1 < r2 < np.inf):
            raise ValueError("need 0 < r1 < r2 < inf")
        if A < 0 or omega <= 0:
            raise ValueError("need A >= 0 and omega > 0")
        super().__init__(dim, {"dim": int(dim), "A": float(A), "omega": float(omega),
                               "r1": float(r1), "r2": float(r2)})
        self.A, self.omega, self.r1, self.r2 = float(A), float(omega), float(r1), float(r2)
        # half a period of cos(ω r²) at the outer edge of the bump
        self.feature_scale = np.pi / (2.0 * self.omega * self.r2)
        r = np.linspace(r1, r2, 20001)
        worst = float(np.min(self.dh_over_r(r)))
        if worst <= 0.0:
            raise ValueError(
                f"dimple amplitude A={A}, omega={omega} creates extra critical points "
                f"(min h'(r)/r = {worst:.3g} on [{r1}, {r2}])")
        fparams = np.array([self.A, self.omega, self.r1, self.r2, self.BUMP_PEAK])
        self.kernel = (KERNEL_DIMPLED, fparams, np.zeros(2), np.zeros((1, 1)))

    def _bump(self, r):
        scale = 2.0 / (self.r2 - self.r1)
        u = (2.0 * r - self.r1 - self.r2) / (self.r2 - self.r1)
        inside = np.abs(u) < 1.0
        v = np.where(inside, 1.0 - u * u, 0.0)
        c = self.BUMP_PEAK
        w = c * v ** 3
        dw = c * (-6.0 * u * v ** 2) * scale
        d2w = c * v * (30.0 * u * u - 6.0) * scale ** 2
        return w, dw, d2w

    def h(self, r):
        w, _, _ = self._bump(r)
        return 0.5 * r * r - self.A * w * np.cos(self.omega * r * r)

    def dh(self, r):
        w, dw, _ = self._bump(r)
        ph = self.omega * r * r
        return r - self.A * (dw * np.cos(ph) - 2.0 * self.omega * r * w * np.sin(ph))

    def dh_over_r(self, r):
        r = np.asarray(r, dtype=float)
        safe = np.where(r > 0, r, 1.0)
        return np.where(r < self.r1, 1.0, self.dh(safe) / safe)

    def d2h(self, r):
        w, dw, d2w = self._bump(r)
        om = self.omega
        ph = om * r * r
        return 1.0 - self.A * ((d2w - 4.0 * om * om * r * r * w) * np.cos(ph)
                               - (4.0 * om * r * dw + 2.0 * om * w) * np.sin(ph))


def smoothstep_poly():
    """Coefficients of 3t² − 2t³ as a numpy Polynomial in t."""
    return np.polynomial.Polynomial([0.0, 0.0, 3.0, -2.0])


class StaircaseRadial(RadialField):
    """Radial field whose h'' = 1 + r² except for dips of width 0.2 around r = k.

    Inside the window around each integer k = 2..k_max, h'' is blended by a
    smoothstep bump down to −1 at r = k. h' and h are the exact piecewise
    polynomial antiderivatives with h'(0) = h(0) = 0, so the field is
    magnitude-bounded concave (λmin ≥ −1) but non-convex on infinitely many
    annuli up to the truncation k_max.
    """

    name = "staircase_radial"
    smoothness = "C2"
    HALF_WIDTH = 0.1
    feature_scale = 2 * HALF_WIDTH
    DIP = -1.0

    def __init__(self, dim=1, k_max=400):
        if int(k_max) < 2:
            raise ValueError("k_max must be >= 2")
        super().__init__(dim, {"dim": int(dim), "k_max": int(k_max)})
        self.k_max = int(k_max)
        self.pp2 = self._build_second_derivative()
        self.pp1 = self.pp2.antiderivative()
        self.pp0 = self.pp1.antiderivative()
        self.kernel = (KERNEL_STAIRCASE, np.zeros(1), np.asarray(self.pp1.x, dtype=float),
                       np.ascontiguousarray(self.pp1.c, dtype=float))

    def _build_second_derivative(self):
        P = np.polynomial.Polynomial
        hw = self.HALF_WIDTH
        S = smoothstep_poly()
        breaks = [0.0]
        pieces = []

        def base(x0):
            return P([1.0 + x0 * x0, 2.0 * x0, 1.0])   # 1 + (u + x0)², local u

        for k in range(2, self.k_max + 1):
            lo, c, hi = k - hw, float(k), k + hw
            pieces.append(base(breaks[-1]))
            breaks.append(lo)
            # rising half: t = u / hw, falling half: t = (hw - u) / hw
            for x0, t in ((lo, P([0.0, 1.0 / hw])), (c, P([1.0, -1.0 / hw]))):
                b = S(t)
                plus2 = P([2.0 + x0 * x0, 2.0 * x0, 1.0])
                pieces.append(base(x0) - b * plus2)
                breaks.append(c if x0 == lo else hi)
        pieces.append(base(breaks[-1]))
        breaks.append(breaks[-1] + 1.0)
        deg = max(p.degree() for p in pieces)
        coef = np.zeros((deg + 1, len(pieces)))
        for i, p in enumerate(pieces):
            cc = np.zeros(deg + 1)
            cc[: len(p.coef)] = p.coef
            coef[:, i] = cc[::-1]
        return PPoly(coef, np.array(breaks), extrapolate=True)

    def h(self, r):
        return self.pp0(r)

    def dh(self, r):
        return self.pp1(r)

    def d2h(self, r):
        return self.pp2(r)

    def dh_over_r(self, r):
        r = np.asarray(r, dtype=float)
        first = r < self.pp1.x[1]
        out = np.empty_like(r)
        # on the first piece h'(r) = r + r³/3 exactly
        out[first] = 1.0 + r[first] ** 2 / 3.0
        rest = ~first
        out[rest] = self.pp1(r[rest]) / r[rest]
        return out


def refine_minimizer(field, x0, iters=50, tol=1e-14):
    """Damped Newton refinement of a nominal minimizer."""
    x = np.asarray(x0, dtype=float).reshape(field.dim).copy()
    for _ in range(iters):
        g = field.gradient(x)
        if np.linalg.norm(g) <= tol:
            break
        H = field.hessian(x)
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = -g
        if g @ step >= 0:
            step = -g
        f0, t = field.value(x), 1.0
        while t > 1e-12 and field.value(x + t * step) > f0 + 1e-4 * t * (g @ step):
            t *= 0.5
        x = x + t * step
    return x


_CATALOG = {
    "quadratic": lambda dim=1: QuadraticField(dim),
    "cos_example": lambda: CosExampleField(),
    "asinh_example": lambda: AsinhExampleField(),
    "dimpled_quadratic": lambda dim=1, A=2.0, omega=1.0, r1=1.0, r2=4.0: DimpledQuadratic(
        dim, A, omega, r1, r2),
    "staircase_radial": lambda dim=1, k_max=400: StaircaseRadial(dim, k_max),
}


def catalog_names():
    return sorted(_CATALOG)


def catalog_get(name, params=None):
    """Build a catalog field by name; raises ``KeyError`` / ``ValueError`` on bad input."""
    if name not in _CATALOG:
        raise KeyError(f"unknown field {name!r}; known: {', '.join(catalog_names())}")
    try:
        field = _CATALOG[name](**dict(params or {}))
    except TypeError as exc:
        raise ValueError(f"invalid parameters for {name}: {exc}") from exc
    if name in ("dimpled_quadratic", "staircase_radial"):
        field.x_star = refine_minimizer(field, np.zeros(field.dim))
        field.f_star = float(field.value(field.x_star))
    return field


def _step(x, h):
    return h if h is not None else 1e-5 * max(1.0, float(np.linalg.norm(x)))


def fd_gradient(field, x, h=None):
    """Central-difference gradient of ``field.value``."""
    x = np.asarray(x, dtype=float).reshape(field.dim)
    h = _step(x, h)
    if h <= 0:
        raise ValueError("h must be positive")
    E = np.eye(field.dim) * h
    return (field.value(x + E) - field.value(x - E)) / (2.0 * h)


def fd_hessian(field, x, h=None):
    """Central differences of the analytic gradient, symmetrized."""
    x = np.asarray(x, dtype=float).reshape(field.dim)
    h = _step(x, h)
    if h <= 0:
        raise ValueError("h must be positive")
    E = np.eye(field.dim) * h
    H = (field.gradient(x + E) - field.gradient(x - E)) / (2.0 * h)
    return 0.5 * (H + H.T)
