"""Gradient-flow integration and trajectory analytics."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._accel import backend as resolve_backend

__all__ = ["StepControls", "Trajectory", "DistanceSeries", "IntegrationError", "integrate",
           "integrate_many", "pair_distance_series", "settle_time"]


class IntegrationError(RuntimeError):
    """Raised when the vector field returns non-finite values."""


@dataclass(frozen=True)
class StepControls:
    rtol: float = 1e-8
    atol: float = 1e-10
    grad_tol: float = 1e-10
    n_samples: int = 1001
    sample_times: tuple = None
    max_steps: int = 500_000
    h_init: float = None
    fixed_step: float = None
    backend: str = None
    # cap on ‖h·ẋ‖ per step; None uses a quarter of the field's feature_scale
    max_move: float = None

    def times(self, horizon):
        if self.sample_times is not None:
            t = np.asarray(self.sample_times, dtype=float)
            if t[0] != 0.0 or np.any(np.diff(t) <= 0):
                raise ValueError("sample_times must start at 0 and increase")
            return t
        return np.linspace(0.0, horizon, self.n_samples)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    velocities: np.ndarray
    f_values: np.ndarray
    grad_norms: np.ndarray
    terminated_by: str

    @property
    def dim(self):
        return self.states.shape[1]

    @property
    def final_state(self):
        return self.states[-1]

    def state_at(self, t):
        """Cubic Hermite interpolation on (state, −∇f); held constant past the end."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ts = self.times
        out = np.empty((t.size, self.dim))
        after = t >= ts[-1]
        out[after] = self.states[-1]
        inside = ~after
        if inside.any():
            tt = np.maximum(t[inside], ts[0])
            i = np.clip(np.searchsorted(ts, tt, side="right") - 1, 0, len(ts) - 2)
            h = (ts[i + 1] - ts[i])[:, None]
            s = ((tt - ts[i])[:, None]) / h
            y0, y1 = self.states[i], self.states[i + 1]
            v0, v1 = self.velocities[i], self.velocities[i + 1]
            h00 = 2 * s**3 - 3 * s**2 + 1
            h10 = s**3 - 2 * s**2 + s
            h01 = -2 * s**3 + 3 * s**2
            h11 = s**3 - s**2
            out[inside] = h00 * y0 + h10 * h * v0 + h01 * y1 + h11 * h * v1
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x_{j + 1}" for j in range(self.dim)] + ["f", "grad_norm"])
            for k in range(len(self.times)):
                w.writerow([repr(float(self.times[k]))]
                           + [repr(float(v)) for v in self.states[k]]
                           + [repr(float(self.f_values[k])), repr(float(self.grad_norms[k]))])


def _assemble(field, t_eval, out):
    states, vels, counts, status, t_final, y_final, v_final = out
    trajs = []
    for b in range(states.shape[0]):
        st = int(status[b])
        if st == _kernels.NONFINITE:
            raise IntegrationError(f"non-finite vector field near {y_final[b]} at t={t_final[b]}")
        n = int(counts[b])
        times, S, V = t_eval[:n], states[b, :n], vels[b, :n]
        if st != _kernels.HORIZON and t_final[b] > times[-1]:
            times = np.append(times, t_final[b])
            S = np.vstack([S, y_final[b]])
            V = np.vstack([V, v_final[b]])
        trajs.append(Trajectory(times=np.array(times), states=np.array(S), velocities=np.array(V),
                                f_values=np.atleast_1d(field.value(S)),
                                grad_norms=np.linalg.norm(V, axis=1),
                                terminated_by=_kernels.STATUS_NAMES[st]))
    return trajs


def integrate_many(field, X0, horizon, controls=None):
    """Integrate ẋ = −∇f(x) from every row of ``X0`` over ``[0, horizon]``."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    c = controls or StepControls()
    X0 = np.asarray(X0, dtype=float).reshape(-1, field.dim)
    t_eval = c.times(horizon)
    grad = field.gradient

    def gb(Z):
        return grad(Z).reshape(Z.shape)

    if c.h_init is not None:
        h0 = np.full(X0.shape[0], float(c.h_init))
    else:
        h0 = _kernels.initial_step(gb, X0, c.rtol, c.atol, t_eval[-1])
    fixed = float(c.fixed_step or 0.0)
    max_move = c.max_move
    if max_move is None and field.feature_scale is not None:
        max_move = 0.25 * field.feature_scale
    max_move = float(max_move or 0.0)
    use_numba = field.kernel is not None and resolve_backend(c.backend) == "numba"
    if use_numba:
        code, fp, br, co = field.kernel
        out = _kernels.dopri_numba(code, fp, br, co, X0, t_eval, c.rtol, c.atol, c.grad_tol, h0,
                                   fixed, c.max_steps, max_move)
    else:
        out = _kernels.dopri_numpy(gb, X0, t_eval, c.rtol, c.atol, c.grad_tol, h0, fixed,
                                   c.max_steps, max_move)
    return _assemble(field, t_eval, out)


def integrate(field, x0, horizon, controls=None):
    return integrate_many(field, np.atleast_1d(x0)[None], horizon, controls)[0]


@dataclass(frozen=True, eq=False)
class DistanceSeries:
    times: np.ndarray
    distance: np.ndarray
    lower: np.ndarray = None
    upper: np.ndarray = None


def pair_distance_series(t1, t2, metric=None, field=None, times=None):
    """Distances between two trajectories on a common time grid.

    Without a metric the distance is Euclidean. With a conformal metric the
    1-D distance is exact; in higher dimensions ``lower``/``upper`` carry the
    metric bounds and ``distance`` is the upper bracket.
    """
    if t1.dim != t2.dim:
        raise ValueError("dimension mismatch between trajectories")
    if times is None:
        times = t1.times if np.array_equal(t1.times, t2.times) else np.union1d(t1.times, t2.times)
    a, b = t1.state_at(times), t2.state_at(times)
    if metric is None:
        return DistanceSeries(times, np.linalg.norm(a - b, axis=1))
    if field is None:
        raise ValueError("metric distances need the field")
    if t1.dim == 1:
        d = metric.length_1d(field, a[:, 0], b[:, 0])
        return DistanceSeries(times, d, d, d)
    lo, hi = metric.distance_bounds(field, a, b)
    return DistanceSeries(times, hi, lo, hi)


def settle_time(traj, center, radius):
    """First time after which the trajectory stays inside the ball; ``inf`` if never."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=float).reshape(traj.dim)
    dist = np.linalg.norm(traj.states - center, axis=1)
    outside = np.flatnonzero(dist >= radius)
    if outside.size == 0:
        return 0.0
    last = outside[-1]
    if last == len(dist) - 1:
        return np.inf
    lo, hi = traj.times[last], traj.times[last + 1]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(traj.state_at(mid)[0] - center) >= radius:
            lo = mid
        else:
            hi = mid
    return hi
