"""Dormand–Prince 5(4) integration of ẋ = −∇f(x) for ensembles of starts.

Two implementations with identical per-trajectory step logic:

* ``dopri_numba`` loops over trajectories in jitted code and evaluates the
  gradient of catalog families through ``grad_kernel`` (family code +
  parameter arrays, see ``ScalarField.kernel``);
* ``dopri_numpy`` advances every live trajectory at once with masks and calls
  the field's batch gradient, so it also works for user-defined fields.

Steps are clipped to land exactly on the requested sample times.
"""
import math

import numpy as np

from ._accel import njit

RUNNING, HORIZON, GRAD_TOL, STEP_FLOOR, MAX_STEPS, NONFINITE = range(6)
STATUS_NAMES = {HORIZON: "horizon", GRAD_TOL: "grad_tol", STEP_FLOOR: "step_floor",
                MAX_STEPS: "max_steps", NONFINITE: "nonfinite"}

A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525,
                          -1 / 40)
FAC_MIN, FAC_MAX, SAFETY = 0.2, 5.0, 0.9


@njit(cache=True)
def _dimpled_q(fp, r):
    A, om, r1, r2, peak = fp[0], fp[1], fp[2], fp[3], fp[4]
    if r < r1:
        return 1.0
    u = (2.0 * r - r1 - r2) / (r2 - r1)
    if abs(u) >= 1.0:
        return 1.0
    v = 1.0 - u * u
    w = peak * v * v * v
    dw = peak * (-6.0 * u * v * v) * (2.0 / (r2 - r1))
    ph = om * r * r
    return (r - A * (dw * math.cos(ph) - 2.0 * om * r * w * math.sin(ph))) / r


@njit(cache=True)
def _staircase_q(br, co, r):
    n = br.shape[0] - 1
    i = np.searchsorted(br, r, side="right") - 1
    if i < 0:
        i = 0
    if i > n - 1:
        i = n - 1
    u = r - br[i]
    deg = co.shape[0] - 1
    acc = 0.0
    if i == 0:
        # h'(0) = 0, so h'(r)/r is the first piece with its constant term dropped
        for j in range(deg):
            acc = acc * u + co[j, 0]
        return acc
    for j in range(deg + 1):
        acc = acc * u + co[j, i]
    return acc / r


@njit(cache=True)
def grad_kernel(code, fp, br, co, x, out):
    if code == 0:
        for j in range(x.shape[0]):
            out[j] = x[j]
    elif code == 1:
        out[0] = x[0] + 2.0 * math.sin(x[0])
    elif code == 2:
        out[0] = math.asinh(x[0])
    else:
        r2 = 0.0
        for j in range(x.shape[0]):
            r2 += x[j] * x[j]
        r = math.sqrt(r2)
        if code == 3:
            q = _dimpled_q(fp, r)
        else:
            q = _staircase_q(br, co, r)
        for j in range(x.shape[0]):
            out[j] = q * x[j]


@njit(cache=True)
def _neg_grad(code, fp, br, co, y, out):
    grad_kernel(code, fp, br, co, y, out)
    for j in range(y.shape[0]):
        out[j] = -out[j]


@njit(cache=True)
def _dopri_one(code, fp, br, co, y0, t_eval, rtol, atol, grad_tol, h_init, fixed_step,
               max_steps, max_move, states, vels):
    d = y0.shape[0]
    T = t_eval.shape[0]
    y = y0.copy()
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    k5 = np.empty(d)
    k6 = np.empty(d)
    k7 = np.empty(d)
    tmp = np.empty(d)
    y5 = np.empty(d)
    _neg_grad(code, fp, br, co, y, k1)
    for j in range(d):
        states[0, j] = y[j]
        vels[0, j] = k1[j]
    count = 1
    t = 0.0
    gn = 0.0
    for j in range(d):
        gn += k1[j] * k1[j]
    if math.sqrt(gn) < grad_tol:
        return count, GRAD_TOL, t, y, k1
    h = fixed_step if fixed_step > 0 else h_init
    status = RUNNING
    steps = 0
    while status == RUNNING:
        steps += 1
        if steps > max_steps:
            status = MAX_STEPS
            break
        if max_move > 0 and fixed_step <= 0:
            h = min(h, max_move / max(math.sqrt(gn), 1e-300))
        tn = t_eval[count]
        hit = tn - t <= h
        hs = tn - t if hit else h
        for j in range(d):
            tmp[j] = y[j] + hs * A21 * k1[j]
        _neg_grad(code, fp, br, co, tmp, k2)
        for j in range(d):
            tmp[j] = y[j] + hs * (A31 * k1[j] + A32 * k2[j])
        _neg_grad(code, fp, br, co, tmp, k3)
        for j in range(d):
            tmp[j] = y[j] + hs * (A41 * k1[j] + A42 * k2[j] + A43 * k3[j])
        _neg_grad(code, fp, br, co, tmp, k4)
        for j in range(d):
            tmp[j] = y[j] + hs * (A51 * k1[j] + A52 * k2[j] + A53 * k3[j] + A54 * k4[j])
        _neg_grad(code, fp, br, co, tmp, k5)
        for j in range(d):
            tmp[j] = y[j] + hs * (A61 * k1[j] + A62 * k2[j] + A63 * k3[j] + A64 * k4[j]
                                  + A65 * k5[j])
        _neg_grad(code, fp, br, co, tmp, k6)
        for j in range(d):
            y5[j] = y[j] + hs * (B1 * k1[j] + B3 * k3[j] + B4 * k4[j] + B5 * k5[j]
                                 + B6 * k6[j])
        _neg_grad(code, fp, br, co, y5, k7)
        acc = 0.0
        finite = True
        for j in range(d):
            e = hs * (E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j]
                      + E7 * k7[j])
            sc = atol + rtol * max(abs(y[j]), abs(y5[j]))
            acc += (e / sc) ** 2
            if not (math.isfinite(y5[j]) and math.isfinite(k7[j])):
                finite = False
        en = math.sqrt(acc / d)
        if not finite or not math.isfinite(en):
            status = NONFINITE
            break
        accept = fixed_step > 0 or en <= 1.0
        if en == 0.0:
            fac = FAC_MAX
        else:
            fac = min(FAC_MAX, max(FAC_MIN, SAFETY * en ** -0.2))
        if accept:
            t = tn if hit else t + hs
            gn = 0.0
            for j in range(d):
                y[j] = y5[j]
                k1[j] = k7[j]
                gn += k7[j] * k7[j]
            if hit:
                for j in range(d):
                    states[count, j] = y[j]
                    vels[count, j] = k1[j]
                count += 1
                if count == T:
                    status = HORIZON
            if status == RUNNING and math.sqrt(gn) < grad_tol:
                status = GRAD_TOL
            if fixed_step <= 0:
                h = max(h, hs * fac) if hit else hs * fac
        else:
            h = hs * min(1.0, fac)
        if status == RUNNING and fixed_step <= 0 and h < 1e-14 * max(1.0, t):
            status = STEP_FLOOR
    return count, status, t, y, k1


@njit(cache=True)
def dopri_numba(code, fp, br, co, Y0, t_eval, rtol, atol, grad_tol, h_init, fixed_step,
                max_steps, max_move=0.0):
    B, d = Y0.shape
    T = t_eval.shape[0]
    states = np.full((B, T, d), np.nan)
    vels = np.full((B, T, d), np.nan)
    counts = np.zeros(B, np.int64)
    status = np.zeros(B, np.int64)
    t_final = np.zeros(B)
    y_final = np.zeros((B, d))
    v_final = np.zeros((B, d))
    for b in range(B):
        c, s, tf, yf, vf = _dopri_one(code, fp, br, co, Y0[b].copy(), t_eval, rtol, atol,
                                      grad_tol, h_init[b], fixed_step, max_steps,
                                      max_move, states[b], vels[b])
        counts[b] = c
        status[b] = s
        t_final[b] = tf
        y_final[b] = yf
        v_final[b] = vf
    return states, vels, counts, status, t_final, y_final, v_final


def dopri_numpy(grad_batch, Y0, t_eval, rtol, atol, grad_tol, h_init, fixed_step, max_steps,
                max_move=0.0):
    """Masked ensemble version of :func:`dopri_numba` for arbitrary batch gradients."""
    Y = np.array(Y0, dtype=float)
    B, d = Y.shape
    T = t_eval.shape[0]

    def F(Z):
        return -grad_batch(Z)

    states = np.full((B, T, d), np.nan)
    vels = np.full((B, T, d), np.nan)
    K1 = F(Y)
    states[:, 0], vels[:, 0] = Y, K1
    counts = np.ones(B, np.int64)
    status = np.zeros(B, np.int64)
    status[np.linalg.norm(K1, axis=1) < grad_tol] = GRAD_TOL
    t = np.zeros(B)
    fixed = fixed_step > 0
    h = np.full(B, fixed_step) if fixed else np.array(h_init, dtype=float)
    steps = 0
    while True:
        act = np.flatnonzero(status == RUNNING)
        if act.size == 0:
            break
        steps += 1
        if steps > max_steps:
            status[act] = MAX_STEPS
            break
        tn = t_eval[counts[act]]
        if max_move > 0 and not fixed:
            h[act] = np.minimum(h[act], max_move / np.maximum(np.linalg.norm(K1[act], axis=1),
                                                              1e-300))
        hp = h[act]
        hit = tn - t[act] <= hp
        hs = np.where(hit, tn - t[act], hp)[:, None]
        y, k1 = Y[act], K1[act]
        k2 = F(y + hs * (A21 * k1))
        k3 = F(y + hs * (A31 * k1 + A32 * k2))
        k4 = F(y + hs * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = F(y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = F(y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        y5 = y + hs * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = F(y5)
        err = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        with np.errstate(over="ignore", invalid="ignore"):
            en = np.sqrt(np.mean((err / sc) ** 2, axis=1))
        finite = np.isfinite(y5).all(axis=1) & np.isfinite(k7).all(axis=1) & np.isfinite(en)
        status[act[~finite]] = NONFINITE
        hs = hs[:, 0]
        with np.errstate(divide="ignore"):
            fac = np.where(en == 0.0, FAC_MAX,
                           np.clip(SAFETY * np.where(en > 0, en, 1.0) ** -0.2, FAC_MIN, FAC_MAX))
        accept = finite & (fixed | (en <= 1.0))
        ia = act[accept]
        if ia.size:
            hit_a = hit[accept]
            t[ia] = np.where(hit_a, tn[accept], t[ia] + hs[accept])
            Y[ia], K1[ia] = y5[accept], k7[accept]
            ih = ia[hit_a]
            states[ih, counts[ih]] = Y[ih]
            vels[ih, counts[ih]] = K1[ih]
            counts[ih] += 1
            status[ih[counts[ih] == T]] = HORIZON
            run = ia[status[ia] == RUNNING]
            status[run[np.linalg.norm(K1[run], axis=1) < grad_tol]] = GRAD_TOL
            if not fixed:
                h[ia] = np.where(hit_a, np.maximum(hp[accept], hs[accept] * fac[accept]),
                                 hs[accept] * fac[accept])
        rej = finite & ~accept
        if rej.any():
            h[act[rej]] = hs[rej] * np.minimum(1.0, fac[rej])
        if not fixed:
            live = act[status[act] == RUNNING]
            status[live[h[live] < 1e-14 * np.maximum(1.0, t[live])]] = STEP_FLOOR
    return states, vels, counts, status, t, Y, K1


def initial_step(grad_batch, Y0, rtol, atol, horizon):
    """Hairer's starting-step heuristic, per trajectory."""
    F0 = grad_batch(Y0)
    sc = atol + rtol * np.abs(Y0)
    d0 = np.sqrt(np.mean((Y0 / sc) ** 2, axis=1))
    d1 = np.sqrt(np.mean((F0 / sc) ** 2, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / d1)
    return np.minimum(h, horizon)
