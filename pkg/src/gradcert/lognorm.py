"""Logarithmic norms (matrix measures), spectral abscissa and their ordering."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certificate import Certificate, grid_descriptor, refine_witness

__all__ = ["MatrixMeasureReport", "mu2", "mu_p", "mu", "matrix_norm", "mu_weighted2",
           "mu_limit_oracle", "spectral_abscissa", "measure_report",
           "strong_convexity_iff_contraction"]

SYM_TOL = 1e-10


def _square(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def _norm_order(p):
    if p in (1, "1"):
        return 1
    if p in (2, "2"):
        return 2
    if p in (np.inf, "inf", "∞"):
        return np.inf
    raise ValueError(f"unsupported p={p!r}; use 1, 2 or inf")


def mu2(A):
    """λmax of the symmetric part (A + Aᵀ)/2."""
    A = _square(A)
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[-1])


def mu_p(A, p):
    """Column (p=1) or row (p=inf) closed form of the matrix measure."""
    A = _square(A)
    order = _norm_order(p)
    if order == 2:
        raise ValueError("mu_p handles p in {1, inf}; use mu2 for p=2")
    M = A if order == 1 else A.T
    off = np.abs(M).sum(axis=0) - np.abs(np.diag(M))
    return float(np.max(np.diag(M) + off))


def mu(A, p=2):
    return mu2(A) if _norm_order(p) == 2 else mu_p(A, p)


def matrix_norm(A, p=2):
    return float(np.linalg.norm(_square(A), _norm_order(p)))


def _sqrt_spd(Q):
    Q = _square(Q)
    if not np.allclose(Q, Q.T, atol=1e-12 * max(1.0, np.abs(Q).max())):
        raise ValueError("Q must be symmetric")
    w, V = np.linalg.eigh(0.5 * (Q + Q.T))
    if w[0] <= 0:
        raise ValueError("Q must be positive definite")
    P = (V * np.sqrt(w)) @ V.T
    Pinv = (V / np.sqrt(w)) @ V.T
    return P, Pinv


def mu_weighted2(A, Q):
    """μ₂ of P A P⁻¹ where P is the symmetric square root of Q ≻ 0."""
    A = _square(A)
    P, Pinv = _sqrt_spd(Q)
    return mu2(P @ A @ Pinv)


def mu_limit_oracle(A, p=2, h_sequence=None):
    """Extrapolate (‖I + hA‖ − 1)/h to h → 0⁺ (Neville polynomial extrapolation)."""
    A = _square(A)
    order = _norm_order(p)
    hs = np.asarray(h_sequence if h_sequence is not None else 1e-2 * 0.5 ** np.arange(6),
                    dtype=float)
    if np.any(hs <= 0) or np.any(np.diff(hs) >= 0):
        raise ValueError("h_sequence must be positive and strictly decreasing")
    eye = np.eye(A.shape[0])
    q = np.array([(np.linalg.norm(eye + h * A, order) - 1.0) / h for h in hs])
    P = q.copy()
    n = len(hs)
    for m in range(1, n):
        for i in range(n - m):
            P[i] = (hs[i + m] * P[i] - hs[i] * P[i + 1]) / (hs[i + m] - hs[i])
    return float(P[0])


def spectral_abscissa(A):
    A = _square(A)
    if np.allclose(A, A.T, rtol=0.0, atol=SYM_TOL):
        return float(np.linalg.eigvalsh(0.5 * (A + A.T))[-1])
    return float(np.max(np.linalg.eigvals(A).real))


@dataclass(frozen=True)
class MatrixMeasureReport:
    """−‖A‖ ≤ −μ(−A) ≤ α(A) ≤ μ(A) ≤ ‖A‖ for one norm."""

    p: object
    matrix_norm: float
    mu: float
    spectral_abscissa: float
    minus_mu_neg: float
    minus_norm: float
    eig_tol: float = SYM_TOL

    def chain(self):
        return (self.minus_norm, self.minus_mu_neg, self.spectral_abscissa, self.mu,
                self.matrix_norm)

    def chain_slack(self):
        c = self.chain()
        return min(b - a for a, b in zip(c[:-1], c[1:]))


def measure_report(A, p=2, Q=None):
    """Chain report for ‖·‖_p, or for the weighted 2-norm ‖P·‖₂ with P² = Q."""
    A = _square(A)
    if Q is not None:
        if _norm_order(p) != 2:
            raise ValueError("weighted measures are implemented for p=2 only")
        P, Pinv = _sqrt_spd(Q)
        A = P @ A @ Pinv
    return MatrixMeasureReport(
        p=p, matrix_norm=matrix_norm(A, p), mu=mu(A, p), spectral_abscissa=spectral_abscissa(A),
        minus_mu_neg=-mu(-A, p), minus_norm=-matrix_norm(A, p))


def strong_convexity_iff_contraction(field, region, nu, tol=1e-6):
    """Check λmin(∇²f) ≥ ν and, independently, μ₂(−∇²f) ≤ −ν on region samples."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    X = region.samples(field)
    if X.shape[0] == 0:
        raise ValueError("empty region")
    H = field.hessian(X).reshape(-1, field.dim, field.dim)
    lmin = np.atleast_1d(field.lambda_min(X))
    mu_neg = np.array([mu2(-h) for h in H])
    agreement = float(np.max(np.abs(-lmin - mu_neg)))
    i = int(np.argmax(mu_neg))
    worst = float(mu_neg[i])
    margin = -nu - worst + tol
    verdict = "pass" if margin >= 0 else "fail"
    witnesses = []
    if verdict == "fail":
        xr, vr = refine_witness(lambda z: -field.lambda_min(z), X[i], inside=lambda Z: region.contains(Z, field))
        witnesses = [{"x": X[i], "mu2_neg_hessian": worst, "lambda_min": float(lmin[i]),
                      "refined_x": xr, "refined_mu2_neg_hessian": vr}]
        bad = np.flatnonzero(mu_neg > -nu + tol)
        j = bad[np.argmin(np.linalg.norm(X[bad] - field.x_star, axis=1))]
        if j != i:
            xr, vr = refine_witness(lambda z: -field.lambda_min(z), X[j], inside=lambda Z: region.contains(Z, field))
            witnesses.append({"x": X[j], "mu2_neg_hessian": float(mu_neg[j]),
                              "lambda_min": float(lmin[j]), "refined_x": xr,
                              "refined_mu2_neg_hessian": vr, "kind": "nearest_to_minimizer"})
    return Certificate(
        claim="contraction_region", verdict=verdict, margin=margin, region=region.to_dict(),
        grid=grid_descriptor(region, X.shape[0]), witnesses=witnesses,
        rates={"nu": nu}, bounds={"beta_low": 1.0, "alpha_up": 1.0},
        field_spec=field.describe(), metric={"kind": "identity"},
        provenance={"tol": tol},
        details={"max_mu2_neg_hessian": worst, "min_lambda_min": float(lmin.min()),
                 "pointwise_agreement": agreement,
                 "strongly_convex": bool(lmin.min() >= nu - tol)})
