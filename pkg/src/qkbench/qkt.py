"""Quantum kernel training: centred kernel-target alignment and bound-
constrained optimisation of the per-feature scaling vector theta.

Every objective evaluation recomputes the ideal (statevector) kernel on the
scaled features; gradients are central finite differences, which is stable
because the simulated kernel is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .circuit import THETA_BOUNDS, FeatureMapSpec
from .kernels import KernelMatrix, quantum_kernel_ideal
from .validation import check_labels, check_matrix, check_symmetric

DEFAULT_MAX_ITER = 170
FD_STEP = 1e-6
PG_TOL = 1e-5


@dataclass(frozen=True)
class QktResult:
    theta_star: np.ndarray
    kta_initial: float
    kta_final: float
    iterations: int
    converged: bool
    kta_trace: tuple[float, ...]


def centered_kta(K, y) -> float:
    """Centred kernel-target alignment <HKH, H yy^T H>_F / (|HKH| |Hyy^TH|).

    Uses H y y^T H = (Hy)(Hy)^T, so the numerator reduces to y~^T K y~.
    """
    Kv = K.values if isinstance(K, KernelMatrix) else np.asarray(K, float)
    Kv = check_symmetric(Kv, "K", tol=1e-8)
    y = check_labels(y)
    n = len(y)
    if Kv.shape[0] != n:
        raise ValueError("kernel size must match label count")
    yc = y - y.mean()
    row_means = Kv.mean(axis=1)
    kc = Kv - row_means[:, None] - row_means[None, :] + Kv.mean()
    norm_k = float(np.linalg.norm(kc))
    if norm_k <= 1e-300:
        raise ValueError("constant kernel matrix: centred norm is zero")
    norm_y = float(yc @ yc)
    return float(yc @ Kv @ yc) / (norm_k * norm_y)


def _kta_of_theta(X: np.ndarray, y: np.ndarray, spec: FeatureMapSpec,
                  theta: np.ndarray) -> float:
    # scale the features directly so finite-difference probes may step
    # slightly outside the theta box without tripping spec validation
    K = quantum_kernel_ideal(X * theta, X * theta, spec.with_theta(None))
    return centered_kta(K, y)


def kta_gradient(X, y, spec: FeatureMapSpec, theta, step: float = FD_STEP) -> np.ndarray:
    """Central finite-difference gradient of the alignment w.r.t. theta."""
    X = check_matrix(X)
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(len(theta)):
        hi = theta.copy()
        lo = theta.copy()
        hi[i] += step
        lo[i] -= step
        grad[i] = (_kta_of_theta(X, y, spec, hi) - _kta_of_theta(X, y, spec, lo)) / (2 * step)
    return grad


def _projected_gradient_norm(theta: np.ndarray, grad: np.ndarray,
                             bounds: tuple[float, float]) -> float:
    """Infinity norm of the ascent gradient projected onto the box."""
    lo, hi = bounds
    pg = grad.copy()
    at_lo = theta <= lo + 1e-12
    at_hi = theta >= hi - 1e-12
    pg[at_lo & (pg < 0)] = 0.0
    pg[at_hi & (pg > 0)] = 0.0
    return float(np.max(np.abs(pg))) if pg.size else 0.0


def optimize_theta(X_train, y_train, spec: FeatureMapSpec,
                   max_iter: int = DEFAULT_MAX_ITER, *,
                   bounds: tuple[float, float] = THETA_BOUNDS,
                   fd_step: float = FD_STEP, pg_tol: float = PG_TOL) -> QktResult:
    """Maximise centred KTA over theta in the box via L-BFGS-B (memory 10).

    converged means the projected-gradient infinity norm fell below
    ``pg_tol`` within the iteration budget.
    """
    X = check_matrix(X_train)
    y = check_labels(y_train)
    if X.shape[1] != spec.k:
        raise ValueError(f"feature count must equal spec.k={spec.k}")
    theta0 = np.ones(spec.k)
    kta0 = _kta_of_theta(X, y, spec, theta0)
    trace = [kta0]
    if max_iter == 0:
        return QktResult(theta0, kta0, kta0, 0, False, tuple(trace))

    def neg_f(t):
        return -_kta_of_theta(X, y, spec, t)

    def neg_grad(t):
        return -kta_gradient(X, y, spec, t, step=fd_step)

    def record(tk):
        trace.append(_kta_of_theta(X, y, spec, tk))

    res = minimize(neg_f, theta0, jac=neg_grad, method="L-BFGS-B",
                   bounds=[bounds] * spec.k, callback=record,
                   options={"maxiter": max_iter, "maxcor": 10,
                            "ftol": 1e-14, "gtol": pg_tol})
    theta_star = np.clip(res.x, bounds[0], bounds[1])
    kta_final = _kta_of_theta(X, y, spec, theta_star)
    if kta_final < kta0:  # never return a worse point than the start
        theta_star, kta_final = theta0, kta0
    grad = kta_gradient(X, y, spec, theta_star, step=fd_step)
    converged = _projected_gradient_norm(theta_star, grad, bounds) < pg_tol
    return QktResult(theta_star, kta0, kta_final, int(res.nit), converged, tuple(trace))
