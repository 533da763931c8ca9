"""Finite-difference verification of problem callbacks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import NlpProblem


@dataclass
class DerivativeReport:
    gradient: float
    jacobian: float
    hessian: float
    worst_jacobian_entry: tuple[int, int] | None = None

    @property
    def max_error(self) -> float:
        return max(self.gradient, self.jacobian, self.hessian)


def _rel(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


def check_derivatives(problem: NlpProblem, x: np.ndarray, h: float = 1e-6,
                      lam: np.ndarray | None = None, hessian: bool = True) -> DerivativeReport:
    """Compare analytic derivatives with central differences at ``x``.

    Errors are relative, ``|a - fd| / max(1, |a|, |fd|)``, maximised over entries.
    The Hessian of the Lagrangian is differenced from the analytic gradient
    and Jacobian with multipliers ``lam`` (random when omitted).
    """
    x = np.asarray(x, dtype=float)
    n, m = problem.n, problem.m
    g = np.asarray(problem.gradient(x), dtype=float)
    J = problem.jacobian_csr(x).toarray()
    if lam is None:
        lam = np.random.default_rng(0).uniform(-1.0, 1.0, m)
    g_fd = np.empty(n)
    J_fd = np.empty((m, n))
    H_fd = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        g_fd[k] = (problem.objective(x + e) - problem.objective(x - e)) / (2 * h)
        J_fd[:, k] = (np.asarray(problem.constraints(x + e)) - np.asarray(problem.constraints(x - e))) / (2 * h)
        if hessian and problem.hessian is not None:
            gl_p = problem.gradient(x + e) + problem.jacobian_csr(x + e).T @ lam
            gl_m = problem.gradient(x - e) + problem.jacobian_csr(x - e).T @ lam
            H_fd[:, k] = (gl_p - gl_m) / (2 * h)
    eg = float(_rel(g, g_fd).max(initial=0.0))
    rj = _rel(J, J_fd)
    ej = float(rj.max(initial=0.0))
    worst = tuple(int(v) for v in np.unravel_index(np.argmax(rj), rj.shape)) if rj.size else None
    eh = 0.0
    if hessian and problem.hessian is not None:
        H = problem.hessian_csr(x, lam, 1.0).toarray()
        eh = float(_rel(H, H_fd).max(initial=0.0))
    return DerivativeReport(eg, ej, eh, worst)
