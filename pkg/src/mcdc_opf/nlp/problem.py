"""Container for a smooth, sparse nonlinear program.

    minimise    f(x)
    subject to  c_j(x) = 0     for rows with ``is_eq[j]``
                c_j(x) <= 0    otherwise
                x_lb <= x <= x_ub

Callbacks receive a 1-D float array.  ``jacobian`` returns an (m, n) sparse
matrix and ``hessian(x, lam, obj_factor)`` the full symmetric (n, n) matrix
``obj_factor * H_f + sum_j lam_j * H_j``.  ``hessian`` may be ``None`` when
the problem is only ever solved with the quasi-Newton option.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class NlpProblem:
    x_lb: np.ndarray
    x_ub: np.ndarray
    is_eq: np.ndarray
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    constraints: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], sp.spmatrix]
    hessian: Callable[[np.ndarray, np.ndarray, float], sp.spmatrix] | None = None
    var_names: tuple[str, ...] = field(default=(), compare=False)
    con_names: tuple[str, ...] = field(default=(), compare=False)
    jacobian_structure: tuple[np.ndarray, np.ndarray] | None = field(default=None, compare=False)
    hessian_structure: tuple[np.ndarray, np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        lb = np.asarray(self.x_lb, dtype=float)
        ub = np.asarray(self.x_ub, dtype=float)
        eq = np.asarray(self.is_eq, dtype=bool)
        if lb.shape != ub.shape or lb.ndim != 1:
            raise ValueError("x_lb and x_ub must be 1-D arrays of equal length")
        if np.any(lb > ub):
            raise ValueError("x_lb exceeds x_ub")
        object.__setattr__(self, "x_lb", lb)
        object.__setattr__(self, "x_ub", ub)
        object.__setattr__(self, "is_eq", eq)

    @property
    def n(self) -> int:
        return self.x_lb.size

    @property
    def m(self) -> int:
        return self.is_eq.size

    @property
    def n_eq(self) -> int:
        return int(self.is_eq.sum())

    @property
    def n_ineq(self) -> int:
        return self.m - self.n_eq

    def jacobian_csr(self, x: np.ndarray) -> sp.csr_matrix:
        J = self.jacobian(x)
        if not sp.issparse(J):
            J = sp.csr_matrix(np.atleast_2d(np.asarray(J, dtype=float)).reshape(self.m, self.n))
        return J.tocsr()

    def hessian_csr(self, x: np.ndarray, lam: np.ndarray, obj_factor: float) -> sp.csr_matrix:
        H = self.hessian(x, lam, obj_factor)
        if not sp.issparse(H):
            H = sp.csr_matrix(np.asarray(H, dtype=float).reshape(self.n, self.n))
        return H.tocsr()

    def violation(self, x: np.ndarray) -> float:
        """Max-norm constraint and bound violation at ``x``."""
        c = np.asarray(self.constraints(x), dtype=float)
        v = 0.0
        if c.size:
            v = max(np.abs(c[self.is_eq]).max(initial=0.0),
                    np.maximum(c[~self.is_eq], 0.0).max(initial=0.0))
        v = max(v, np.maximum(self.x_lb - x, 0.0).max(initial=0.0),
                np.maximum(x - self.x_ub, 0.0).max(initial=0.0))
        return float(v)
