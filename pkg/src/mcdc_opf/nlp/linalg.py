"""Symmetric indefinite factorisations that report inertia.

Both solvers factor the primal-dual matrix

    K = [[W + D,  A^T     ],
         [A,     -delta_c I]]

and return ``(n_pos, n_neg, n_zero)``.  The interior-point method accepts a
step only when ``n_pos`` equals the number of primal variables and
``n_neg`` the number of constraints.

``DenseLDL`` uses LAPACK Bunch-Kaufman (``scipy.linalg.ldl``).
``SparseLDL`` reads the inertia off a symmetric SuperLU factor of the
penalised primal block (diagonal pivoting only makes ``U = D L^T``, so the
signs of ``diag(U)`` count eigenvalues by Sylvester's law) and solves with a
pivoted LU of the full matrix.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class FactorizationError(RuntimeError):
    pass


def _refine(K, solve, rhs, max_steps=10):
    x = solve(rhs)
    scale = np.abs(rhs).max(initial=0.0) + 1e-300
    best = x
    best_res = np.inf
    for _ in range(max_steps):
        r = rhs - K @ x
        nr = np.abs(r).max(initial=0.0)
        if nr < best_res:
            best, best_res = x, nr
        if nr <= 1e-15 * scale or not np.isfinite(nr):
            break
        if nr > 0.5 * best_res and nr != best_res:
            break
        x = x + solve(r)
    return best


class DenseLDL:
    name = "dense-LDL"

    def __init__(self):
        self._lu = None
        self._K = None

    def factorize(self, K, n_primal: int) -> tuple[int, int, int]:
        Kd = K.toarray() if sp.issparse(K) else np.asarray(K, dtype=float)
        if not np.all(np.isfinite(Kd)):
            raise FactorizationError("non-finite entries in KKT matrix")
        _, d, _ = sla.ldl(Kd, lower=True, hermitian=True)
        eig = []
        k, N = 0, d.shape[0]
        while k < N:
            if k + 1 < N and d[k + 1, k] != 0.0:
                eig.extend(np.linalg.eigvalsh(d[k:k + 2, k:k + 2]))
                k += 2
            else:
                eig.append(d[k, k])
                k += 1
        eig = np.asarray(eig)
        tiny = 1e-14
        nzero = int(np.sum(np.abs(eig) <= tiny))
        npos = int(np.sum(eig > tiny))
        nneg = int(np.sum(eig < -tiny))
        self._K = Kd
        if nzero == 0:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                self._lu = sla.lu_factor(Kd, check_finite=False)
        else:
            self._lu = None
        return npos, nneg, nzero

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._lu is None:
            raise FactorizationError("matrix is singular")
        return _refine(self._K, lambda b: sla.lu_solve(self._lu, b, check_finite=False), rhs, 3)


class SparseLDL:
    """Sparse solver with inertia from the penalised primal block.

    For ``K = [[H, A^T], [A, -C]]`` with ``C`` diagonal and positive,
    Sylvester's law gives ``inertia(K) = inertia(H + A^T C^-1 A) + (0, m, 0)``.
    The penalised matrix has a nonzero diagonal wherever a variable enters a
    constraint, so a symmetric SuperLU factor with diagonal pivots reads off
    its inertia even when ``H`` has zero diagonal entries (which a direct
    symmetric factor of ``K`` cannot pivot past).  ``C`` is the requested
    constraint regularisation plus a tiny static part.  A factor whose
    backward error exceeds ``backward_tol`` is discarded for a dense one.  Steps come from an
    ordinary partial-pivoting LU of the same regularised matrix, refined
    against ``K`` itself, with a GMRES polish when refinement stalls.
    """

    name = "sparse-LDL"

    def __init__(self, static_delta_c: float = 1e-8, backward_tol: float = 1e-10,
                 polish_tol: float = 1e-6):
        self.static_delta_c = static_delta_c
        self.polish_tol = polish_tol
        self.backward_tol = backward_tol
        self._lu = None
        self._K = None
        self._dense_fallback = None

    def _penalised_inertia(self, K, n_primal):
        H = K[:n_primal, :n_primal]
        A = K[n_primal:, :n_primal]
        c = self.static_delta_c - K[n_primal:, n_primal:].diagonal()
        S = (H + A.T @ sp.diags(1.0 / c) @ A).tocsc()
        try:
            lu = spla.splu(S, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options=dict(SymmetricMode=True))
        except RuntimeError:
            return None
        d = lu.U.diagonal()
        if not np.array_equal(lu.perm_r, lu.perm_c) or not np.all(np.isfinite(d)):
            return None
        # without off-diagonal pivots the elimination can be unstable, and then
        # the signs of D mean nothing: require a small backward error first
        probe = np.cos(np.arange(S.shape[0], dtype=float))
        b = S @ probe
        with np.errstate(all="ignore"):
            x = lu.solve(b)
            err = np.abs(S @ x - b).max() / (abs(S).max() * np.abs(x).max() + np.abs(b).max())
        if not np.isfinite(err) or err > self.backward_tol:
            return None
        tiny = 1e-300
        return int(np.sum(d > tiny)), int(np.sum(d < -tiny)), int(np.sum(np.abs(d) <= tiny))

    def factorize(self, K, n_primal: int) -> tuple[int, int, int]:
        K = sp.csc_matrix(K)
        if not np.all(np.isfinite(K.data)):
            raise FactorizationError("non-finite entries in KKT matrix")
        m = K.shape[0] - n_primal
        self._K = K
        self._dense_fallback = None
        self._lu = None
        inertia = self._penalised_inertia(K, n_primal)
        if inertia is None:
            # exact inertia from a dense factor
            self._dense_fallback = DenseLDL()
            return self._dense_fallback.factorize(K, n_primal)
        npos, nneg, nzero = inertia
        if nzero:
            return npos, nneg + m, nzero
        reg = sp.diags(np.concatenate([np.zeros(n_primal), -self.static_delta_c * np.ones(m)]),
                       format="csc")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                lu = spla.splu(K + reg, permc_spec="COLAMD")
        except RuntimeError:
            # exactly singular: report it so the caller regularises
            return npos, nneg + m - 1, 1
        if not np.all(np.isfinite(lu.U.data)):
            return npos, nneg + m - 1, 1
        self._lu = lu
        return npos, nneg + m, 0

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._dense_fallback is not None:
            return self._dense_fallback.solve(rhs)
        if self._lu is None:
            raise FactorizationError("matrix is singular")
        x = _refine(self._K, self._lu.solve, rhs)
        r = rhs - self._K @ x
        nr = np.abs(r).max(initial=0.0)
        if nr <= self.polish_tol * (np.abs(rhs).max(initial=0.0) + 1e-300):
            return x
        # a constraint row with a gradient shorter than sqrt(static_delta_c)
        # (an idle converter, say) stalls the refinement; GMRES preconditioned
        # by the shifted factor removes those few slow directions
        M = spla.LinearOperator(self._K.shape, matvec=self._lu.solve)
        dx, _ = spla.gmres(self._K, r, M=M, rtol=1e-12, atol=0.0, restart=30, maxiter=3)
        y = x + dx
        return y if np.abs(rhs - self._K @ y).max(initial=0.0) < nr else x


def make_solver(kind: str, n_primal: int, dense_threshold: int = 200):
    if kind == "auto":
        kind = "dense-LDL" if n_primal < dense_threshold else "sparse-LDL"
    if kind == "dense-LDL":
        return DenseLDL()
    if kind == "sparse-LDL":
        return SparseLDL()
    raise ValueError(f"unknown linear solver {kind!r}")
