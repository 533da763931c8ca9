"""Primal-dual interior-point method with a filter line search.

The algorithm follows the well-known design of Waechter and Biegler (2006):
inequalities get slacks, a log-barrier handles bounds, the barrier
parameter decreases monotonically (Fiacco-McCormick), steps come from the
primal-dual Newton system with inertia correction, and globalisation uses a
filter line search with second-order corrections plus an l1 feasibility
restoration phase that doubles as the local-infeasibility detector.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .linalg import FactorizationError, make_solver
from .problem import NlpProblem

log = logging.getLogger(__name__)


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    ITER_LIMIT = "IterLimit"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class Regularization:
    delta_w_init: float = 1e-4
    delta_w_min: float = 1e-20
    delta_w_max: float = 1e40
    kappa_w_plus: float = 8.0
    kappa_w_plus_first: float = 100.0
    kappa_w_minus: float = 1.0 / 3.0
    delta_c: float = 1e-8
    kappa_c: float = 0.25


@dataclass
class SolverOptions:
    tol_kkt: float = 1e-8
    max_iter: int = 300
    mu_init: float = 0.1
    mu_min: float = 1e-11
    bound_push: float = 1e-4
    bound_frac: float = 1e-2
    linear_solver: str = "auto"
    dense_threshold: int = 200
    hessian: str = "exact"
    regularization: Regularization = field(default_factory=Regularization)
    scaling: bool = True
    max_soc: int = 4
    restoration: bool = True
    max_restoration_iter: int = 500
    debug: bool = False


@dataclass
class SolveResult:
    status: Status
    x: np.ndarray
    lam: np.ndarray
    zL: np.ndarray
    zU: np.ndarray
    objective: float
    kkt: dict
    iterations: int
    wall_time: float
    message: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


# ----------------------------------------------------------------------
# internal problem in the form  min f(w)  s.t.  c(w) = 0,  l <= w <= u
# ----------------------------------------------------------------------

class _Reformulated:
    """Fixed variables removed, slacks added for inequalities, scaled."""

    def __init__(self, prob: NlpProblem, x0: np.ndarray, opts: SolverOptions):
        self.prob = prob
        x0 = np.asarray(x0, dtype=float)
        lb, ub = prob.x_lb, prob.x_ub
        self.fixed = lb == ub
        self.free = np.flatnonzero(~self.fixed)
        self.x_fixed = np.where(self.fixed, lb, 0.0)
        self.ineq = np.flatnonzero(~prob.is_eq)
        self.nx = self.free.size
        self.ns = self.ineq.size
        self.N = self.nx + self.ns
        self.M = prob.m
        self.lb = np.concatenate([lb[self.free], np.zeros(self.ns)])
        self.ub = np.concatenate([ub[self.free], np.full(self.ns, np.inf)])
        self.has_lb = np.isfinite(self.lb)
        self.has_ub = np.isfinite(self.ub)
        E = sp.csr_matrix((np.ones(self.ns), (self.ineq, np.arange(self.ns))), shape=(self.M, self.ns))
        self.E = E
        self.obj_scale = 1.0
        self.row_scale = np.ones(self.M)
        self._cache_key = None
        if opts.scaling:
            x = np.clip(x0, lb, ub)
            g = np.asarray(prob.gradient(x), dtype=float)
            gmax = np.abs(g).max(initial=0.0)
            if np.isfinite(gmax) and gmax > 100.0:
                self.obj_scale = 100.0 / gmax
            if self.M:
                J = prob.jacobian_csr(x)
                rmax = np.zeros(self.M)
                Ja = abs(J).tocsr()
                nz = np.diff(Ja.indptr) > 0
                rmax[nz] = np.maximum.reduceat(Ja.data, Ja.indptr[:-1][nz])
                rmax[~np.isfinite(rmax)] = 0.0
                big = rmax > 100.0
                self.row_scale[big] = 100.0 / rmax[big]

    def full_x(self, w: np.ndarray) -> np.ndarray:
        x = self.x_fixed.copy()
        x[self.free] = w[:self.nx]
        return x

    def _eval(self, w):
        key = w.tobytes()
        if key == self._cache_key:
            return
        x = self.full_x(w)
        self._x = x
        self._f = float(self.prob.objective(x))
        self._g = None
        self._c = None
        self._J = None
        self._cache_key = key

    def f(self, w):
        self._eval(w)
        return self.obj_scale * self._f

    def grad(self, w):
        self._eval(w)
        if self._g is None:
            g = np.asarray(self.prob.gradient(self._x), dtype=float)
            self._g = np.concatenate([self.obj_scale * g[self.free], np.zeros(self.ns)])
        return self._g

    def c(self, w):
        self._eval(w)
        if self._c is None:
            c = np.asarray(self.prob.constraints(self._x), dtype=float).copy()
            c[self.ineq] += w[self.nx:]
            self._c = self.row_scale * c
        return self._c

    def jac(self, w):
        self._eval(w)
        if self._J is None:
            J = self.prob.jacobian_csr(self._x)[:, self.free]
            A = sp.hstack([J, self.E], format="csr")
            self._J = sp.diags(self.row_scale) @ A
        return self._J

    def hess(self, w, lam, sigma=1.0):
        x = self.full_x(w)
        H = self.prob.hessian_csr(x, self.row_scale * lam, sigma * self.obj_scale)
        H = H[self.free][:, self.free]
        if self.ns:
            H = sp.block_diag([H, sp.csr_matrix((self.ns, self.ns))], format="csr")
        return H.tocsr()

    def unscaled_error(self, w, lam, zL, zU) -> dict:
        """Optimality error of the original problem at the current iterate."""
        x = self.full_x(w)
        prob = self.prob
        g = np.asarray(prob.gradient(x), dtype=float)
        c = np.asarray(prob.constraints(x), dtype=float)
        lam_u = self.row_scale * lam / self.obj_scale
        zL_u = zL / self.obj_scale
        zU_u = zU / self.obj_scale
        J = prob.jacobian_csr(x) if self.M else sp.csr_matrix((0, prob.n))
        stat_full = g + J.T @ lam_u
        stat = stat_full[self.free] - zL_u[:self.nx] + zU_u[:self.nx]
        # slack rows:  lam_j - zL_s = 0
        stat_s = lam_u[self.ineq] - zL_u[self.nx:]
        r_stat = max(np.abs(stat).max(initial=0.0), np.abs(stat_s).max(initial=0.0))
        r_eq = np.abs(c[prob.is_eq]).max(initial=0.0)
        r_in = np.maximum(c[~prob.is_eq], 0.0).max(initial=0.0)
        r_primal = max(r_eq, r_in)
        dl = np.where(self.has_lb, w - self.lb, 0.0)
        du = np.where(self.has_ub, self.ub - w, 0.0)
        compl = max(np.abs(zL_u * dl).max(initial=0.0), np.abs(zU_u * du).max(initial=0.0))
        s_max = 100.0
        nz = self.N + self.M
        z_sum = np.abs(zL_u).sum() + np.abs(zU_u).sum()
        s_d = max(s_max, (np.abs(lam_u).sum() + z_sum) / max(nz, 1)) / s_max
        s_c = max(s_max, z_sum / max(2 * self.N, 1)) / s_max
        return dict(stationarity=float(r_stat), primal=float(r_primal),
                    complementarity=float(compl), s_d=float(s_d), s_c=float(s_c),
                    error=float(max(r_stat / s_d, r_primal, compl / s_c)))


# ----------------------------------------------------------------------

class _Filter:
    def __init__(self):
        self.entries: list[tuple[float, float]] = []

    def acceptable(self, theta, phi) -> bool:
        return all(theta < t or phi < p for t, p in self.entries)

    def add(self, theta, phi):
        self.entries = [(t, p) for t, p in self.entries if not (theta <= t and phi <= p)]
        self.entries.append((theta, phi))


def _frac_to_boundary(v, dv, lo, hi, has_lo, has_hi, tau):
    alpha = 1.0
    m = has_lo & (dv < 0)
    if np.any(m):
        alpha = min(alpha, float(np.min(-tau * (v[m] - lo[m]) / dv[m])))
    m = has_hi & (dv > 0)
    if np.any(m):
        alpha = min(alpha, float(np.min(tau * (hi[m] - v[m]) / dv[m])))
    return max(alpha, 0.0)


def _dual_frac(z, dz, mask, tau):
    m = mask & (dz < 0)
    if not np.any(m):
        return 1.0
    return max(0.0, min(1.0, float(np.min(-tau * z[m] / dz[m]))))


class _Engine:
    """Runs the barrier loop on a problem exposing f/grad/c/jac/hess."""

    # algorithmic constants
    kappa_eps = 10.0
    kappa_mu = 0.2
    theta_mu = 1.5
    tau_min = 0.99
    gamma_theta = 1e-5
    gamma_phi = 1e-8
    delta = 1.0
    s_theta = 1.1
    s_phi = 2.3
    eta_phi = 1e-4
    kappa_soc = 0.99
    gamma_alpha = 0.05
    kappa_sigma = 1e10

    def __init__(self, P, opts: SolverOptions, *, is_restoration=False, early_exit=None,
                 outer_error=None):
        self.P = P
        self.o = opts
        self.is_restoration = is_restoration
        self.early_exit = early_exit
        self.outer_error = outer_error
        self.history: list[tuple] = []
        self.lin = make_solver(opts.linear_solver, P.N, opts.dense_threshold)
        self.delta_w_last = 0.0
        self.B = None

    # -- helpers -------------------------------------------------------
    def _slacks(self, w):
        P = self.P
        dl = np.where(P.has_lb, w - P.lb, 1.0)
        du = np.where(P.has_ub, P.ub - w, 1.0)
        return dl, du

    def _theta(self, w):
        c = self.P.c(w)
        return float(np.abs(c).sum()) if c.size else 0.0

    def _phi(self, w, mu):
        P = self.P
        dl, du = self._slacks(w)
        if np.any(dl[P.has_lb] <= 0) or np.any(du[P.has_ub] <= 0):
            return np.inf
        return P.f(w) - mu * (np.log(dl[P.has_lb]).sum() + np.log(du[P.has_ub]).sum())

    def _grad_phi(self, w, mu):
        P = self.P
        dl, du = self._slacks(w)
        g = P.grad(w).copy()
        g[P.has_lb] -= mu / dl[P.has_lb]
        g[P.has_ub] += mu / du[P.has_ub]
        return g

    def _scaled_error(self, w, lam, zL, zU, mu):
        P = self.P
        A = P.jac(w)
        stat = P.grad(w) + A.T @ lam - zL + zU
        dl, du = self._slacks(w)
        compl = max(np.abs(np.where(P.has_lb, zL * dl - mu, 0.0)).max(initial=0.0),
                    np.abs(np.where(P.has_ub, zU * du - mu, 0.0)).max(initial=0.0))
        s_max = 100.0
        nz = P.N + P.M
        z_sum = np.abs(zL).sum() + np.abs(zU).sum()
        s_d = max(s_max, (np.abs(lam).sum() + z_sum) / max(nz, 1)) / s_max
        s_c = max(s_max, z_sum / max(2 * P.N, 1)) / s_max
        c = P.c(w)
        return max(np.abs(stat).max(initial=0.0) / s_d, np.abs(c).max(initial=0.0),
                   compl / s_c)

    def _ls_multipliers(self, w, zL, zU):
        """Least-squares estimate of lam, discarded when large."""
        P = self.P
        if P.M == 0:
            return np.zeros(0)
        A = P.jac(w)
        r = -(P.grad(w) - zL + zU)
        K = sp.bmat([[sp.identity(P.N), A.T], [A, None]], format="csc")
        rhs = np.concatenate([r, np.zeros(P.M)])
        solver = make_solver(self.o.linear_solver, P.N, self.o.dense_threshold)
        try:
            npos, nneg, nzero = solver.factorize(
                K + sp.diags(np.concatenate([np.zeros(P.N), -1e-8 * np.ones(P.M)])), P.N)
            sol = solver.solve(rhs)
        except (FactorizationError, RuntimeError, np.linalg.LinAlgError):
            return np.zeros(P.M)
        # v + A^T lam = r,  A v = 0  makes lam the least-squares fit of A^T lam = r
        lam = sol[P.N:]
        if not np.all(np.isfinite(lam)) or np.abs(lam).max(initial=0.0) > 1e3:
            return np.zeros(P.M)
        return lam

    def _initial_point(self, w0):
        P = self.P
        o = self.o
        w = np.asarray(w0, dtype=float).copy()
        lo, hi = P.lb, P.ub
        both = P.has_lb & P.has_ub
        width = np.where(both, hi - lo, np.inf)
        pl = np.minimum(o.bound_push * np.maximum(1.0, np.abs(np.where(P.has_lb, lo, 0.0))),
                        o.bound_frac * width)
        pu = np.minimum(o.bound_push * np.maximum(1.0, np.abs(np.where(P.has_ub, hi, 0.0))),
                        o.bound_frac * width)
        w = np.where(P.has_lb, np.maximum(w, lo + pl), w)
        w = np.where(P.has_ub, np.minimum(w, hi - pu), w)
        # interval narrower than the push: centre it
        narrow = both & ((w <= lo) | (w >= hi))
        w[narrow] = 0.5 * (lo[narrow] + hi[narrow])
        return w

    # -- Newton system -------------------------------------------------
    def _factorize(self, W, Sigma, A):
        """Factorise the primal-dual matrix, correcting inertia."""
        P = self.P
        r = self.o.regularization
        N, M = P.N, P.M
        D = sp.diags(Sigma)
        dw, dc = 0.0, 0.0
        first = True
        while True:
            K = sp.bmat([[W + D + dw * sp.identity(N), A.T],
                         [A, -dc * sp.identity(M) if M else None]], format="csc") if M else \
                (W + D + dw * sp.identity(N)).tocsc()
            try:
                npos, nneg, nzero = self.lin.factorize(K, N)
            except FactorizationError:
                npos, nneg, nzero = -1, -1, 1
            if npos == N and nneg == M and nzero == 0:
                if self.o.debug:
                    self._assert_inertia(K, N, M)
                if dw > 0:
                    self.delta_w_last = dw
                return K, dw, dc
            if nzero > 0 and dc == 0.0 and M:
                dc = r.delta_c * self.mu ** r.kappa_c
                if npos == N and nneg == M - nzero:
                    continue
            if first:
                if self.delta_w_last == 0.0:
                    dw = r.delta_w_init
                else:
                    dw = max(r.delta_w_min, r.kappa_w_minus * self.delta_w_last)
                first = False
            else:
                if self.delta_w_last == 0.0 or dw == 0.0:
                    dw = r.kappa_w_plus_first * max(dw, r.delta_w_init)
                else:
                    dw = r.kappa_w_plus * dw
            if dw > r.delta_w_max:
                raise FactorizationError("inertia correction failed")

    @staticmethod
    def _assert_inertia(K, N, M):
        # eigenvalues below eps*|K| have no reliable sign; only resolved ones count
        ev = np.linalg.eigvalsh(K.toarray())
        tol = 1e3 * np.finfo(float).eps * np.abs(ev).max(initial=1.0)
        assert int(np.sum(ev > tol)) <= N and int(np.sum(ev < -tol)) <= M, "wrong inertia"

    def _solve_dir(self, K, rhs):
        sol = self.lin.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise FactorizationError("non-finite step")
        return sol

    # -- main loop -----------------------------------------------------
    def run(self, w0, lam0=None, zL0=None, zU0=None, mu0=None):
        P, o = self.P, self.o
        t0 = time.perf_counter()
        w = self._initial_point(w0)
        self.mu = o.mu_init if mu0 is None else mu0
        zL = np.where(P.has_lb, 1.0 if zL0 is None else zL0, 0.0)
        zU = np.where(P.has_ub, 1.0 if zU0 is None else zU0, 0.0)
        try:
            f0 = P.f(w)
            c0 = P.c(w)
        except (FloatingPointError, ValueError, ZeroDivisionError):
            return self._finish(Status.NUMERICAL_FAILURE, w, np.zeros(P.M), zL, zU, 0, t0,
                                "evaluation failed at the starting point")
        if not (np.isfinite(f0) and np.all(np.isfinite(c0))):
            return self._finish(Status.NUMERICAL_FAILURE, w, np.zeros(P.M), zL, zU, 0, t0,
                                "non-finite values at the starting point")
        lam = self._ls_multipliers(w, zL, zU) if lam0 is None else lam0.copy()
        theta0 = self._theta(w)
        self.theta_max = 1e4 * max(1.0, theta0)
        self.theta_min = 1e-4 * max(1.0, theta0)
        flt = self.filter = _Filter()
        tau = max(self.tau_min, 1.0 - self.mu)
        it = 0
        status = Status.ITER_LIMIT
        message = "iteration limit reached"
        while True:
            # convergence
            if self.outer_error is not None:
                done = self.outer_error(w, lam, zL, zU) <= o.tol_kkt
            else:
                done = self._scaled_error(w, lam, zL, zU, 0.0) <= o.tol_kkt
            if done:
                status, message = Status.OPTIMAL, "converged"
                break
            if self.early_exit is not None and it > 0 and self.early_exit(w, lam, zL, zU):
                status, message = Status.OPTIMAL, "restoration succeeded"
                break
            if it >= o.max_iter:
                break
            # barrier update
            while (self._scaled_error(w, lam, zL, zU, self.mu) <= self.kappa_eps * self.mu
                   and self.mu > o.mu_min):
                self.mu = max(o.mu_min, min(self.kappa_mu * self.mu, self.mu ** self.theta_mu))
                tau = max(self.tau_min, 1.0 - self.mu)
                flt = self.filter = _Filter()
            it += 1
            dl, du = self._slacks(w)
            Sigma = np.where(P.has_lb, zL / dl, 0.0) + np.where(P.has_ub, zU / du, 0.0)
            A = P.jac(w)
            if o.hessian == "bfgs":
                W = sp.csr_matrix(self._bfgs_matrix())
            else:
                W = P.hess(w, lam)
            try:
                K, dw, dc = self._factorize(W, Sigma, A)
            except FactorizationError as e:
                status, message = Status.NUMERICAL_FAILURE, str(e)
                break
            gphi = self._grad_phi(w, self.mu)
            c = P.c(w)
            rhs = -np.concatenate([gphi + A.T @ lam, c])
            try:
                sol = self._solve_dir(K, rhs)
            except FactorizationError as e:
                status, message = Status.NUMERICAL_FAILURE, str(e)
                break
            dwv, dlam = sol[:P.N], sol[P.N:]
            dzL = np.where(P.has_lb, (self.mu - zL * dl - zL * dwv) / dl, 0.0)
            dzU = np.where(P.has_ub, (self.mu - zU * du + zU * dwv) / du, 0.0)

            alpha_max = _frac_to_boundary(w, dwv, P.lb, P.ub, P.has_lb, P.has_ub, tau)
            alpha_z = min(_dual_frac(zL, dzL, P.has_lb, tau), _dual_frac(zU, dzU, P.has_ub, tau))

            res = self._line_search(w, lam, dwv, dlam, alpha_max, A, K, flt, tau)
            if res is None:
                if self.is_restoration or not o.restoration:
                    status, message = Status.NUMERICAL_FAILURE, "line search failed"
                    break
                flt.add((1 - self.gamma_theta) * self._theta(w),
                        self._phi(w, self.mu) - self.gamma_phi * self._theta(w))
                out = self._restore(w, lam, zL, zU)
                if isinstance(out, Status):
                    status = out
                    message = ("converged to a point of local infeasibility"
                               if out is Status.INFEASIBLE else "restoration failed")
                    break
                w_new, lam, zL, zU = out
                self.history.append((it, P.f(w_new), self._theta(w_new), self.mu, -1.0))
                w = w_new
                continue
            w_new, lam_new, alpha = res
            zL = zL + alpha_z * dzL
            zU = zU + alpha_z * dzU
            # keep bound multipliers near the central path
            dl, du = self._slacks(w_new)
            k = self.kappa_sigma
            zL = np.where(P.has_lb, np.clip(zL, self.mu / (k * dl), k * self.mu / dl), 0.0)
            zU = np.where(P.has_ub, np.clip(zU, self.mu / (k * du), k * self.mu / du), 0.0)
            if o.hessian == "bfgs":
                self._bfgs_update(w, w_new, lam_new)
            w, lam = w_new, lam_new
            self.history.append((it, P.f(w), self._theta(w), self.mu, alpha))
            log.debug("it %3d  f %.10e  theta %.3e  mu %.2e  alpha %.3e  dw %.1e",
                      it, P.f(w), self._theta(w), self.mu, alpha, dw)
        return self._finish(status, w, lam, zL, zU, it, t0, message)

    def _finish(self, status, w, lam, zL, zU, it, t0, message):
        return dict(status=status, w=w, lam=lam, zL=zL, zU=zU, iterations=it,
                    wall_time=time.perf_counter() - t0, message=message, history=self.history)

    # -- line search ---------------------------------------------------
    def _accept(self, theta, phi, theta_t, phi_t, gphi_d, alpha, flt):
        """Returns (accepted, f_type)."""
        if not np.isfinite(phi_t) or theta_t > self.theta_max:
            return False, False
        if not flt.acceptable(theta_t, phi_t):
            return False, False
        switching = gphi_d < 0 and alpha * (-gphi_d) ** self.s_phi > self.delta * theta ** self.s_theta
        if theta <= self.theta_min and switching:
            return phi_t <= phi + self.eta_phi * alpha * gphi_d, True
        return (theta_t <= (1 - self.gamma_theta) * theta or
                phi_t <= phi - self.gamma_phi * theta), False

    def _trial(self, w_t):
        try:
            with np.errstate(all="ignore"):
                th = self._theta(w_t)
                ph = self._phi(w_t, self.mu)
        except (FloatingPointError, ValueError, ZeroDivisionError, OverflowError):
            return np.inf, np.inf
        if not np.isfinite(th):
            return np.inf, np.inf
        return th, ph

    def _line_search(self, w, lam, dwv, dlam, alpha_max, A, K, flt, tau):
        P = self.P
        theta = self._theta(w)
        phi = self._phi(w, self.mu)
        gphi_d = float(self._grad_phi(w, self.mu) @ dwv)
        if gphi_d < 0:
            amin = min(self.gamma_theta, self.gamma_phi * theta / -gphi_d)
            if theta <= self.theta_min:
                amin = min(amin, self.delta * theta ** self.s_theta / (-gphi_d) ** self.s_phi)
        else:
            amin = self.gamma_theta
        amin *= self.gamma_alpha
        alpha = alpha_max
        first = True
        while alpha >= amin or alpha == alpha_max:
            w_t = w + alpha * dwv
            theta_t, phi_t = self._trial(w_t)
            ok, ftype = self._accept(theta, phi, theta_t, phi_t, gphi_d, alpha, flt)
            if ok:
                if not ftype:
                    flt.add((1 - self.gamma_theta) * theta, phi - self.gamma_phi * theta)
                return w_t, lam + alpha * dlam, alpha
            if first and theta_t >= theta and P.M and self.o.max_soc > 0:
                soc = self._soc(w, lam, dwv, alpha, theta, phi, gphi_d, A, K, flt, tau)
                if soc is not None:
                    return soc
            first = False
            if alpha == 0.0:
                break
            alpha *= 0.5
            if alpha < amin:
                break
        return None

    def _soc(self, w, lam, dwv, alpha, theta, phi, gphi_d, A, K, flt, tau):
        P = self.P
        c_soc = alpha * P.c(w) + P.c(w + alpha * dwv)
        theta_old = theta
        gphi = self._grad_phi(w, self.mu)
        for _ in range(self.o.max_soc):
            rhs = -np.concatenate([gphi + A.T @ lam, c_soc])
            try:
                sol = self._solve_dir(K, rhs)
            except FactorizationError:
                return None
            d, dl = sol[:P.N], sol[P.N:]
            a_soc = _frac_to_boundary(w, d, P.lb, P.ub, P.has_lb, P.has_ub, tau)
            w_t = w + a_soc * d
            theta_t, phi_t = self._trial(w_t)
            ok, ftype = self._accept(theta, phi, theta_t, phi_t, gphi_d, alpha, flt)
            if ok:
                if not ftype:
                    flt.add((1 - self.gamma_theta) * theta, phi - self.gamma_phi * theta)
                return w_t, lam + a_soc * dl, a_soc
            if theta_t > self.kappa_soc * theta_old or not np.isfinite(theta_t):
                return None
            theta_old = theta_t
            c_soc = a_soc * c_soc + P.c(w_t)
        return None

    # -- restoration ---------------------------------------------------
    def _restore(self, w, lam, zL, zU):
        P = self.P
        theta_k = self._theta(w)
        mu = self.mu
        outer = self

        R = _Restoration(P, w, mu)

        def early(v, lam_r, zl_r, zu_r):
            wx = v[:P.N]
            th = outer._theta(wx)
            if th > 0.9 * theta_k:
                return False
            ph = outer._phi(wx, mu)
            return np.isfinite(ph) and outer.filter.acceptable(th, ph)

        opts = SolverOptions(**{**self.o.__dict__})
        opts.max_iter = self.o.max_restoration_iter
        opts.restoration = False
        opts.hessian = "exact"
        opts.bound_push = 0.0
        sub = _Engine(R, opts, is_restoration=True, early_exit=early)
        zL0 = np.concatenate([np.minimum(R.rho, np.where(P.has_lb, zL, 0.0)),
                              mu / R.p0, mu / R.n0])
        zU0 = np.concatenate([np.minimum(R.rho, np.where(P.has_ub, zU, 0.0)),
                              np.zeros(2 * P.M)])
        out = sub.run(R.v0, np.zeros(P.M), zL0, zU0, mu0=max(mu, np.abs(P.c(w)).max(initial=0.0)))
        v = out["w"]
        wx = v[:P.N]
        if out["message"] == "restoration succeeded":
            pass
        elif out["status"] is Status.OPTIMAL:
            # restoration converged: stationary point of the infeasibility measure
            if np.abs(P.c(wx)).max(initial=0.0) > max(self.o.tol_kkt, 1e-3 * min(1.0, theta_k)):
                return Status.INFEASIBLE
        else:
            return Status.NUMERICAL_FAILURE
        # back in the original problem: bound multipliers from the sub-solve,
        # equality multipliers re-estimated
        zLn = np.where(P.has_lb, out["zL"][:P.N], 0.0)
        zUn = np.where(P.has_ub, out["zU"][:P.N], 0.0)
        dl, du = self._slacks(wx)
        k = self.kappa_sigma
        zLn = np.where(P.has_lb, np.clip(zLn, mu / (k * dl), k * mu / dl), 0.0)
        zUn = np.where(P.has_ub, np.clip(zUn, mu / (k * du), k * mu / du), 0.0)
        lamn = self._ls_multipliers(wx, zLn, zUn)
        return wx, lamn, zLn, zUn

    # -- quasi-Newton --------------------------------------------------
    def _bfgs_matrix(self):
        P = self.P
        if self.B is None:
            self.B = np.eye(P.N)
        return self.B

    def _bfgs_update(self, w, w_new, lam_new):
        P = self.P
        s = w_new - w
        y = (P.grad(w_new) + P.jac(w_new).T @ lam_new) - (P.grad(w) + P.jac(w).T @ lam_new)
        B = self._bfgs_matrix()
        Bs = B @ s
        sBs = float(s @ Bs)
        sy = float(s @ y)
        if sBs <= 1e-16:
            return
        if sy < 0.2 * sBs:
            t = 0.8 * sBs / (sBs - sy)
            y = t * y + (1 - t) * Bs
            sy = float(s @ y)
        self.B = B - np.outer(Bs, Bs) / sBs + np.outer(y, y) / sy


class _Restoration:
    """Elastic l1 feasibility problem around the reference point w_R."""

    rho = 1000.0

    def __init__(self, P, wR, mu):
        self.P = P
        self.wR = wR.copy()
        self.zeta = np.sqrt(mu)
        self.DR = np.minimum(1.0, 1.0 / np.maximum(np.abs(wR), 1e-300))
        N, M = P.N, P.M
        self.N = N + 2 * M
        self.M = M
        self.lb = np.concatenate([P.lb, np.zeros(2 * M)])
        self.ub = np.concatenate([P.ub, np.full(2 * M, np.inf)])
        self.has_lb = np.isfinite(self.lb)
        self.has_ub = np.isfinite(self.ub)
        c = P.c(wR)
        mu_r = max(mu, np.abs(c).max(initial=0.0))
        # closed-form p, n minimising the barrier of the elastic variables
        a = (mu_r - self.rho * c) / (2 * self.rho)
        n0 = a + np.sqrt(a * a + mu_r * c / (2 * self.rho))
        n0 = np.maximum(n0, 1e-12)
        p0 = c + n0
        p0 = np.maximum(p0, 1e-12)
        self.p0, self.n0 = p0, n0
        self.v0 = np.concatenate([wR, p0, n0])
        I = sp.identity(M, format="csr")
        self._elastic = sp.hstack([-I, I], format="csr")

    def f(self, v):
        N = self.P.N
        d = self.DR * (v[:N] - self.wR)
        return self.rho * v[N:].sum() + 0.5 * self.zeta * float(d @ d)

    def grad(self, v):
        N = self.P.N
        g = np.full(self.N, self.rho)
        g[:N] = self.zeta * self.DR ** 2 * (v[:N] - self.wR)
        return g

    def c(self, v):
        N, M = self.P.N, self.M
        return self.P.c(v[:N]) - v[N:N + M] + v[N + M:]

    def jac(self, v):
        return sp.hstack([self.P.jac(v[:self.P.N]), self._elastic], format="csr")

    def hess(self, v, lam, sigma=1.0):
        N = self.P.N
        H = self.P.hess(v[:N], lam, 0.0) + sp.diags(sigma * self.zeta * self.DR ** 2)
        return sp.block_diag([H, sp.csr_matrix((2 * self.M, 2 * self.M))], format="csr")


# ----------------------------------------------------------------------

def solve(problem: NlpProblem, x0: np.ndarray, options: SolverOptions | None = None) -> SolveResult:
    """Solve ``problem`` from ``x0`` and report status, primal/dual point and KKT residuals.

    Multipliers follow the convention of the Lagrangian
    ``f + lam^T c - zL^T (x - x_lb) + zU^T (x - x_ub)``.
    """
    o = options or SolverOptions()
    if o.hessian not in ("exact", "bfgs"):
        raise ValueError(f"unknown hessian option {o.hessian!r}")
    if o.hessian == "exact" and problem.hessian is None:
        raise ValueError("problem has no Hessian; use hessian='bfgs'")
    P = _Reformulated(problem, x0, o)
    x0 = np.asarray(x0, dtype=float)
    w0 = np.concatenate([x0[P.free], np.zeros(P.ns)])
    if P.ns:
        c0 = np.asarray(problem.constraints(np.clip(x0, problem.x_lb, problem.x_ub)), dtype=float)
        w0[P.nx:] = np.maximum(-c0[P.ineq], 0.0)
    eng = _Engine(P, o, outer_error=lambda w, lam, zL, zU: P.unscaled_error(w, lam, zL, zU)["error"])
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = eng.run(w0)
    w = out["w"]
    x = P.full_x(w)
    x = np.clip(x, problem.x_lb, problem.x_ub)
    lam = P.row_scale * out["lam"] / P.obj_scale
    zL = np.zeros(problem.n)
    zU = np.zeros(problem.n)
    zL[P.free] = out["zL"][:P.nx] / P.obj_scale
    zU[P.free] = out["zU"][:P.nx] / P.obj_scale
    kkt = P.unscaled_error(w, out["lam"], out["zL"], out["zU"])
    status = out["status"]
    if status is Status.OPTIMAL and kkt["error"] > o.tol_kkt:
        status = Status.NUMERICAL_FAILURE
    return SolveResult(status=status, x=x, lam=lam, zL=zL, zU=zU,
                       objective=float(problem.objective(x)), kkt=kkt,
                       iterations=out["iterations"], wall_time=out["wall_time"],
                       message=out["message"], history=out["history"])
