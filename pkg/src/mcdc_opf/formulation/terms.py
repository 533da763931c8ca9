"""Vectorised sums of elementary smooth terms with exact derivatives.

A :class:`TermModel` represents a vector function ``F(x)`` whose rows are sums
of the following terms::

    const      c
    lin        c * x[i]
    quad       c * x[i] * x[j]                (i == j gives c * x[i]**2)
    trig       c * x[i] * x[j] * cos(x[k] - x[l])   or  ... * sin(...)
    biquad     c * x[i]**2 * x[j]**2
    norm       c * (sqrt(x[i]**2 + x[j]**2 + eps**2) - eps)

That covers every equation of the AC/DC model: power flow expressions are
``trig`` terms, voltage-current products are ``quad`` terms and the
converter current magnitude is a ``norm`` term.  Jacobian and
weighted Hessian structures are fixed at :meth:`freeze` time; values are
scattered with ``bincount`` so evaluation is deterministic.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

COS, SIN = 0, 1


class _Scatter:
    """Maps a fixed list of (row, col) entries onto a CSR pattern."""

    def __init__(self, rows: np.ndarray, cols: np.ndarray, shape: tuple[int, int]):
        self.shape = shape
        nr, nc = shape
        keys = rows.astype(np.int64) * max(nc, 1) + cols.astype(np.int64)
        uniq, inv = np.unique(keys, return_inverse=True)
        self.inv = inv
        self.nnz = len(uniq)
        r = (uniq // max(nc, 1)).astype(np.int64)
        self.indices = (uniq % max(nc, 1)).astype(np.int32)
        self.indptr = np.zeros(nr + 1, dtype=np.int32)
        np.cumsum(np.bincount(r, minlength=nr), out=self.indptr[1:])
        self.rows = r
        self.cols = self.indices.astype(np.int64)

    def matrix(self, vals: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self.inv, weights=vals, minlength=self.nnz) if len(vals) else \
            np.zeros(self.nnz)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=self.shape)


class TermModel:
    def __init__(self, n_vars: int, n_rows: int = 0):
        self.n = n_vars
        self.n_rows = n_rows
        self._const: list[tuple[int, float]] = []
        self._lin: list[tuple[int, float, int]] = []
        self._quad: list[tuple[int, float, int, int]] = []
        self._trig: list[tuple[int, float, int, int, int, int, int]] = []
        self._biquad: list[tuple[int, float, int, int]] = []
        self._norm: list[tuple[int, float, int, int, float]] = []
        self._frozen = False

    def add_row(self) -> int:
        self.n_rows += 1
        return self.n_rows - 1

    def const(self, row: int, c: float) -> None:
        if c:
            self._const.append((row, float(c)))

    def lin(self, row: int, c: float, i: int) -> None:
        self._lin.append((row, float(c), i))

    def quad(self, row: int, c: float, i: int, j: int) -> None:
        self._quad.append((row, float(c), i, j))

    def trig(self, row: int, c: float, i: int, j: int, k: int, l: int, kind: int) -> None:
        if len({i, j, k, l}) != 4:
            raise ValueError("trig term needs four distinct variables")
        self._trig.append((row, float(c), i, j, k, l, kind))

    def biquad(self, row: int, c: float, i: int, j: int) -> None:
        if i == j:
            raise ValueError("biquad term needs two distinct variables")
        self._biquad.append((row, float(c), i, j))

    def norm(self, row: int, c: float, i: int, j: int, eps: float) -> None:
        """Smoothed length of ``(x[i], x[j])``; zero at the origin, within
        ``eps`` of the true length elsewhere."""
        if i == j or eps <= 0.0:
            raise ValueError("norm term needs two distinct variables and eps > 0")
        self._norm.append((row, float(c), i, j, float(eps)))

    # ------------------------------------------------------------------
    def freeze(self) -> TermModel:
        def arr(lst, width):
            a = np.array(lst, dtype=float).reshape(-1, width)
            return a

        c = arr(self._const, 2)
        self.c_row, self.c_val = c[:, 0].astype(np.int64), c[:, 1]
        a = arr(self._lin, 3)
        self.l_row, self.l_c, self.l_i = a[:, 0].astype(np.int64), a[:, 1], a[:, 2].astype(np.int64)
        a = arr(self._quad, 4)
        self.q_row, self.q_c = a[:, 0].astype(np.int64), a[:, 1]
        self.q_i, self.q_j = a[:, 2].astype(np.int64), a[:, 3].astype(np.int64)
        a = arr(self._trig, 7)
        self.t_row, self.t_c = a[:, 0].astype(np.int64), a[:, 1]
        self.t_i, self.t_j = a[:, 2].astype(np.int64), a[:, 3].astype(np.int64)
        self.t_k, self.t_l = a[:, 4].astype(np.int64), a[:, 5].astype(np.int64)
        self.t_sin = a[:, 6].astype(bool)
        a = arr(self._biquad, 4)
        self.b_row, self.b_c = a[:, 0].astype(np.int64), a[:, 1]
        self.b_i, self.b_j = a[:, 2].astype(np.int64), a[:, 3].astype(np.int64)
        a = arr(self._norm, 5)
        self.n_row, self.n_c = a[:, 0].astype(np.int64), a[:, 1]
        self.n_i, self.n_j = a[:, 2].astype(np.int64), a[:, 3].astype(np.int64)
        self.n_eps = a[:, 4]

        jr = np.concatenate([self.l_row, self.q_row, self.q_row,
                             self.t_row, self.t_row, self.t_row, self.t_row,
                             self.b_row, self.b_row, self.n_row, self.n_row])
        jc = np.concatenate([self.l_i, self.q_i, self.q_j,
                             self.t_i, self.t_j, self.t_k, self.t_l,
                             self.b_i, self.b_j, self.n_i, self.n_j])
        self._jac = _Scatter(jr, jc, (self.n_rows, self.n))

        ti, tj, tk, tl = self.t_i, self.t_j, self.t_k, self.t_l
        pairs = [(self.q_i, self.q_j),
                 (ti, tj), (ti, tk), (ti, tl), (tj, tk), (tj, tl), (tk, tk), (tl, tl), (tk, tl),
                 (self.b_i, self.b_i), (self.b_j, self.b_j), (self.b_i, self.b_j),
                 (self.n_i, self.n_i), (self.n_j, self.n_j), (self.n_i, self.n_j)]
        hr = np.concatenate([p[0] for p in pairs] + [p[1] for p in pairs])
        hc = np.concatenate([p[1] for p in pairs] + [p[0] for p in pairs])
        self._hess = _Scatter(hr, hc, (self.n, self.n))
        self._frozen = True
        return self

    # ------------------------------------------------------------------
    def _trig_parts(self, x):
        a, b = x[self.t_i], x[self.t_j]
        d = x[self.t_k] - x[self.t_l]
        cd, sd = np.cos(d), np.sin(d)
        g = np.where(self.t_sin, sd, cd)
        g1 = np.where(self.t_sin, cd, -sd)
        return a, b, g, g1

    def _norm_parts(self, x):
        u, v = x[self.n_i], x[self.n_j]
        return u, v, np.sqrt(u * u + v * v + self.n_eps * self.n_eps)

    def values(self, x: np.ndarray) -> np.ndarray:
        n = self.n_rows
        out = np.bincount(self.c_row, weights=self.c_val, minlength=n).astype(float)
        out += np.bincount(self.l_row, weights=self.l_c * x[self.l_i], minlength=n)
        out += np.bincount(self.q_row, weights=self.q_c * x[self.q_i] * x[self.q_j], minlength=n)
        a, b, g, _ = self._trig_parts(x)
        out += np.bincount(self.t_row, weights=self.t_c * a * b * g, minlength=n)
        bi, bj = x[self.b_i], x[self.b_j]
        out += np.bincount(self.b_row, weights=self.b_c * bi * bi * bj * bj, minlength=n)
        _, _, r = self._norm_parts(x)
        out += np.bincount(self.n_row, weights=self.n_c * (r - self.n_eps), minlength=n)
        return out

    def jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        qi, qj = x[self.q_i], x[self.q_j]
        a, b, g, g1 = self._trig_parts(x)
        c = self.t_c
        bi, bj = x[self.b_i], x[self.b_j]
        u, v, r = self._norm_parts(x)
        vals = np.concatenate([
            self.l_c,
            self.q_c * qj, self.q_c * qi,
            c * b * g, c * a * g, c * a * b * g1, -c * a * b * g1,
            2.0 * self.b_c * bi * bj * bj, 2.0 * self.b_c * bi * bi * bj,
            self.n_c * u / r, self.n_c * v / r,
        ])
        return self._jac.matrix(vals)

    def hessian(self, x: np.ndarray, weights: np.ndarray) -> sp.csr_matrix:
        """Sum over rows of ``weights[row] * Hessian(F_row)`` (full symmetric)."""
        wq = self.q_c * weights[self.q_row]
        a, b, g, g1 = self._trig_parts(x)
        wt = self.t_c * weights[self.t_row]
        g2 = -g
        wb = self.b_c * weights[self.b_row]
        bi, bj = x[self.b_i], x[self.b_j]
        u, v, r = self._norm_parts(x)
        wn = self.n_c * weights[self.n_row] / r ** 3
        e2 = self.n_eps * self.n_eps
        half = [
            wq,
            wt * g, wt * b * g1, -wt * b * g1, wt * a * g1, -wt * a * g1,
            0.5 * wt * a * b * g2, 0.5 * wt * a * b * g2, -wt * a * b * g2,
            wb * bj * bj, wb * bi * bi, 4.0 * wb * bi * bj,
            0.5 * wn * (v * v + e2), 0.5 * wn * (u * u + e2), -wn * u * v,
        ]
        # every pair is scattered in both orders, so diagonal pairs carry half
        # of their second derivative
        vals = np.concatenate(half + half)
        return self._hess.matrix(vals)

    @property
    def jacobian_structure(self) -> tuple[np.ndarray, np.ndarray]:
        return self._jac.rows, self._jac.cols

    @property
    def hessian_structure(self) -> tuple[np.ndarray, np.ndarray]:
        return self._hess.rows, self._hess.cols
