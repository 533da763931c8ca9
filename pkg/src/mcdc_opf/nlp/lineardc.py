"""Nodal analysis of a linear resistor network."""

from __future__ import annotations

from collections.abc import Hashable, Iterable, Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularSystem(ValueError):
    """Some part of the network has no fixed potential."""


def solve_linear_dc(nodes: Iterable[Hashable],
                    resistors: Iterable[tuple[Hashable, Hashable, float]],
                    injections: Mapping[Hashable, float] | None = None,
                    fixed: Mapping[Hashable, float] | None = None,
                    ) -> tuple[dict, list[float]]:
    """Solve ``G u = i`` for node potentials.

    ``resistors`` are ``(a, b, r)`` with ``r > 0``.  ``injections`` are
    currents entering each node, ``fixed`` pins potentials (Dirichlet nodes).
    Returns potentials by node and the current of each resistor from ``a``
    to ``b``.
    """
    nodes = list(nodes)
    idx = {k: i for i, k in enumerate(nodes)}
    injections = dict(injections or {})
    fixed = dict(fixed or {})
    res = [(a, b, float(r)) for a, b, r in resistors]
    n = len(nodes)
    rows, cols, vals = [], [], []
    for a, b, r in res:
        if not r > 0:
            raise ValueError(f"resistance must be positive, got {r}")
        i, j = idx[a], idx[b]
        g = 1.0 / r
        rows += [i, j, i, j]
        cols += [i, j, j, i]
        vals += [g, g, -g, -g]
    G = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    u = np.zeros(n)
    pinned = np.zeros(n, dtype=bool)
    for k, v in fixed.items():
        u[idx[k]] = v
        pinned[idx[k]] = True
    rhs = np.zeros(n)
    for k, v in injections.items():
        rhs[idx[k]] += v
    free = np.flatnonzero(~pinned)
    # each connected component needs a pinned node
    ncomp, label = sp.csgraph.connected_components(G + sp.identity(n), directed=False)
    for c in range(ncomp):
        if not np.any(pinned[label == c]):
            raise SingularSystem(f"floating sub-network containing {nodes[np.flatnonzero(label == c)[0]]!r}")
    if free.size:
        Gff = G[free][:, free].tocsc()
        b = rhs[free] - G[free][:, pinned] @ u[pinned]
        u[free] = spla.spsolve(Gff, b) if free.size > 1 else b / Gff.toarray()[0, 0]
    pot = {k: float(u[idx[k]]) for k in nodes}
    cur = [(pot[a] - pot[b]) / r for a, b, r in res]
    return pot, cur
