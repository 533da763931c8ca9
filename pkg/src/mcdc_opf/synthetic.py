"""Seeded synthetic balanced networks for scale tests.

Separate AC areas feed a meshed bipolar DC grid with identical poles,
grounded rigidly at the first station only.
"""

from __future__ import annotations

import numpy as np

from .network import (AcBranch, AcBus, Conductor, Configuration, ConverterPole, ConverterStation,
                      DcBranch, DcBus, DcTerminal, Generator, Grounding, Load, Network, Pole,
                      Reactor, Transformer)

_ALL = frozenset({DcTerminal.POSITIVE, DcTerminal.NEGATIVE, DcTerminal.NEUTRAL})


def _pole(pole: Pole) -> ConverterPole:
    tf = 1.0 / complex(0.0015, 0.1121)
    pr = 1.0 / complex(0.0001, 0.1643)
    return ConverterPole(pole=pole, smax=1.0, pmin_ac=-1.0, pmax_ac=1.0, qmin_ac=-0.5,
                         qmax_ac=0.5, pmin_dc=-1.2, pmax_dc=1.2, imax_ac=1.1, imin_dc=-1.2,
                         imax_dc=1.2, vmin_cv=0.9, vmax_cv=1.1, loss_a=0.0055, loss_b=0.0044,
                         loss_c=0.0164, transformer=Transformer(tf.real, tf.imag, 1.0),
                         filter_b=0.0887, reactor=Reactor(pr.real, pr.imag))


def synthetic_balanced(n_ac: int = 100, n_dc: int = 10, seed: int = 7, *,
                       name: str | None = None) -> Network:
    """Balanced hybrid network with ``n_ac`` AC buses and ``n_dc`` DC buses.

    The AC buses form ``n_dc`` separate areas (a ring with one random chord
    each), linked only through the DC grid.  Areas alternate between cheap
    and expensive generation so every station carries power at the optimum.
    The same ``seed`` always gives the same network.
    """
    if n_dc < 2 or n_ac < 4 * n_dc:
        raise ValueError("need at least two DC buses and four AC buses per DC bus")
    rng = np.random.default_rng(seed)
    size = n_ac // n_dc
    buses, lines, gens, loads = [], [], [], []
    for k in range(n_dc):
        first = k * size
        last = n_ac if k == n_dc - 1 else first + size
        ids = list(range(first, last))
        buses += [AcBus(str(i + 1), 0.9, 1.1, is_reference=(i == first)) for i in ids]
        edges = {(ids[j], ids[(j + 1) % len(ids)]) for j in range(len(ids))}
        a, b = sorted(int(v) for v in rng.choice(len(ids), 2, replace=False))
        if b - a > 1 and (a, b) != (0, len(ids) - 1):
            edges.add((ids[a], ids[b]))
        for a, b in sorted(tuple(sorted(e)) for e in edges):
            r = float(rng.uniform(0.005, 0.02))
            lines.append(AcBranch.from_impedance(f"ac{a + 1}-{b + 1}", str(a + 1), str(b + 1),
                                                 r, 3.0 * r, 3.0))
        cheap = k % 2 == 0
        for i in ids:
            if (i - first) % 5 == 0:
                cost = rng.uniform(10.0, 15.0) if cheap else rng.uniform(30.0, 40.0)
                gens.append(Generator(f"gen{i + 1}", str(i + 1), 0.0, 2.0, -1.0, 1.0, 0.0,
                                      float(cost), float(rng.uniform(0.5, 2.0))))
            else:
                p = float(rng.uniform(0.05, 0.15))
                loads.append(Load(f"load{i + 1}", p, 0.2 * p, ac_bus=str(i + 1)))

    dc_buses = [DcBus(str(k + 1), _ALL) for k in range(n_dc)]
    dc_edges = {(k, (k + 1) % n_dc) if k + 1 < n_dc else ((k + 1) % n_dc, k)
                for k in range(n_dc)}
    for k in range(0, n_dc - 2, 3):
        dc_edges.add((k, k + 2))
    dc_branches = []
    for a, b in sorted(dc_edges):
        r = float(rng.uniform(0.02, 0.06))
        cond = {t: Conductor(r, 2.0) for t in _ALL}
        dc_branches.append(DcBranch(f"dc{a + 1}-{b + 1}", str(a + 1), str(b + 1), cond))
    bip = (_pole(Pole.POSITIVE), _pole(Pole.NEGATIVE))
    convs = [ConverterStation(f"conv{k + 1}", str(k * size + 2), str(k + 1),
                              Configuration.BIPOLAR, bip,
                              Grounding.RIGID if k == 0 else Grounding.NONE)
             for k in range(n_dc)]
    return Network(100.0, 345.0, tuple(buses), tuple(lines), tuple(gens), tuple(loads),
                   tuple(dc_buses), tuple(dc_branches), tuple(convs),
                   name=name or f"synthetic_{n_ac}ac_{n_dc}dc_s{seed}")
