"""Exhaustive grid search over the set points of a tiny OPF.

The search space is the output of every generator except each AC island's
slack generator, plus the DC current of every pole of every converter except
each DC grid's slack station.  For each grid candidate the DC network is
solved as a linear resistor network, each converter's AC side and loss
balance is solved on its own, and finally the AC power flow of each island.
The resulting point is checked with :func:`~mcdc_opf.oracle.audit.audit`, so a
candidate is feasible exactly when every bound and rating holds.

Supported networks (anything else raises ``ValueError``):

* at most one generator per AC bus, with ``vmin == vmax`` at generator buses;
* one reference bus per AC island, hosting that island's slack generator;
* converter AC buses host a generator; converter ``qmin_ac == qmax_ac``;
* per DC grid one slack station whose DC bus has ``vmin_pole == vmax_pole``
  and whose neutral, if it has one, is rigidly grounded;
* no DC loads and no single-conductor aggregates.
"""

from __future__ import annotations

import cmath
import itertools
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import root

from ..formulation.solution import Solution
from ..network import DcTerminal, Grounding, Network
from ..nlp.lineardc import solve_linear_dc
from .audit import audit

NEU = DcTerminal.NEUTRAL


class NoFeasibleCandidate(ValueError):
    """No grid candidate satisfies all constraints."""


@dataclass
class BruteForceResult:
    objective: float
    setpoints: dict[str, float]
    solution: Solution
    n_candidates: int
    n_feasible: int
    grid: float
    # (setpoint tuple, cost) of every feasible candidate, sorted by set point
    curve: list[tuple[tuple[float, ...], float]] = field(default_factory=list)


def _components(nodes, edges):
    parent = {n: n for n in nodes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        parent[find(a)] = find(b)
    groups = defaultdict(list)
    for n in nodes:
        groups[find(n)].append(n)
    return list(groups.values())


class _Plan:
    """Set-point layout and static data of a supported network."""

    def __init__(self, net: Network, max_free: int):
        if net.single_conductor:
            raise ValueError("single-conductor aggregates are not supported")
        if net.dc_loads:
            raise ValueError("DC loads are not supported")
        self.net = net
        gens_at = defaultdict(list)
        for g in net.generators:
            gens_at[g.bus].append(g)
        for bus, gs in gens_at.items():
            if len(gs) > 1:
                raise ValueError(f"AC bus {bus} has more than one generator")
            b = net.ac_bus_map[bus]
            if b.vmin != b.vmax:
                raise ValueError(f"generator bus {bus} needs a fixed voltage (vmin == vmax)")
        self.gen_at = {bus: gs[0] for bus, gs in gens_at.items()}
        islands = _components([b.id for b in net.ac_buses],
                              [(l.from_bus, l.to_bus) for l in net.ac_branches])
        self.islands = []
        self.slack_gens = set()
        for isl in islands:
            refs = [b for b in isl if net.ac_bus_map[b].is_reference]
            if len(refs) != 1 or refs[0] not in self.gen_at:
                raise ValueError(f"AC island {sorted(isl)} needs one reference bus with a generator")
            self.islands.append((refs[0], sorted(isl, key=net.ac_bus_index.get)))
            self.slack_gens.add(self.gen_at[refs[0]].id)
        for cs in net.converters:
            if cs.ac_bus not in self.gen_at:
                raise ValueError(f"converter {cs.id} AC bus needs a generator")
            for cp in cs.poles:
                if cp.qmin_ac != cp.qmax_ac:
                    raise ValueError(f"converter {cs.id} needs fixed reactive power")
        dc_grids = _components([b.id for b in net.dc_buses],
                               [(b.from_bus, b.to_bus) for b in net.dc_branches])
        self.slack_convs = set()
        for grid in dc_grids:
            slack = [cs for cs in net.converters if cs.dc_bus in grid
                     and net.dc_bus_map[cs.dc_bus].vmin_pole == net.dc_bus_map[cs.dc_bus].vmax_pole]
            if len(slack) != 1:
                raise ValueError(f"DC grid {sorted(grid)} needs exactly one fixed-voltage station")
            cs = slack[0]
            if cs.has_neutral and cs.grounding is not Grounding.RIGID:
                raise ValueError(f"slack station {cs.id} must be rigidly grounded")
            self.slack_convs.add(cs.id)
        self.free: list[tuple[str, str, object, float, float]] = []
        for g in net.generators:
            if g.id not in self.slack_gens:
                self.free.append(("gen", g.id, None, g.pmin, g.pmax))
        for cs in net.converters:
            if cs.id not in self.slack_convs:
                for cp in cs.poles:
                    self.free.append(("pole", cs.id, cp.pole, cp.imin_dc, cp.imax_dc))
        if len(self.free) > max_free:
            raise ValueError(f"{len(self.free)} free set points exceed the limit of {max_free}")

    def names(self) -> list[str]:
        return [f"gen[{i}].p" if k == "gen" else f"conv[{i}/{p.label}].i_dc"
                for k, i, p, _, _ in self.free]


def _grid(lo: float, hi: float, step: float) -> list[float]:
    n = int(math.floor((hi - lo) / step + 1e-9))
    pts = [round(lo + k * step, 12) for k in range(n + 1)]
    if hi - pts[-1] > 1e-12:
        pts.append(hi)
    return pts


def _flow(va, vb, y):
    return va * (y * (va - vb)).conjugate()


def _pole_ac(cp, vac: float, q: float, p_in_dc: float):
    """Solve filter/converter nodes and the loss balance for one pole.

    Returns (p_ac, vf, vc) with the AC bus at angle zero, or None.
    """
    tf = cp.transformer
    y_tf = complex(tf.g, tf.b)
    y_pr = complex(cp.reactor.g, cp.reactor.b)
    va = complex(vac / tf.tap, 0.0)

    def eqs(z):
        p, vf, vc = z[0], complex(z[1], z[2]), complex(z[3], z[4])
        s_f = _flow(vf, va, y_tf) + _flow(vf, vc, y_pr) - 1j * cp.filter_b * abs(vf) ** 2
        s_c = _flow(vc, vf, y_pr) + complex(p, q)
        i_ac = abs(complex(p, q)) / abs(vc)
        loss = cp.loss_a + cp.loss_b * i_ac + cp.loss_c * i_ac * i_ac
        return [s_f.real, s_f.imag, s_c.real, s_c.imag, p + p_in_dc - loss]

    z0 = [cp.loss_a - p_in_dc, vac, 0.0, vac, 0.0]
    sol = root(eqs, z0, method="hybr", options={"xtol": 1e-14})
    if not np.all(np.isfinite(sol.x)) or max(abs(v) for v in eqs(sol.x)) > 1e-10:
        return None
    return float(sol.x[0]), complex(sol.x[1], sol.x[2]), complex(sol.x[3], sol.x[4])


def _evaluate(plan: _Plan, values: tuple[float, ...], tol: float):
    """Full operating point for one candidate, or None if it cannot be built
    or violates a limit."""
    net = plan.net
    gen_p = {}
    pole_i = {}
    for (kind, ent, pole, _, _), v in zip(plan.free, values):
        if kind == "gen":
            gen_p[ent] = v
        else:
            pole_i[ent, pole] = v

    # ---- DC network -----------------------------------------------------
    nodes = [(b.id, t) for b in net.dc_buses for t in sorted(b.terminals)]
    resistors = [((br.from_bus, t), (br.to_bus, t), c.r)
                 for br in net.dc_branches for t, c in sorted(br.conductors.items())]
    inj = defaultdict(float)
    fixed = {}
    for cs in net.converters:
        if cs.id in plan.slack_convs:
            bus = net.dc_bus_map[cs.dc_bus]
            for cp in cs.poles:
                t = cp.pole.terminal
                fixed[cs.dc_bus, t] = bus.vmin_pole if t is DcTerminal.POSITIVE else -bus.vmin_pole
        else:
            for cp in cs.poles:
                i = pole_i[cs.id, cp.pole]
                inj[cs.dc_bus, cp.pole.terminal] -= i
                if cs.has_neutral:
                    inj[cs.dc_bus, NEU] += i
        if cs.has_neutral and cs.grounding is Grounding.RIGID:
            fixed[cs.dc_bus, NEU] = 0.0
        elif cs.has_neutral and cs.grounding is Grounding.RESISTIVE:
            nodes.append(("ground", cs.id))
            fixed["ground", cs.id] = 0.0
            resistors.append(((cs.dc_bus, NEU), ("ground", cs.id), cs.r_ground))
    pot, cur = solve_linear_dc(nodes, resistors, inj, fixed)
    leaving = defaultdict(float)
    for (a, b, _), i in zip(resistors, cur):
        leaving[a] += i
        leaving[b] -= i
    # slack pole currents close KCL at their pinned terminals
    for cs in net.converters:
        if cs.id in plan.slack_convs:
            for cp in cs.poles:
                node = (cs.dc_bus, cp.pole.terminal)
                pole_i[cs.id, cp.pole] = inj[node] - leaving[node]

    # ---- converters ---------------------------------------------------------
    conv_out = {}
    s_bus = defaultdict(complex)  # power drawn from each AC bus by converters
    for cs in net.converters:
        vac = net.ac_bus_map[cs.ac_bus].vmin
        u0 = pot[cs.dc_bus, NEU] if cs.has_neutral else 0.0
        poles = {}
        i_n_sum = 0.0
        for cp in cs.poles:
            i = pole_i[cs.id, cp.pole]
            ut = pot[cs.dc_bus, cp.pole.terminal]
            i_n = -i if cs.has_neutral else 0.0
            solved = _pole_ac(cp, vac, cp.qmin_ac, ut * i + u0 * i_n)
            if solved is None:
                return None
            p, vf, vc = solved
            s_ac = complex(p, cp.qmin_ac)
            va = complex(vac / cp.transformer.tap, 0.0)
            y_tf = complex(cp.transformer.g, cp.transformer.b)
            y_pr = complex(cp.reactor.g, cp.reactor.b)
            s_tf_fr = _flow(va, vf, y_tf)
            s_bus[cs.ac_bus] += s_tf_fr
            i_ac = abs(s_ac) / abs(vc)
            poles[cp.pole.label] = dict(
                p_ac=p, q_ac=cp.qmin_ac, i_ac=i_ac, _vf=vf, _vc=vc,
                ptf_fr=s_tf_fr.real, qtf_fr=s_tf_fr.imag,
                ptf_to=_flow(vf, va, y_tf).real, qtf_to=_flow(vf, va, y_tf).imag,
                ppr_fr=_flow(vf, vc, y_pr).real, qpr_fr=_flow(vf, vc, y_pr).imag,
                ppr_to=_flow(vc, vf, y_pr).real, qpr_to=_flow(vc, vf, y_pr).imag,
                p_dc=ut * i, i_dc=i,
                loss=cp.loss_a + cp.loss_b * i_ac + cp.loss_c * i_ac * i_ac)
            if cs.has_neutral:
                poles[cp.pole.label]["i_dc_n"] = i_n
            i_n_sum += i_n
        entry: dict = {"poles": poles}
        if cs.has_neutral:
            entry["i_dc_n"] = i_n_sum
            entry["p_dc_n"] = u0 * i_n_sum
            if cs.grounding is Grounding.RIGID:
                # the earth closes KCL at a pinned neutral
                entry["i_ground"] = -(leaving[cs.dc_bus, NEU] + i_n_sum)
            elif cs.grounding is Grounding.RESISTIVE:
                entry["i_ground"] = u0 / cs.r_ground
        conv_out[cs.id] = entry

    # ---- AC power flow per island ----------------------------------------------
    demand = defaultdict(complex)
    for m in net.loads:
        demand[m.ac_bus] += complex(m.p, m.q)
    for bus, s in s_bus.items():
        demand[bus] += s
    vm, va = {}, {}
    gen_pq = {}
    for ref, buses in plan.islands:
        pv = [b for b in buses if b in plan.gen_at]
        unknown_va = [b for b in buses if b != ref]
        unknown_vm = [b for b in buses if b not in plan.gen_at]
        pbal = [b for b in buses if b != ref and (b not in plan.gen_at or
                                                  plan.gen_at[b].id not in plan.slack_gens)]
        qbal = unknown_vm
        lines = [l for l in net.ac_branches if l.from_bus in buses]

        def state(z):
            for k, b in enumerate(unknown_va):
                va[b] = z[k]
            for k, b in enumerate(unknown_vm):
                vm[b] = z[len(unknown_va) + k]
            va[ref] = 0.0
            for b in pv:
                vm[b] = net.ac_bus_map[b].vmin
            V = {b: cmath.rect(vm[b], va[b]) for b in buses}
            out = {b: complex(0.0) for b in buses}  # power leaving each bus into the grid
            for l in lines:
                y = complex(l.g, l.b)
                out[l.from_bus] += _flow(V[l.from_bus], V[l.to_bus], y)
                out[l.to_bus] += _flow(V[l.to_bus], V[l.from_bus], y)
            for b in buses:
                bb = net.ac_bus_map[b]
                out[b] += demand[b] + complex(bb.gshunt, -bb.bshunt) * vm[b] ** 2
            return V, out

        def mismatch(z):
            _, out = state(z)
            res = []
            for b in pbal:
                g = plan.gen_at.get(b)
                res.append(out[b].real - (gen_p[g.id] if g else 0.0))
            for b in qbal:
                res.append(out[b].imag)
            return res

        n_unk = len(unknown_va) + len(unknown_vm)
        if n_unk:
            z0 = [0.0] * len(unknown_va) + [1.0] * len(unknown_vm)
            sol = root(mismatch, z0, method="hybr", options={"xtol": 1e-14})
            if max(abs(v) for v in mismatch(sol.x)) > 1e-10:
                return None
            z = sol.x
        else:
            z = []
        V, out = state(z)
        for b in buses:
            g = plan.gen_at.get(b)
            if g is not None:
                p = out[b].real if g.id in plan.slack_gens else gen_p[g.id]
                gen_pq[g.id] = (p, out[b].imag)

    # ---- assemble and audit -------------------------------------------------
    V = {b.id: cmath.rect(vm[b.id], va[b.id]) for b in net.ac_buses}
    sol = Solution(case=net.name, model="brute-force", status="Candidate", objective=0.0)
    sol.generators = {g.id: {"p": gen_pq[g.id][0], "q": gen_pq[g.id][1]} for g in net.generators}
    sol.objective = float(sum(g.cost(gen_pq[g.id][0]) for g in net.generators))
    sol.ac_buses = {b.id: {"vm": vm[b.id], "va": va[b.id]} for b in net.ac_buses}
    for l in net.ac_branches:
        y = complex(l.g, l.b)
        s_fr = _flow(V[l.from_bus], V[l.to_bus], y)
        s_to = _flow(V[l.to_bus], V[l.from_bus], y)
        sol.ac_branches[l.id] = {"p_fr": s_fr.real, "q_fr": s_fr.imag,
                                 "p_to": s_to.real, "q_to": s_to.imag}
    sol.dc_terminals = {b.id: {t.label: pot[b.id, t] for t in sorted(b.terminals)}
                        for b in net.dc_buses}
    for br in net.dc_branches:
        sol.dc_branches[br.id] = {}
        for t, c in sorted(br.conductors.items()):
            i = (pot[br.from_bus, t] - pot[br.to_bus, t]) / c.r
            sol.dc_branches[br.id][t.label] = {"i_fr": i, "i_to": -i, "loss": c.r * i * i}
    for cs in net.converters:
        rot = cmath.rect(1.0, va[cs.ac_bus])
        for d in conv_out[cs.id]["poles"].values():
            vf, vc = d.pop("_vf") * rot, d.pop("_vc") * rot
            d.update(vm_f=abs(vf), va_f=cmath.phase(vf), vm_c=abs(vc), va_c=cmath.phase(vc))
    sol.converters = conv_out
    rep = audit(net, sol, tol)
    if not rep.ok:
        return None
    return sol


def brute_force_small_opf(network: Network, grid: float = 0.01, *, tol: float = 1e-6,
                          max_free: int = 3, workers: int = 1) -> BruteForceResult:
    """Lowest-cost feasible candidate on a uniform set-point grid.

    ``grid`` is the step in per unit along every free set point (generator
    output or pole DC current).  Candidates may be evaluated on ``workers``
    threads; the winner is chosen by (cost, set point) so the result does not
    depend on completion order.  Raises :class:`NoFeasibleCandidate` when no
    grid point is feasible.
    """
    plan = _Plan(network, max_free)
    axes = [_grid(lo, hi, grid) for *_, lo, hi in plan.free]
    candidates = list(itertools.product(*axes))

    def run(c):
        return c, _evaluate(plan, c, tol)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, candidates))
    else:
        results = [run(c) for c in candidates]
    feasible = [(s.objective, c, s) for c, s in results if s is not None]
    if not feasible:
        raise NoFeasibleCandidate(f"none of {len(candidates)} grid candidates is feasible")
    best = min(feasible, key=lambda t: (t[0], t[1]))
    curve = sorted((c, cost) for cost, c, _ in feasible)
    return BruteForceResult(best[0], dict(zip(plan.names(), best[1])), best[2], len(candidates),
                            len(feasible), grid, curve)
