"""Constraint-by-constraint feasibility audit of a :class:`Solution`.

Everything here is evaluated straight from the network data with complex
phasor arithmetic.  Branch flows and conductor currents are recomputed from
the voltages and used in the nodal balances; the flows and currents reported
in the solution are checked against the recomputed ones separately.  Nothing
is imported from the optimisation model.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

from .._jsonfmt import dumps
from ..network import Configuration, DcTerminal, Grounding, Network

NEU, POS = DcTerminal.NEUTRAL, DcTerminal.POSITIVE


class DimensionMismatch(ValueError):
    """The solution does not describe the entities of the network."""


@dataclass(frozen=True)
class Residual:
    category: str
    entity: str
    check: str
    value: float
    kind: str = "eq"  # "eq": signed residual, "ineq": violation amount >= 0

    @property
    def name(self) -> str:
        return f"{self.category}[{self.entity}].{self.check}"


@dataclass
class AuditReport:
    tol: float
    residuals: list[Residual] = field(default_factory=list)

    @property
    def flags(self) -> list[Residual]:
        return [r for r in self.residuals if abs(r.value) > self.tol]

    @property
    def ok(self) -> bool:
        return not self.flags

    @property
    def max_residual(self) -> float:
        return max((abs(r.value) for r in self.residuals), default=0.0)

    def by_category(self, category: str) -> list[Residual]:
        return [r for r in self.residuals if r.category == category]

    def kcl(self) -> dict[tuple[str, str], float]:
        """DC terminal current balances keyed by (bus, terminal label)."""
        out = {}
        for r in self.by_category("dc_kcl"):
            bus, label = r.entity.rsplit("/", 1)
            out[bus, label] = r.value
        return out

    def to_dict(self) -> dict:
        return {"tol": self.tol, "ok": self.ok, "n_checks": len(self.residuals),
                "max_residual": self.max_residual,
                "flags": [{"name": r.name, "kind": r.kind, "value": r.value} for r in self.flags],
                "dc_kcl": {f"{b}/{t}": v for (b, t), v in sorted(self.kcl().items())}}

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def table(self, *, all_rows: bool = False) -> str:
        rows = self.residuals if all_rows else self.flags
        head = f"audit: {len(self.residuals)} checks, {len(self.flags)} flagged at tol {self.tol:g}"
        if not rows:
            return head
        w = max(len(r.name) for r in rows)
        lines = [head, f"{'constraint':<{w}}  {'kind':<5}  {'residual':>12}"]
        for r in rows:
            mark = "  <-" if abs(r.value) > self.tol else ""
            lines.append(f"{r.name:<{w}}  {r.kind:<5}  {r.value:>12.4e}{mark}")
        return "\n".join(lines)


def _flow(va: complex, vb: complex, y: complex) -> complex:
    """Complex power leaving node a towards b through series admittance y."""
    return va * (y * (va - vb)).conjugate()


def _above(v: float, hi: float) -> float:
    return max(0.0, v - hi)


def _outside(v: float, lo: float, hi: float) -> float:
    return max(0.0, lo - v, v - hi)


def _require(cond: bool, what: str) -> None:
    if not cond:
        raise DimensionMismatch(what)


def _check_shape(net: Network, sol) -> None:
    _require(set(sol.generators) == {g.id for g in net.generators}, "generator ids differ")
    _require(set(sol.ac_buses) == {b.id for b in net.ac_buses}, "AC bus ids differ")
    _require(set(sol.ac_branches) == {b.id for b in net.ac_branches}, "AC branch ids differ")
    _require(set(sol.dc_terminals) == {b.id for b in net.dc_buses}, "DC bus ids differ")
    for b in net.dc_buses:
        want = {t.label for t in b.terminals}
        _require(set(sol.dc_terminals[b.id]) == want, f"DC bus {b.id} terminals differ")
    _require(set(sol.dc_branches) == {b.id for b in net.dc_branches}, "DC branch ids differ")
    for br in net.dc_branches:
        want = {t.label for t in br.conductors}
        _require(set(sol.dc_branches[br.id]) == want, f"DC branch {br.id} conductors differ")
    _require(set(sol.converters) == {c.id for c in net.converters}, "converter ids differ")
    for cs in net.converters:
        want = {p.pole.label for p in cs.poles}
        _require(set(sol.converters[cs.id]["poles"]) == want, f"converter {cs.id} poles differ")
    _require(set(sol.dc_loads) == {m.id for m in net.dc_loads}, "DC load ids differ")


def audit(network: Network, solution, tol: float = 1e-6) -> AuditReport:
    """Evaluate every physical constraint of ``network`` at ``solution``.

    Raises :class:`DimensionMismatch` when the solution's entities do not
    match the network's.
    """
    net, sol = network, solution
    _check_shape(net, sol)
    rep = AuditReport(tol)
    add = rep.residuals.append
    single = net.single_conductor

    # ---- AC side --------------------------------------------------------
    V = {b: cmath.rect(v["vm"], v["va"]) for b, v in sol.ac_buses.items()}
    inj = {b.id: complex(0.0) for b in net.ac_buses}  # net injection into the bus
    for b in net.ac_buses:
        vm = sol.ac_buses[b.id]["vm"]
        add(Residual("ac_bus", b.id, "vm_bounds", _outside(vm, b.vmin, b.vmax), "ineq"))
        if b.is_reference:
            add(Residual("ac_bus", b.id, "reference_angle", sol.ac_buses[b.id]["va"]))
        inj[b.id] -= complex(b.gshunt, -b.bshunt) * vm * vm
    for g in net.generators:
        p, q = sol.generators[g.id]["p"], sol.generators[g.id]["q"]
        inj[g.bus] += complex(p, q)
        add(Residual("gen", g.id, "p_bounds", _outside(p, g.pmin, g.pmax), "ineq"))
        add(Residual("gen", g.id, "q_bounds", _outside(q, g.qmin, g.qmax), "ineq"))
    for m in net.loads:
        if not m.is_dc:
            inj[m.ac_bus] -= complex(m.p, m.q)
    for br in net.ac_branches:
        y = complex(br.g, br.b)
        s_fr = _flow(V[br.from_bus], V[br.to_bus], y)
        s_to = _flow(V[br.to_bus], V[br.from_bus], y)
        inj[br.from_bus] -= s_fr
        inj[br.to_bus] -= s_to
        rep_ = sol.ac_branches[br.id]
        add(Residual("ac_branch", br.id, "p_fr", rep_["p_fr"] - s_fr.real))
        add(Residual("ac_branch", br.id, "q_fr", rep_["q_fr"] - s_fr.imag))
        add(Residual("ac_branch", br.id, "p_to", rep_["p_to"] - s_to.real))
        add(Residual("ac_branch", br.id, "q_to", rep_["q_to"] - s_to.imag))
        add(Residual("ac_branch", br.id, "rating_fr", _above(abs(s_fr), br.rating), "ineq"))
        add(Residual("ac_branch", br.id, "rating_to", _above(abs(s_to), br.rating), "ineq"))

    # ---- DC terminal voltages --------------------------------------------
    U = {}
    for b in net.dc_buses:
        for t in b.terminals:
            u = sol.dc_terminals[b.id][t.label]
            U[b.id, t] = u
            lo, hi = b.terminal_bounds(t)
            add(Residual("dc_terminal", f"{b.id}/{t.label}", "bounds", _outside(u, lo, hi), "ineq"))
    leaving = {k: 0.0 for k in U}  # currents leaving each terminal node

    for br in net.dc_branches:
        for t, c in br.conductors.items():
            i_phys = (U[br.from_bus, t] - U[br.to_bus, t]) / c.r
            leaving[br.from_bus, t] += i_phys
            leaving[br.to_bus, t] -= i_phys
            r = sol.dc_branches[br.id][t.label]
            ent = f"{br.id}/{t.label}"
            add(Residual("dc_conductor", ent, "ohm", r["i_fr"] - i_phys))
            add(Residual("dc_conductor", ent, "antisymmetry", r["i_fr"] + r["i_to"]))
            add(Residual("dc_conductor", ent, "rating", _above(abs(i_phys), c.rating), "ineq"))

    for m in net.dc_loads:
        i = sol.dc_loads[m.id]["i"]
        u0 = U.get((m.dc_bus, NEU), 0.0)
        leaving[m.dc_bus, m.terminal] += i
        if (m.dc_bus, NEU) in leaving:
            leaving[m.dc_bus, NEU] -= i
        add(Residual("dc_load", m.id, "power", (U[m.dc_bus, m.terminal] - u0) * i - m.p))

    # ---- converters --------------------------------------------------------
    for cs in net.converters:
        st = sol.converters[cs.id]
        neutral = cs.has_neutral and not single
        u0 = U[cs.dc_bus, NEU] if neutral else 0.0
        va = V[cs.ac_bus]
        i_n_total = 0.0
        i_dc_total = 0.0
        for cp in cs.poles:
            d = st["poles"][cp.pole.label]
            ent = f"{cs.id}/{cp.pole.label}"
            term = POS if single else cp.pole.terminal
            vf = cmath.rect(d["vm_f"], d["va_f"])
            vc = cmath.rect(d["vm_c"], d["va_c"])
            tf = cp.transformer
            y_tf = complex(tf.g, tf.b)
            y_pr = complex(cp.reactor.g, cp.reactor.b)
            # transformer with the tap on the AC-bus side
            s_tf_fr = _flow(va / tf.tap, vf, y_tf)
            s_tf_to = _flow(vf, va / tf.tap, y_tf)
            s_pr_fr = _flow(vf, vc, y_pr)
            s_pr_to = _flow(vc, vf, y_pr)
            s_ac = complex(d["p_ac"], d["q_ac"])
            inj[cs.ac_bus] -= s_tf_fr
            for name, got, want in (("ptf_fr", d["ptf_fr"], s_tf_fr.real),
                                    ("qtf_fr", d["qtf_fr"], s_tf_fr.imag),
                                    ("ptf_to", d["ptf_to"], s_tf_to.real),
                                    ("qtf_to", d["qtf_to"], s_tf_to.imag),
                                    ("ppr_fr", d["ppr_fr"], s_pr_fr.real),
                                    ("qpr_fr", d["qpr_fr"], s_pr_fr.imag),
                                    ("ppr_to", d["ppr_to"], s_pr_to.real),
                                    ("qpr_to", d["qpr_to"], s_pr_to.imag)):
                add(Residual("conv_pole", ent, name, got - want))
            s_filter = s_tf_to + s_pr_fr - 1j * cp.filter_b * abs(vf) ** 2
            add(Residual("conv_pole", ent, "filter_p", s_filter.real))
            add(Residual("conv_pole", ent, "filter_q", s_filter.imag))
            s_node = s_pr_to + s_ac
            add(Residual("conv_pole", ent, "conv_node_p", s_node.real))
            add(Residual("conv_pole", ent, "conv_node_q", s_node.imag))
            i_ac = abs(s_ac) / abs(vc)
            add(Residual("conv_pole", ent, "ac_current", d["i_ac"] - i_ac))
            loss = cp.loss_a + cp.loss_b * i_ac + cp.loss_c * i_ac * i_ac
            i_dc = d["i_dc"]
            i_n = -i_dc if neutral else 0.0
            if neutral:
                add(Residual("conv_pole", ent, "pole_current", d["i_dc_n"] - i_n))
            # AC power in plus DC power in (pole and return terminal) equals losses
            p_in_dc = U[cs.dc_bus, term] * i_dc + u0 * i_n
            add(Residual("conv_pole", ent, "loss_balance", d["p_ac"] + p_in_dc - loss))
            add(Residual("conv_pole", ent, "dc_power", d["p_dc"] - U[cs.dc_bus, term] * i_dc))
            leaving[cs.dc_bus, term] += i_dc
            i_n_total += i_n
            i_dc_total += i_dc
            for name, v, lo, hi in (("p_ac_bounds", d["p_ac"], cp.pmin_ac, cp.pmax_ac),
                                    ("q_ac_bounds", d["q_ac"], cp.qmin_ac, cp.qmax_ac),
                                    ("p_dc_bounds", d["p_dc"], cp.pmin_dc, cp.pmax_dc),
                                    ("i_dc_bounds", i_dc, cp.imin_dc, cp.imax_dc),
                                    ("vm_c_bounds", abs(vc), cp.vmin_cv, cp.vmax_cv),
                                    ("vm_f_bounds", abs(vf), cp.vmin_cv, cp.vmax_cv)):
                add(Residual("conv_pole", ent, name, _outside(v, lo, hi), "ineq"))
            add(Residual("conv_pole", ent, "i_ac_bound", _above(i_ac, cp.imax_ac), "ineq"))
            add(Residual("conv_pole", ent, "pq_circle", _above(abs(s_ac), cp.smax), "ineq"))
        if neutral:
            leaving[cs.dc_bus, NEU] += i_n_total
            if "i_dc_n" in st:
                add(Residual("conv", cs.id, "neutral_current", st["i_dc_n"] - i_n_total))
            if cs.grounding is Grounding.RIGID:
                add(Residual("conv", cs.id, "ground_rigid", u0))
                ig = st.get("i_ground", 0.0)
                leaving[cs.dc_bus, NEU] += ig
            elif cs.grounding is Grounding.RESISTIVE:
                ig = u0 / cs.r_ground
                leaving[cs.dc_bus, NEU] += ig
                add(Residual("conv", cs.id, "ground_ohm", st.get("i_ground", 0.0) - ig))
        elif cs.configuration is Configuration.SYM_MONOPOLE and not single:
            add(Residual("conv", cs.id, "series_current", i_dc_total))

    for (bus, t), v in sorted(leaving.items(), key=lambda kv: (kv[0][0], int(kv[0][1]))):
        add(Residual("dc_kcl", f"{bus}/{t.label}", "kcl", v))
    for b in net.ac_buses:
        add(Residual("ac_bus", b.id, "p_balance", inj[b.id].real))
        add(Residual("ac_bus", b.id, "q_balance", inj[b.id].imag))
    return rep
