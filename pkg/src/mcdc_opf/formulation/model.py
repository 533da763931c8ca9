"""Assembly of the multi-conductor AC/DC OPF as an :class:`NlpProblem`.

Sign conventions
----------------
* AC branch, transformer and reactor flows are directed: ``p_fr`` leaves the
  from-side node, ``p_to`` leaves the to-side node.
* Converter AC power ``p_ac``/``q_ac`` and DC quantities ``p_dc``/``i_dc``
  are positive when flowing *into* the converter pole (from the AC filter
  side and from the DC terminal respectively).  The loss balance therefore
  reads ``p_ac + p_dc + U0 * i_dc_n = a + b I + c I^2``.
* Conductor currents ``i_fr`` leave the from-bus terminal, ``i_to`` leave the
  to-bus terminal.  Each DC terminal row sums currents leaving the node.
* A ground current is positive from the neutral terminal into earth.
* A DC load of power ``p`` on terminal ``t`` draws ``i`` from ``t`` and
  returns it to the neutral: ``p = (U_t - U_0) i``.

Census (closed form, see :func:`census`)
----------------------------------------
per AC bus 2 vars / 2 eq (+1 eq at a reference bus); per generator 2 vars;
per AC branch 4 vars / 4 eq / 2 ineq; per DC terminal 1 var / 1 eq; per
conductor 2 vars / 2 eq; per converter pole 18 vars / 16 eq / 1 ineq, or
17 / 15 / 1 for poles without a neutral (symmetric monopole, lumped pole);
per station with a neutral 2 vars / 2 eq; per symmetric monopole 1 eq;
per grounded station 1 var / 1 eq; per DC load 1 var / 1 eq.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..network import (Configuration, ConverterPole, ConverterStation, DcTerminal,
                       Grounding, Network, check, derive_balanced_equivalent)
from ..nlp.problem import NlpProblem
from .terms import COS, SIN, TermModel

INF = np.inf
# smoothing of the converter current magnitude (pu); the model current differs
# from |S|/vm by at most this over vm
AC_CURRENT_EPS = 1e-8

POLE_FIELDS = ("p_ac", "q_ac", "i_ac", "vm_f", "va_f", "vm_c", "va_c",
               "ptf_fr", "qtf_fr", "ptf_to", "qtf_to",
               "ppr_fr", "qpr_fr", "ppr_to", "qpr_to",
               "p_dc", "i_dc", "i_dc_n")

Key = tuple[str, str, str]


def _name(key: Key) -> str:
    kind, ent, fld = key
    return f"{kind}[{ent}].{fld}"


@dataclass
class VariableMap:
    """Bijection between entity descriptors and NLP indices.

    Keys are ``(kind, entity, field)`` triples, for example
    ``("conv_pole", "conv1/positive", "p_ac")`` or ``("dc_terminal", "4", "neutral")``.
    """

    network: Network
    model: str
    keys: list[Key]
    lb: np.ndarray
    ub: np.ndarray
    con_keys: list[Key]
    is_eq: np.ndarray
    index: dict[Key, int] = field(repr=False, default_factory=dict)
    con_index: dict[Key, int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {k: i for i, k in enumerate(self.keys)}
        if not self.con_index:
            self.con_index = {k: i for i, k in enumerate(self.con_keys)}
        if len(self.index) != len(self.keys) or len(self.con_index) != len(self.con_keys):
            raise AssertionError("duplicate descriptor")

    @property
    def n(self) -> int:
        return len(self.keys)

    @property
    def m(self) -> int:
        return len(self.con_keys)

    @property
    def names(self) -> list[str]:
        return [_name(k) for k in self.keys]

    @property
    def con_names(self) -> list[str]:
        return [_name(k) for k in self.con_keys]

    def __getitem__(self, key: Key) -> int:
        return self.index[key]

    def get(self, kind: str, entity: str, fld: str) -> int | None:
        return self.index.get((kind, entity, fld))

    def kinds(self) -> list[str]:
        return [k[0] for k in self.keys]


def pole_entity(cs_id: str, pole) -> str:
    return f"{cs_id}/{pole.label}"


class _Builder:
    def __init__(self):
        self.keys: list[Key] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.idx: dict[Key, int] = {}
        self.con_keys: list[Key] = []
        self.is_eq: list[bool] = []
        self.tm = TermModel(0)

    def var(self, kind, ent, fld, lb=-INF, ub=INF) -> int:
        key = (kind, ent, fld)
        if key in self.idx:
            raise AssertionError(f"duplicate variable {key}")
        self.idx[key] = len(self.keys)
        self.keys.append(key)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        return self.idx[key]

    def row(self, kind, ent, fld, eq=True) -> int:
        self.con_keys.append((kind, ent, fld))
        self.is_eq.append(eq)
        return self.tm.add_row()

    def flow_rows(self, kind, ent, fr, to, vi, ti, vj, tj, g, b, tap=1.0):
        """Directed flow definitions of a series admittance ``g + jb``.

        The from-side voltage is divided by ``tap``.  ``fr``/``to`` are the
        (p, q) variable indices for the two directions.
        """
        tm = self.tm
        k = 1.0 / tap
        # from side:  P = g (Ui/t)^2 - g (Ui/t) Uj cos(ti-tj) - b (Ui/t) Uj sin(ti-tj)
        r = self.row(kind, ent, "p_fr_def")
        tm.lin(r, 1.0, fr[0])
        tm.quad(r, -g * k * k, vi, vi)
        tm.trig(r, g * k, vi, vj, ti, tj, COS)
        tm.trig(r, b * k, vi, vj, ti, tj, SIN)
        #            Q = -b (Ui/t)^2 + b (Ui/t) Uj cos - g (Ui/t) Uj sin
        r = self.row(kind, ent, "q_fr_def")
        tm.lin(r, 1.0, fr[1])
        tm.quad(r, b * k * k, vi, vi)
        tm.trig(r, -b * k, vi, vj, ti, tj, COS)
        tm.trig(r, g * k, vi, vj, ti, tj, SIN)
        r = self.row(kind, ent, "p_to_def")
        tm.lin(r, 1.0, to[0])
        tm.quad(r, -g, vj, vj)
        tm.trig(r, g * k, vj, vi, tj, ti, COS)
        tm.trig(r, b * k, vj, vi, tj, ti, SIN)
        r = self.row(kind, ent, "q_to_def")
        tm.lin(r, 1.0, to[1])
        tm.quad(r, b, vj, vj)
        tm.trig(r, -b * k, vj, vi, tj, ti, COS)
        tm.trig(r, g * k, vj, vi, tj, ti, SIN)


def _station_has_neutral(network: Network, cs: ConverterStation) -> bool:
    return not network.single_conductor and cs.has_neutral


def _assemble(network: Network, model: str) -> tuple[NlpProblem, VariableMap]:
    B = _Builder()
    tm = B.tm
    single = network.single_conductor

    # ---------------- variables -----------------------------------------
    vm, va = {}, {}
    for bus in network.ac_buses:
        vm[bus.id] = B.var("ac_bus", bus.id, "vm", bus.vmin, bus.vmax)
        va[bus.id] = B.var("ac_bus", bus.id, "va")
    pg, qg = {}, {}
    for g in network.generators:
        pg[g.id] = B.var("gen", g.id, "p", g.pmin, g.pmax)
        qg[g.id] = B.var("gen", g.id, "q", g.qmin, g.qmax)
    brv = {}
    for br in network.ac_branches:
        s = br.rating
        brv[br.id] = tuple(B.var("ac_branch", br.id, f, -s, s)
                           for f in ("p_fr", "q_fr", "p_to", "q_to"))
    u = {}
    for bus in network.dc_buses:
        for t in sorted(bus.terminals):
            lo, hi = bus.terminal_bounds(t)
            u[bus.id, t] = B.var("dc_terminal", bus.id, t.label, lo, hi)
    icond = {}
    for br in network.dc_branches:
        for t in sorted(br.conductors):
            c = br.conductors[t]
            icond[br.id, t] = (B.var("dc_conductor", br.id, f"{t.label}.i_fr", -c.rating, c.rating),
                               B.var("dc_conductor", br.id, f"{t.label}.i_to", -c.rating, c.rating))
    pv = {}
    sv = {}
    for cs in network.converters:
        has_n = _station_has_neutral(network, cs)
        for cp in cs.poles:
            ent = pole_entity(cs.id, cp.pole)
            d = {}
            imax_dc = max(abs(cp.imin_dc), abs(cp.imax_dc))
            # no lower bound on i_ac: the current row already makes it
            # nonnegative, and an explicit bound lets an idle pole stall there
            bounds = dict(p_ac=(cp.pmin_ac, cp.pmax_ac), q_ac=(cp.qmin_ac, cp.qmax_ac),
                          i_ac=(-INF, cp.imax_ac), vm_f=(cp.vmin_cv, cp.vmax_cv),
                          vm_c=(cp.vmin_cv, cp.vmax_cv), p_dc=(cp.pmin_dc, cp.pmax_dc),
                          i_dc=(cp.imin_dc, cp.imax_dc), i_dc_n=(-imax_dc, imax_dc))
            for f in POLE_FIELDS:
                if f == "i_dc_n" and not has_n:
                    continue
                lo, hi = bounds.get(f, (-INF, INF))
                d[f] = B.var("conv_pole", ent, f, lo, hi)
            pv[cs.id, cp.pole] = d
        d = {}
        if _station_has_neutral(network, cs):
            d["p_dc_n"] = B.var("conv", cs.id, "p_dc_n")
            d["i_dc_n"] = B.var("conv", cs.id, "i_dc_n")
            if cs.grounding is not Grounding.NONE:
                d["i_ground"] = B.var("conv", cs.id, "i_ground")
        sv[cs.id] = d
    iload = {}
    for m in network.dc_loads:
        iload[m.id] = B.var("dc_load", m.id, "i")

    # ---------------- AC buses --------------------------------------------
    ac_rows = {}
    for bus in network.ac_buses:
        rp = B.row("ac_bus", bus.id, "p_balance")
        rq = B.row("ac_bus", bus.id, "q_balance")
        ac_rows[bus.id] = (rp, rq)
        if bus.gshunt:
            tm.quad(rp, bus.gshunt, vm[bus.id], vm[bus.id])
        if bus.bshunt:
            tm.quad(rq, -bus.bshunt, vm[bus.id], vm[bus.id])
        if bus.is_reference:
            r = B.row("ac_bus", bus.id, "reference_angle")
            tm.lin(r, 1.0, va[bus.id])
    for g in network.generators:
        rp, rq = ac_rows[g.bus]
        tm.lin(rp, -1.0, pg[g.id])
        tm.lin(rq, -1.0, qg[g.id])
    for m in network.loads:
        if not m.is_dc:
            rp, rq = ac_rows[m.ac_bus]
            tm.const(rp, m.p)
            tm.const(rq, m.q)

    # ---------------- AC branches -----------------------------------------
    for br in network.ac_branches:
        pf, qf, pt, qt = brv[br.id]
        i, j = br.from_bus, br.to_bus
        B.flow_rows("ac_branch", br.id, (pf, qf), (pt, qt), vm[i], va[i], vm[j], va[j], br.g, br.b)
        tm.lin(ac_rows[i][0], 1.0, pf)
        tm.lin(ac_rows[i][1], 1.0, qf)
        tm.lin(ac_rows[j][0], 1.0, pt)
        tm.lin(ac_rows[j][1], 1.0, qt)
        for side, (p, q) in (("fr", (pf, qf)), ("to", (pt, qt))):
            r = B.row("ac_branch", br.id, f"rating_{side}", eq=False)
            tm.quad(r, 1.0, p, p)
            tm.quad(r, 1.0, q, q)
            tm.const(r, -br.rating ** 2)

    # ---------------- DC terminals ---------------------------------------
    kcl = {}
    for bus in network.dc_buses:
        for t in sorted(bus.terminals):
            kcl[bus.id, t] = B.row("dc_terminal", bus.id, f"{t.label}.kcl")
    for br in network.dc_branches:
        for t in sorted(br.conductors):
            c = br.conductors[t]
            i_fr, i_to = icond[br.id, t]
            tm.lin(kcl[br.from_bus, t], 1.0, i_fr)
            tm.lin(kcl[br.to_bus, t], 1.0, i_to)
            r = B.row("dc_conductor", br.id, f"{t.label}.antisymmetry")
            tm.lin(r, 1.0, i_fr)
            tm.lin(r, 1.0, i_to)
            r = B.row("dc_conductor", br.id, f"{t.label}.ohm")
            tm.lin(r, c.r, i_fr)
            tm.lin(r, -1.0, u[br.from_bus, t])
            tm.lin(r, 1.0, u[br.to_bus, t])
    neu = DcTerminal.NEUTRAL
    for m in network.dc_loads:
        i = iload[m.id]
        tm.lin(kcl[m.dc_bus, m.terminal], 1.0, i)
        r = B.row("dc_load", m.id, "power")
        tm.const(r, -m.p)
        tm.quad(r, 1.0, u[m.dc_bus, m.terminal], i)
        if (m.dc_bus, neu) in u:
            tm.lin(kcl[m.dc_bus, neu], -1.0, i)
            tm.quad(r, -1.0, u[m.dc_bus, neu], i)

    # ---------------- converters ------------------------------------------
    for cs in network.converters:
        has_n = _station_has_neutral(network, cs)
        u0 = u.get((cs.dc_bus, neu)) if has_n else None
        ac = cs.ac_bus
        for cp in cs.poles:
            d = pv[cs.id, cp.pole]
            ent = pole_entity(cs.id, cp.pole)
            term = cp.pole.terminal if not single else DcTerminal.POSITIVE
            _pole_rows(B, ent, cp, d, vm[ac], va[ac], ac_rows[ac], u[cs.dc_bus, term], u0)
            tm.lin(kcl[cs.dc_bus, term], 1.0, d["i_dc"])
        st = sv[cs.id]
        if _station_has_neutral(network, cs):
            r = B.row("conv", cs.id, "neutral_current")
            tm.lin(r, 1.0, st["i_dc_n"])
            for cp in cs.poles:
                tm.lin(r, -1.0, pv[cs.id, cp.pole]["i_dc_n"])
            r = B.row("conv", cs.id, "neutral_power")
            tm.lin(r, 1.0, st["p_dc_n"])
            tm.quad(r, -1.0, u0, st["i_dc_n"])
            tm.lin(kcl[cs.dc_bus, neu], 1.0, st["i_dc_n"])
            if cs.grounding is Grounding.RESISTIVE:
                r = B.row("conv", cs.id, "ground_ohm")
                tm.lin(r, cs.r_ground, st["i_ground"])
                tm.lin(r, -1.0, u0)
                tm.lin(kcl[cs.dc_bus, neu], 1.0, st["i_ground"])
            elif cs.grounding is Grounding.RIGID:
                r = B.row("conv", cs.id, "ground_rigid")
                tm.lin(r, 1.0, u0)
                tm.lin(kcl[cs.dc_bus, neu], 1.0, st["i_ground"])
        elif cs.configuration is Configuration.SYM_MONOPOLE and not single:
            # series poles around an ungrounded midpoint
            r = B.row("conv", cs.id, "series_current")
            for cp in cs.poles:
                tm.lin(r, 1.0, pv[cs.id, cp.pole]["i_dc"])

    n = len(B.keys)
    tm.n = n
    tm.freeze()
    vmap = VariableMap(network, model, B.keys, np.array(B.lb), np.array(B.ub),
                       B.con_keys, np.array(B.is_eq, dtype=bool), dict(B.idx))

    gi = np.array([pg[g.id] for g in network.generators], dtype=np.int64)
    ca = np.array([g.cost_a for g in network.generators])
    cb = np.array([g.cost_b for g in network.generators])
    cc = np.array([g.cost_c for g in network.generators])
    hess_diag = np.zeros(n)
    np.add.at(hess_diag, gi, 2.0 * cc)
    obj_rows = np.unique(gi)

    def objective(x):
        p = x[gi]
        return float(ca.sum() + cb @ p + cc @ (p * p))

    def gradient(x):
        g = np.zeros(n)
        np.add.at(g, gi, cb + 2.0 * cc * x[gi])
        return g

    # the objective Hessian sits on diagonal entries that may be absent from
    # the constraint pattern: merge patterns once
    hr, hc = tm.hessian_structure
    obj_pat = sp.csr_matrix((np.ones(obj_rows.size), (obj_rows, obj_rows)), shape=(n, n))

    def hessian(x, lam, obj_factor):
        H = tm.hessian(x, np.asarray(lam, dtype=float))
        if obj_factor:
            H = H + sp.csr_matrix((obj_factor * hess_diag[obj_rows], (obj_rows, obj_rows)),
                                  shape=(n, n))
        return H

    pat = (sp.csr_matrix((np.ones(hr.size), (hr, hc)), shape=(n, n)) + obj_pat).tocoo()
    prob = NlpProblem(
        x_lb=vmap.lb, x_ub=vmap.ub, is_eq=vmap.is_eq,
        objective=objective, gradient=gradient,
        constraints=tm.values, jacobian=tm.jacobian, hessian=hessian,
        var_names=tuple(vmap.names), con_names=tuple(vmap.con_names),
        jacobian_structure=tm.jacobian_structure,
        hessian_structure=(pat.row.astype(np.int64), pat.col.astype(np.int64)),
    )
    return prob, vmap


def _pole_rows(B: _Builder, ent: str, cp: ConverterPole, d: dict, vm_i: int, va_i: int,
               ac_rows: tuple[int, int], u_t: int, u0: int | None) -> None:
    tm = B.tm
    tf = cp.transformer
    # transformer: AC bus -> filter node
    B.flow_rows("conv_pole", ent + "/transformer", (d["ptf_fr"], d["qtf_fr"]),
                (d["ptf_to"], d["qtf_to"]), vm_i, va_i, d["vm_f"], d["va_f"], tf.g, tf.b, tf.tap)
    tm.lin(ac_rows[0], 1.0, d["ptf_fr"])
    tm.lin(ac_rows[1], 1.0, d["qtf_fr"])
    # phase reactor: filter node -> converter node
    B.flow_rows("conv_pole", ent + "/reactor", (d["ppr_fr"], d["qpr_fr"]),
                (d["ppr_to"], d["qpr_to"]), d["vm_f"], d["va_f"], d["vm_c"], d["va_c"],
                cp.reactor.g, cp.reactor.b)
    r = B.row("conv_pole", ent, "filter_p")
    tm.lin(r, 1.0, d["ptf_to"])
    tm.lin(r, 1.0, d["ppr_fr"])
    r = B.row("conv_pole", ent, "filter_q")
    tm.lin(r, 1.0, d["qtf_to"])
    tm.lin(r, 1.0, d["qpr_fr"])
    if cp.filter_b:
        tm.quad(r, -cp.filter_b, d["vm_f"], d["vm_f"])
    r = B.row("conv_pole", ent, "conv_node_p")
    tm.lin(r, 1.0, d["ppr_to"])
    tm.lin(r, 1.0, d["p_ac"])
    r = B.row("conv_pole", ent, "conv_node_q")
    tm.lin(r, 1.0, d["qpr_to"])
    tm.lin(r, 1.0, d["q_ac"])
    # vm I = |S|, written with a gradient that survives an idle pole
    r = B.row("conv_pole", ent, "ac_current")
    tm.quad(r, 1.0, d["vm_c"], d["i_ac"])
    tm.norm(r, -1.0, d["p_ac"], d["q_ac"], AC_CURRENT_EPS)
    r = B.row("conv_pole", ent, "loss_balance")
    tm.lin(r, 1.0, d["p_ac"])
    tm.lin(r, 1.0, d["p_dc"])
    if u0 is not None:
        tm.quad(r, 1.0, u0, d["i_dc_n"])
    tm.const(r, -cp.loss_a)
    tm.lin(r, -cp.loss_b, d["i_ac"])
    tm.quad(r, -cp.loss_c, d["i_ac"], d["i_ac"])
    r = B.row("conv_pole", ent, "dc_power")
    tm.lin(r, 1.0, d["p_dc"])
    tm.quad(r, -1.0, u_t, d["i_dc"])
    if u0 is not None:
        r = B.row("conv_pole", ent, "pole_current")
        tm.lin(r, 1.0, d["i_dc"])
        tm.lin(r, 1.0, d["i_dc_n"])
    r = B.row("conv_pole", ent, "pq_circle", eq=False)
    tm.quad(r, 1.0, d["p_ac"], d["p_ac"])
    tm.quad(r, 1.0, d["q_ac"], d["q_ac"])
    tm.const(r, -cp.smax ** 2)


def build_mcdc(network: Network) -> tuple[NlpProblem, VariableMap]:
    """Multi-conductor OPF of ``network`` (validated first)."""
    check(network)
    return _assemble(network, "mcdc")


def build_balanced(network: Network) -> tuple[NlpProblem, VariableMap]:
    """Single-conductor reference OPF on the balanced equivalent of ``network``.

    Raises :class:`~mcdc_opf.network.NotBalanceable` for unbalanced input.
    """
    eq = derive_balanced_equivalent(check(network))
    return _assemble(eq, "balanced")


def build_single_conductor(network: Network) -> tuple[NlpProblem, VariableMap]:
    """Single-wire OPF of any network, balanced or not (no precondition)."""
    from ..network import single_conductor_view
    return _assemble(single_conductor_view(check(network)), "balanced")


@dataclass(frozen=True)
class Census:
    n_vars: int
    n_eq: int
    n_ineq: int


def census(network: Network) -> Census:
    """Variable and constraint counts predicted from the topology alone."""
    single = network.single_conductor
    n_ac = len(network.ac_buses)
    n_ref = sum(b.is_reference for b in network.ac_buses)
    n_gen = len(network.generators)
    n_br = len(network.ac_branches)
    n_term = sum(len(b.terminals) for b in network.dc_buses)
    n_cond = sum(len(b.conductors) for b in network.dc_branches)
    n_load = len(network.dc_loads)
    poles_n = poles_plain = st_n = st_sym = st_gnd = 0
    for cs in network.converters:
        neutral = not single and cs.has_neutral
        if neutral:
            poles_n += len(cs.poles)
            st_n += 1
            st_gnd += cs.grounding is not Grounding.NONE
        else:
            poles_plain += len(cs.poles)
            st_sym += (not single and cs.configuration is Configuration.SYM_MONOPOLE)
    n_vars = (2 * n_ac + 2 * n_gen + 4 * n_br + n_term + 2 * n_cond
              + 18 * poles_n + 17 * poles_plain + 2 * st_n + st_gnd + n_load)
    n_eq = (2 * n_ac + n_ref + 4 * n_br + n_term + 2 * n_cond
            + 16 * poles_n + 15 * poles_plain + 2 * st_n + st_sym + st_gnd + n_load)
    n_ineq = 2 * n_br + poles_n + poles_plain
    return Census(n_vars, n_eq, n_ineq)


def flat_start(vmap: VariableMap, margin: float = 1e-4) -> tuple[np.ndarray, list[str]]:
    """Flat starting point pushed strictly inside the bounds.

    AC magnitudes 1, angles 0, DC positive terminals +1, negative -1, neutral
    0, everything else 0.  Variables whose bounds leave no interior are
    pinned at the bound and returned by name.
    """
    x = np.zeros(vmap.n)
    for i, (kind, _, fld) in enumerate(vmap.keys):
        if kind == "ac_bus" and fld == "vm":
            x[i] = 1.0
        elif kind == "conv_pole" and fld in ("vm_f", "vm_c"):
            x[i] = 1.0
        elif kind == "dc_terminal":
            x[i] = {"positive": 1.0, "negative": -1.0}.get(fld, 0.0)
    lb, ub = vmap.lb, vmap.ub
    pinned = []
    width = ub - lb
    m = np.minimum(margin, 0.5 * width)
    lo = np.where(np.isfinite(lb), lb + m, -INF)
    hi = np.where(np.isfinite(ub), ub - m, INF)
    x = np.minimum(np.maximum(x, lo), hi)
    for i in np.flatnonzero(width <= 0):
        x[i] = lb[i]
        pinned.append(vmap.names[i])
    return x, pinned
