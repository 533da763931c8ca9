import dataclasses
import math

import numpy as np
import pytest

from mcdc_opf import cases
from mcdc_opf.formulation import model
from mcdc_opf.formulation import (build_balanced, build_mcdc, census, extract_solution,
                                  flat_start)
from mcdc_opf.network import (DcTerminal, NotBalanceable, derive_balanced_equivalent,
                              pole_outage)
from mcdc_opf.nlp.derivatives import check_derivatives
from mcdc_opf.nlp.ipm import Status, solve
from mcdc_opf.oracle import audit
from mcdc_opf.oracle.toys import ac_toy, dc_toy

from nets import bipolar_link, one_station_feeder, resistive_link, sym_monopole_link


def counts(vmap):
    return vmap.n, int(vmap.is_eq.sum()), int((~vmap.is_eq).sum())


# -- census ----------------------------------------------------------------------


def test_hand_count_one_station_feeder():
    # 1 AC bus (reference): 2 vars, 3 eq       1 generator: 2 vars
    # 6 DC terminals: 6 / 6                     3 conductors: 6 / 6
    # 2 poles with neutral: 36 / 32 / 2 ineq    station neutral: 2 / 2
    # rigid ground: 1 / 1                       2 pole loads: 2 / 2
    _, vmap = build_mcdc(one_station_feeder())
    assert counts(vmap) == (57, 52, 2)


TOPOLOGIES = {
    "one_station_feeder": one_station_feeder,
    "bipolar_link": bipolar_link,
    "sym_monopole_link": sym_monopole_link,
    "resistive_link": resistive_link,
    "ac_toy": ac_toy,
    "dc_toy": dc_toy,
    "balanced_case": lambda: cases.network("balanced_bipolar_4dc"),
    "unbalanced_case": lambda: cases.network("unbalanced_tap_4dc"),
    "sweep_case": lambda: cases.network("sweep_base"),
    "pole_outage": lambda: pole_outage(cases.network("unbalanced_tap_4dc"), "conv2", "negative"),
}


@pytest.mark.parametrize("name", sorted(TOPOLOGIES))
def test_census_matches_built_problem(name):
    net = TOPOLOGIES[name]()
    _, vmap = build_mcdc(net)
    c = census(net)
    assert counts(vmap) == (c.n_vars, c.n_eq, c.n_ineq)


@pytest.mark.parametrize("name", ["bipolar_link", "balanced_case", "resistive_link"])
def test_census_of_balanced_model(name):
    net = TOPOLOGIES[name]()
    _, vmap = build_balanced(net)
    c = census(derive_balanced_equivalent(net))
    assert counts(vmap) == (c.n_vars, c.n_eq, c.n_ineq)


def test_pure_ac_network_has_no_dc_rows():
    _, vmap = build_mcdc(ac_toy())
    assert set(vmap.kinds()) == {"ac_bus", "gen", "ac_branch"}
    assert {k[0] for k in vmap.con_keys} == {"ac_bus", "ac_branch"}


def test_asym_negative_station_has_no_positive_pole(unbalanced_net):
    _, vmap = build_mcdc(unbalanced_net)
    ents = {k[1] for k in vmap.keys if k[0] == "conv_pole"}
    assert "conv3/negative" in ents
    assert "conv3/positive" not in ents


def test_balanced_model_one_voltage_per_dc_bus(balanced_net):
    _, vmap = build_balanced(balanced_net)
    volts = [k for k in vmap.keys if k[0] == "dc_terminal"]
    assert sorted(k[1] for k in volts) == sorted(b.id for b in balanced_net.dc_buses)


def test_balanced_model_rejects_unbalanced(unbalanced_net):
    with pytest.raises(NotBalanceable):
        build_balanced(unbalanced_net)


def test_variable_map_is_a_bijection(unbalanced_net):
    prob, vmap = build_mcdc(unbalanced_net)
    assert len(set(vmap.keys)) == vmap.n == prob.n
    assert [vmap[k] for k in vmap.keys] == list(range(vmap.n))
    assert len(set(vmap.con_keys)) == vmap.m == prob.m


# -- flat start ------------------------------------------------------------------


def test_flat_start_strictly_interior(unbalanced_net):
    prob, vmap = build_mcdc(unbalanced_net)
    x, pinned = flat_start(vmap)
    assert pinned == []
    assert np.all(x > prob.x_lb) and np.all(x < prob.x_ub)
    assert x[vmap["dc_terminal", "2", "positive"]] == 1.0
    assert x[vmap["dc_terminal", "2", "negative"]] == -1.0


def test_flat_start_pins_empty_intervals():
    # dc_toy fixes station cb's DC bus at exactly 1.0 and the AC voltages at 1.0
    _, vmap = build_mcdc(dc_toy())
    x, pinned = flat_start(vmap)
    assert "dc_terminal[2].positive" in pinned
    assert x[vmap["dc_terminal", "2", "positive"]] == 1.0


def test_perturbed_start_reaches_same_optimum(solved, balanced_net):
    prob, vmap = build_mcdc(balanced_net)
    x0, _ = flat_start(vmap)
    rng = np.random.default_rng(3)
    lo = np.where(np.isfinite(prob.x_lb), prob.x_lb, -1.0)
    hi = np.where(np.isfinite(prob.x_ub), prob.x_ub, 1.0)
    x1 = np.clip(x0 + rng.uniform(-0.02, 0.02, x0.size), lo + 1e-3, hi - 1e-3)
    x1 = np.where(prob.x_lb == prob.x_ub, prob.x_lb, x1)
    r = solve(prob, x1)
    assert r.status is Status.OPTIMAL
    assert audit(balanced_net, extract_solution(vmap, r.x, status="Optimal")).ok
    assert r.objective == pytest.approx(solved("balanced_bipolar_4dc").solution.objective,
                                        abs=1e-6)


# -- individual equations ------------------------------------------------------------


class Point:
    """Flat start with named overrides; rows evaluated by key."""

    def __init__(self, net):
        self.prob, self.vmap = build_mcdc(net)
        self.x, _ = flat_start(self.vmap)

    def set(self, kind, ent, fld, value):
        self.x[self.vmap[kind, ent, fld]] = value

    def row(self, kind, ent, fld):
        return float(self.prob.constraints(self.x)[self.vmap.con_index[kind, ent, fld]])


def test_ac_branch_flow_rows():
    pt = Point(ac_toy())
    v1, v3 = 1.0 * np.exp(0.02j), 0.97 * np.exp(-0.05j)
    br = ac_toy().ac_branch_map["l13"]
    y = complex(br.g, br.b)
    s_fr = v1 * np.conj(y * (v1 - v3))
    s_to = v3 * np.conj(y * (v3 - v1))
    for fld, v in (("vm", abs(v1)), ("va", np.angle(v1))):
        pt.set("ac_bus", "1", fld, v)
    for fld, v in (("vm", abs(v3)), ("va", np.angle(v3))):
        pt.set("ac_bus", "3", fld, v)
    for fld, v in (("p_fr", s_fr.real), ("q_fr", s_fr.imag), ("p_to", s_to.real),
                   ("q_to", s_to.imag)):
        pt.set("ac_branch", "l13", fld, v)
    for fld in ("p_fr_def", "q_fr_def", "p_to_def", "q_to_def"):
        assert abs(pt.row("ac_branch", "l13", fld)) <= 1e-12


def test_ac_nodal_balance_row():
    pt = Point(ac_toy())
    # bus 3 has a 1.0 + 0.3j load and no generator; two lines deliver it
    pt.set("ac_branch", "l13", "p_to", -0.6)
    pt.set("ac_branch", "l23", "p_to", -0.4)
    pt.set("ac_branch", "l13", "q_to", -0.1)
    pt.set("ac_branch", "l23", "q_to", -0.2)
    assert abs(pt.row("ac_bus", "3", "p_balance")) <= 1e-12
    assert abs(pt.row("ac_bus", "3", "q_balance")) <= 1e-12


def test_ohm_law_row():
    pt = Point(dc_toy())
    r = dc_toy().dc_branch_map["d12"].conductors[DcTerminal.POSITIVE].r
    pt.set("dc_terminal", "1", "positive", 1.03)
    pt.set("dc_conductor", "d12", "positive.i_fr", 0.03 / r)
    pt.set("dc_conductor", "d12", "positive.i_to", -0.03 / r)
    assert abs(pt.row("dc_conductor", "d12", "positive.ohm")) <= 1e-12
    assert abs(pt.row("dc_conductor", "d12", "positive.antisymmetry")) <= 1e-12


def test_loss_polynomial_row():
    pt = Point(dc_toy())
    cp = dc_toy().converter_map["ca"].poles[0]
    i_ac, u0, i0 = 0.7, 0.02, 0.3
    loss = cp.loss_a + cp.loss_b * i_ac + cp.loss_c * i_ac ** 2
    pt.set("conv_pole", "ca/positive", "i_ac", i_ac)
    pt.set("dc_terminal", "1", "neutral", u0)
    pt.set("conv_pole", "ca/positive", "i_dc_n", i0)
    pt.set("conv_pole", "ca/positive", "p_ac", 0.55)
    pt.set("conv_pole", "ca/positive", "p_dc", loss - 0.55 - u0 * i0)
    assert abs(pt.row("conv_pole", "ca/positive", "loss_balance")) <= 1e-12


def test_ac_current_identity_row():
    pt = Point(dc_toy())
    for fld, v in (("p_ac", 0.3), ("q_ac", 0.4), ("vm_c", 1.04), ("i_ac", 0.5 / 1.04)):
        pt.set("conv_pole", "ca/positive", fld, v)
    eps = model.AC_CURRENT_EPS
    smoothing = eps - (math.hypot(0.5, eps) - 0.5)
    assert abs(pt.row("conv_pole", "ca/positive", "ac_current") - smoothing) <= 1e-12
    assert 0.0 < smoothing <= eps


def test_ac_current_row_vanishes_at_idle_pole():
    pt = Point(dc_toy())
    for fld, v in (("p_ac", 0.0), ("q_ac", 0.0), ("vm_c", 0.97), ("i_ac", 0.0)):
        pt.set("conv_pole", "ca/positive", fld, v)
    assert pt.row("conv_pole", "ca/positive", "ac_current") == 0.0


def test_filter_rows():
    pt = Point(dc_toy())
    bf = dc_toy().converter_map["ca"].poles[0].filter_b
    vf = 1.02
    pt.set("conv_pole", "ca/positive", "vm_f", vf)
    pt.set("conv_pole", "ca/positive", "ptf_to", 0.25)
    pt.set("conv_pole", "ca/positive", "ppr_fr", -0.25)
    pt.set("conv_pole", "ca/positive", "qtf_to", 0.1)
    pt.set("conv_pole", "ca/positive", "qpr_fr", bf * vf * vf - 0.1)
    assert abs(pt.row("conv_pole", "ca/positive", "filter_p")) <= 1e-12
    assert abs(pt.row("conv_pole", "ca/positive", "filter_q")) <= 1e-12


def test_transformer_with_no_voltage_difference_carries_nothing():
    pt = Point(dc_toy())
    pt.set("ac_bus", "a", "va", 0.13)
    pt.set("conv_pole", "ca/positive", "va_f", 0.13)
    pt.set("conv_pole", "ca/positive", "vm_f", 1.0)
    for fld in ("ptf_fr", "qtf_fr", "ptf_to", "qtf_to"):
        pt.set("conv_pole", "ca/positive", fld, 0.0)
    for fld in ("p_fr_def", "q_fr_def", "p_to_def", "q_to_def"):
        assert abs(pt.row("conv_pole", "ca/positive/transformer", fld)) <= 1e-12


def test_dc_power_row():
    pt = Point(dc_toy())
    pt.set("dc_terminal", "1", "positive", 1.05)
    pt.set("conv_pole", "ca/positive", "i_dc", -0.4)
    pt.set("conv_pole", "ca/positive", "p_dc", -0.42)
    assert abs(pt.row("conv_pole", "ca/positive", "dc_power")) <= 1e-12


# -- derivatives -----------------------------------------------------------------------


@pytest.mark.parametrize("name", cases.NAMES)
@pytest.mark.parametrize("model", ["mcdc", "balanced"])
def test_derivatives_at_random_interior_points(name, model):
    net = cases.network(name)
    if model == "balanced":
        try:
            derive_balanced_equivalent(net)
        except NotBalanceable:
            pytest.skip("no balanced equivalent")
    prob, vmap = (build_mcdc if model == "mcdc" else build_balanced)(net)
    x0, _ = flat_start(vmap)
    lo = np.where(np.isfinite(prob.x_lb), prob.x_lb, x0 - 1.0)
    hi = np.where(np.isfinite(prob.x_ub), prob.x_ub, x0 + 1.0)
    rng = np.random.default_rng(2024)
    for _ in range(10):
        x = lo + (hi - lo) * rng.uniform(0.05, 0.95, x0.size)
        rep = check_derivatives(prob, x, lam=rng.uniform(-1.0, 1.0, prob.m))
        assert rep.max_error <= 1e-6, rep


# -- solutions -----------------------------------------------------------------------------


def test_balanced_optimum_splits_poles_evenly(solved):
    mc = solved("balanced_bipolar_4dc").solution
    bal = solved("balanced_bipolar_4dc", "balanced").solution
    assert all(abs(u) <= 1e-6 for u in mc.neutral_voltages().values())
    for cid, entry in mc.converters.items():
        lump = bal.converters[cid]["poles"]["positive"]
        for p in entry["poles"].values():
            assert p["p_ac"] == pytest.approx(lump["p_ac"] / 2, abs=1e-6)


def test_unbalanced_optimum_pole_powers_differ(solved):
    sol = solved("unbalanced_tap_4dc").solution
    p = sol.pole_p_ac("conv2")
    assert p["positive"] * p["negative"] < 0


def test_conductor_loss_is_r_i_squared(solved, unbalanced_net):
    sol = solved("unbalanced_tap_4dc").solution
    for br in unbalanced_net.dc_branches:
        for t, c in br.conductors.items():
            got = sol.dc_branches[br.id][t.label]
            assert got["loss"] == pytest.approx(c.r * got["i_fr"] ** 2, rel=1e-12)


@pytest.mark.parametrize("name", cases.NAMES)
def test_neutral_kcl_tight_at_optimum(solved, name):
    out = solved(name)
    c = out.result.kkt
    x = out.result.x
    prob, vmap = build_mcdc(out.network)
    vals = prob.constraints(x)
    for (kind, ent, fld), k in vmap.con_index.items():
        if kind == "dc_terminal" and fld == "neutral.kcl":
            assert abs(vals[k]) <= 1e-8
    assert c["error"] <= 1e-8


def test_asym_negative_station_neutral_current(solved):
    sol = solved("unbalanced_tap_4dc").solution
    conv3 = sol.converters["conv3"]
    assert conv3["i_dc_n"] == pytest.approx(-conv3["poles"]["negative"]["i_dc"], abs=1e-9)


def test_extract_solution_reads_point(balanced_net):
    prob, vmap = build_mcdc(balanced_net)
    x, _ = flat_start(vmap)
    sol = extract_solution(vmap, x)
    assert sol.dc_terminals["1"]["positive"] == x[vmap["dc_terminal", "1", "positive"]]
    assert sol.objective == pytest.approx(prob.objective(x))


def test_forced_pole_imbalance_costs_more(solved, balanced_net):
    """Pinning a 60/40 split of a station's AC power cannot beat the free optimum."""
    free = solved("balanced_bipolar_4dc")
    prob, vmap = build_mcdc(balanced_net)
    x0, _ = flat_start(vmap)
    for cid in ("conv2", "conv3"):
        ip = vmap["conv_pole", f"{cid}/positive", "p_ac"]
        ineg = vmap["conv_pole", f"{cid}/negative", "p_ac"]
        total = free.result.x[ip] + free.result.x[ineg]
        lb, ub = prob.x_lb.copy(), prob.x_ub.copy()
        lb[ip] = ub[ip] = 0.6 * total
        lb[ineg] = ub[ineg] = 0.4 * total
        r = solve(dataclasses.replace(prob, x_lb=lb, x_ub=ub), np.clip(x0, lb, ub))
        assert r.status is Status.OPTIMAL
        assert r.objective > free.solution.objective + 1e-4
        sol = extract_solution(vmap, r.x, status="Optimal")
        assert sol.pole_p_ac(cid)["positive"] == pytest.approx(0.6 * total)
        assert audit(balanced_net, sol).ok
