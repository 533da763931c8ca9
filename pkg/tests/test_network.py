import dataclasses

import pytest

from mcdc_opf import cases
from mcdc_opf.network import (AcBranch, AcBus, Conductor, Configuration, DcBranch, DcBus,
                              DcTerminal, Generator, Grounding, Load, NetworkError,
                              NotBalanceable, Pole, check, conductor_outage,
                              derive_balanced_equivalent, pole_outage, single_conductor_view,
                              validate, with_load)
from mcdc_opf.oracle.toys import _pole

from nets import bipolar_link, two_bus_ac

P, N, O = DcTerminal.POSITIVE, DcTerminal.NEGATIVE, DcTerminal.NEUTRAL


def rules(net):
    return [(v.entity, v.rule) for v in validate(net)]


# -- validate --------------------------------------------------------------------


def test_well_formed_networks_have_no_violations():
    assert validate(two_bus_ac()) == []
    assert validate(bipolar_link()) == []
    for name in cases.NAMES:
        assert validate(cases.network(name)) == []


def test_neutral_conductor_at_bus_without_neutral():
    net = bipolar_link()
    net = net.replace(dc_buses=(DcBus("1"), DcBus("2", frozenset({P, N}))),
                      converters=(net.converters[0],),
                      ac_buses=net.ac_buses[:1], generators=net.generators[:1],
                      loads=net.loads[:1])
    got = rules(net)
    assert got == [("dc_branch d12", "neutral conductor but dc bus '2' lacks a neutral terminal")]


def test_bipolar_converter_at_bus_without_negative_terminal():
    net = bipolar_link()
    br = DcBranch("d12", "1", "2", {P: Conductor(0.05, 1.0), O: Conductor(0.05, 1.0)})
    net = net.replace(dc_buses=(DcBus("1", frozenset({P, O})), DcBus("2")), dc_branches=(br,))
    got = rules(net)
    assert len(got) == 1
    assert got[0][0] == "converter ca" and "negative" in got[0][1]


@pytest.mark.parametrize("mutate, entity", [
    (lambda n: n.replace(ac_buses=(AcBus("1"), AcBus("2"))), "ac_bus 1"),
    (lambda n: n.replace(generators=()), "network"),
    (lambda n: n.replace(loads=(Load("d", 0.5, 0.1, ac_bus="9"),)), "load d"),
    (lambda n: n.replace(ac_buses=(AcBus("1", 1.1, 0.9, is_reference=True), AcBus("2"))),
     "ac_bus 1"),
    (lambda n: n.replace(generators=(Generator("g", "1", 1.0, 0.0, -1.0, 1.0),)), "generator g"),
    (lambda n: n.replace(ac_branches=n.ac_branches + (AcBranch("s", "1", "1", 1.0, -10.0, 1.0),)),
     "ac_branch s"),
    (lambda n: n.replace(loads=(Load("d", 0.5), Load("d", 0.1, ac_bus="2"))), "load d"),
])
def test_single_rule_violations(mutate, entity):
    got = rules(mutate(two_bus_ac()))
    assert got and all(e == entity for e, _ in got)


def test_floating_neutral_is_reported():
    net = bipolar_link()
    convs = tuple(dataclasses.replace(c, grounding=Grounding.NONE) for c in net.converters)
    got = rules(net.replace(converters=convs))
    assert got == [("dc_bus 1", "neutral sub-network has no grounded converter (floating neutral)")]


def test_resistive_grounding_needs_resistance():
    net = bipolar_link()
    c0 = dataclasses.replace(net.converters[0], grounding=Grounding.RESISTIVE, r_ground=None)
    assert rules(net.replace(converters=(c0, net.converters[1]))) == [
        ("converter ca", "resistive grounding requires r_ground > 0")]


def test_check_raises_with_every_violation():
    net = two_bus_ac().replace(generators=(), loads=(Load("d", 0.5, ac_bus="x"),))
    with pytest.raises(NetworkError) as err:
        check(net)
    assert len(err.value.violations) == 2


def test_dc_load_on_neutral_rejected():
    net = bipolar_link()
    net = net.replace(loads=net.loads + (Load("x", 0.1, 0.0, None, "2", O),))
    assert rules(net) == [("load x", "DC loads attach to a pole terminal, not the neutral")]


# -- balanced equivalent -----------------------------------------------------------


def test_balanced_link_aggregates_to_single_conductor():
    net = bipolar_link()
    agg = derive_balanced_equivalent(net)
    assert agg.single_conductor
    assert validate(agg) == []
    ca = agg.converter_map["ca"]
    assert len(ca.poles) == 1
    assert ca.poles[0].smax == 2 * net.converter_map["ca"].poles[0].smax
    cond = agg.dc_branch_map["d12"].conductors
    assert list(cond) == [P]
    # pole pair in parallel
    assert cond[P].r == pytest.approx(0.025)
    assert cond[P].rating == 2.0


def test_lumped_pole_loss_polynomial():
    pole = _pole(Pole.POSITIVE)
    lumped = derive_balanced_equivalent(bipolar_link()).converter_map["ca"].poles[0]
    # each pole carries half the lumped current I: 2 (a + b I/2 + c I^2/4)
    for i in (0.0, 0.3, 1.7):
        per_pole = pole.loss_a + pole.loss_b * i / 2 + pole.loss_c * (i / 2) ** 2
        lump = lumped.loss_a + lumped.loss_b * i + lumped.loss_c * i * i
        assert lump == pytest.approx(2 * per_pole, rel=1e-14)


def test_four_bus_case_aggregate_keeps_bus_bounds(balanced_net):
    agg = derive_balanced_equivalent(balanced_net)
    assert len(agg.dc_buses) == 4
    for a, b in zip(agg.dc_buses, balanced_net.dc_buses):
        assert (a.vmin_pole, a.vmax_pole) == (b.vmin_pole, b.vmax_pole)


def test_asym_monopole_is_not_balanceable(unbalanced_net):
    with pytest.raises(NotBalanceable) as err:
        derive_balanced_equivalent(unbalanced_net)
    assert err.value.entity == "converter conv3"


def test_unequal_poles_not_balanceable():
    net = bipolar_link()
    ca = net.converters[0]
    weak = dataclasses.replace(ca.poles[1], smax=0.5)
    net = net.replace(converters=(dataclasses.replace(ca, poles=(ca.poles[0], weak)),
                                  net.converters[1]))
    with pytest.raises(NotBalanceable, match="pole parameters differ"):
        derive_balanced_equivalent(net)


def test_unequal_conductors_not_balanceable():
    net = bipolar_link()
    br = DcBranch("d12", "1", "2", {P: Conductor(0.05, 1.0), N: Conductor(0.06, 1.0),
                                    O: Conductor(0.05, 1.0)})
    with pytest.raises(NotBalanceable) as err:
        derive_balanced_equivalent(net.replace(dc_branches=(br,)))
    assert err.value.entity == "dc_branch d12"


def test_unequal_dc_loads_not_balanceable():
    net = bipolar_link()
    net = net.replace(loads=net.loads + (Load("x", 0.1, 0.0, None, "2", P),))
    with pytest.raises(NotBalanceable, match="unequal pole loads"):
        derive_balanced_equivalent(net)
    paired = net.replace(loads=net.loads + (Load("y", 0.1, 0.0, None, "2", N),))
    agg = derive_balanced_equivalent(paired)
    assert [m.p for m in agg.dc_loads] == [pytest.approx(0.2)]


def test_balanced_equivalent_is_idempotent(balanced_net):
    once = derive_balanced_equivalent(balanced_net)
    assert derive_balanced_equivalent(once) is once
    assert single_conductor_view(once) is once


def test_single_conductor_view_of_unbalanced_case(unbalanced_net):
    view = single_conductor_view(unbalanced_net)
    assert validate(view) == []
    # the tapped monopole keeps its one pole unchanged
    conv3 = view.converter_map["conv3"].poles[0]
    orig = unbalanced_net.converter_map["conv3"].poles[0]
    assert conv3.smax == orig.smax
    assert conv3.loss_c == orig.loss_c


# -- derived networks ------------------------------------------------------------------


def test_pole_outage_leaves_asymmetric_monopole(balanced_net):
    net = pole_outage(balanced_net, "conv2", "positive")
    c = net.converter_map["conv2"]
    assert c.configuration is Configuration.ASYM_MONOPOLE_NEGATIVE
    assert [p.pole for p in c.poles] == [Pole.NEGATIVE]
    assert validate(net) == []
    with pytest.raises(ValueError):
        pole_outage(net, "conv2", "negative")
    with pytest.raises(KeyError):
        pole_outage(balanced_net, "nope", "negative")


def test_conductor_outage(balanced_net):
    br = balanced_net.dc_branches[0]
    net = conductor_outage(balanced_net, br.id, "neutral")
    assert O not in net.dc_branch_map[br.id].conductors
    assert set(balanced_net.dc_branch_map[br.id].conductors) == {P, N, O}


def test_with_load_replaces_demand_only(balanced_net):
    m = balanced_net.loads[0]
    net = with_load(balanced_net, m.id, 0.42)
    assert net.load_map[m.id].p == 0.42
    assert net.load_map[m.id].q == m.q
    assert balanced_net.load_map[m.id].p == m.p


def test_network_is_hashable_and_immutable(balanced_net):
    again = cases.network("balanced_bipolar_4dc")
    assert again == balanced_net and hash(again) == hash(balanced_net)
    assert hash(with_load(balanced_net, "load5", 0.0)) != hash(balanced_net)
    with pytest.raises(dataclasses.FrozenInstanceError):
        balanced_net.base_mva = 1.0
