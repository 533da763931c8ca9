"""Tiny networks sized for :func:`~mcdc_opf.oracle.brute.brute_force_small_opf`."""

from __future__ import annotations

from ..network import (AcBranch, AcBus, Conductor, Configuration, ConverterPole,
                       ConverterStation, DcBranch, DcBus, DcTerminal, Generator, Grounding, Load,
                       Network, Pole, Reactor, Transformer)

P, O = DcTerminal.POSITIVE, DcTerminal.NEUTRAL


def ac_toy(load: float = 1.0) -> Network:
    """Three buses, two fixed-voltage generators, one load: one free set point."""
    buses = (AcBus("1", 1.0, 1.0, is_reference=True), AcBus("2", 1.01, 1.01), AcBus("3", 0.9, 1.1))
    lines = tuple(AcBranch.from_impedance(f"l{a}{b}", a, b, 0.02, 0.1, 2.0)
                  for a, b in (("1", "2"), ("1", "3"), ("2", "3")))
    gens = (Generator("g1", "1", 0.0, 1.0, -1.0, 1.0, 0.0, 20.0, 5.0),
            Generator("g2", "2", 0.0, 1.0, -1.0, 1.0, 0.0, 25.0, 2.0))
    loads = (Load("d3", load, 0.3 * load, ac_bus="3"),)
    return Network(ac_buses=buses, ac_branches=lines, generators=gens, loads=loads,
                   name="ac_toy")


def infeasible_toy() -> Network:
    """The AC toy with demand above the combined generator capacity."""
    net = ac_toy(2.5)
    return net.replace(name="infeasible_toy")


def _pole(pole: Pole) -> ConverterPole:
    tf = 1.0 / complex(0.0015, 0.1121)
    pr = 1.0 / complex(0.0001, 0.1643)
    return ConverterPole(pole=pole, smax=1.0, pmin_ac=-1.0, pmax_ac=1.0, qmin_ac=0.0, qmax_ac=0.0,
                         pmin_dc=-1.2, pmax_dc=1.2, imax_ac=1.1, imin_dc=-1.2, imax_dc=1.2,
                         vmin_cv=0.9, vmax_cv=1.1, loss_a=0.0055, loss_b=0.0044, loss_c=0.0164,
                         transformer=Transformer(tf.real, tf.imag, 1.0), filter_b=0.0887,
                         reactor=Reactor(pr.real, pr.imag))


def dc_toy() -> Network:
    """Two single-bus AC areas joined by a monopolar link with metallic return.

    Station ``cb`` holds the DC voltage and is rigidly grounded; the pole
    current of station ``ca`` is the only free set point.
    """
    buses = (AcBus("a", 1.0, 1.0, is_reference=True), AcBus("b", 1.0, 1.0, is_reference=True))
    gens = (Generator("ga", "a", 0.0, 2.0, -1.0, 1.0, 0.0, 10.0, 10.0),
            Generator("gb", "b", 0.0, 2.0, -1.0, 1.0, 0.0, 20.0, 10.0))
    loads = (Load("la", 0.6, 0.1, ac_bus="a"), Load("lb", 0.6, 0.1, ac_bus="b"))
    dc_buses = (DcBus("1", frozenset({P, O})), DcBus("2", frozenset({P, O}), 1.0, 1.0))
    link = DcBranch("d12", "1", "2", {P: Conductor(0.05, 1.5), O: Conductor(0.05, 1.5)})
    mono = Configuration.ASYM_MONOPOLE_POSITIVE
    convs = (ConverterStation("ca", "a", "1", mono, (_pole(Pole.POSITIVE),), Grounding.NONE),
             ConverterStation("cb", "b", "2", mono, (_pole(Pole.POSITIVE),), Grounding.RIGID))
    return Network(ac_buses=buses, generators=gens, loads=loads, dc_buses=dc_buses,
                   dc_branches=(link,), converters=convs, name="dc_toy")
