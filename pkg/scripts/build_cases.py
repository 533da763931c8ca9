"""Author the bundled case files.

Run from the repository root::

    python3 scripts/build_cases.py

The JSON files written to ``src/mcdc_opf/cases/`` are the frozen golden
copies; this script documents how their numbers were chosen.

Topology: three AC areas joined by a four-bus DC grid.  Areas 1 and 2 are
copies of a 5-bus system with two generators each; area 3 is a single bus
with one expensive generator and a load.  DC buses 1 and 2 host bipolar
stations (Conv-1 rigidly grounded, Conv-2 ungrounded); DC bus 3 hosts Conv-3,
tapped onto the bipolar link at DC bus 4.
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from mcdc_opf.network import (AcBranch, AcBus, Conductor, Configuration,  # noqa: E402
                              ConverterPole, ConverterStation, DcBranch, DcBus, DcTerminal,
                              Generator, Grounding, Load, Network, Pole, Reactor, Transformer)

P, N, O = DcTerminal.POSITIVE, DcTerminal.NEGATIVE, DcTerminal.NEUTRAL

# 5-bus area: (from, to, r, x, rating)
AREA_LINES = [(1, 2, 0.02, 0.06, 1.0), (1, 3, 0.08, 0.24, 1.0), (2, 3, 0.06, 0.18, 1.0),
              (2, 4, 0.06, 0.18, 1.0), (2, 5, 0.04, 0.12, 1.0), (3, 4, 0.01, 0.03, 1.0),
              (4, 5, 0.08, 0.24, 1.0)]
AREA_LOADS = {2: (0.20, 0.10), 3: (0.45, 0.15), 4: (0.40, 0.05), 5: (0.60, 0.10)}

R_POLE = 0.052
R_NEUTRAL = 0.052
I_RATING = 1.5
# Conv-3 is rated above a single Conv-1 pole so that serving load11 saturates
# Conv-1's negative pole and Conv-2 has to export on its negative pole while
# importing on its positive pole.
CONV3_RATING = 1.5
LOAD11 = 1.0


def _pole(pole: Pole, smax: float = 1.0) -> ConverterPole:
    tf = 1.0 / complex(0.0015, 0.1121)
    pr = 1.0 / complex(0.0001, 0.1643)
    return ConverterPole(
        pole=pole, smax=smax,
        pmin_ac=-smax, pmax_ac=smax, qmin_ac=-0.5 * smax, qmax_ac=0.5 * smax,
        pmin_dc=-1.2 * smax, pmax_dc=1.2 * smax,
        imax_ac=1.1 * smax,
        imin_dc=-1.2 * smax, imax_dc=1.2 * smax,
        vmin_cv=0.9, vmax_cv=1.1,
        loss_a=0.0055, loss_b=0.0044, loss_c=0.0164,
        transformer=Transformer(tf.real, tf.imag, 1.0),
        filter_b=0.0887,
        reactor=Reactor(pr.real, pr.imag),
    )


def _area(k: int, offset: int, costs: list[tuple[float, float]], with_ref: bool = True):
    buses, lines, gens, loads = [], [], [], []
    for i in range(1, 6):
        buses.append(AcBus(str(offset + i), 0.9, 1.1, is_reference=(with_ref and i == 1)))
    for a, b, r, x, s in AREA_LINES:
        lines.append(AcBranch.from_impedance(f"ac{offset + a}-{offset + b}", str(offset + a),
                                             str(offset + b), r, x, s))
    for j, (bus, (cb, cc)) in enumerate(zip((1, 2), costs)):
        gens.append(Generator(f"gen{2 * (k - 1) + j + 1}", str(offset + bus), 0.0, 2.0, -1.0, 1.0,
                              0.0, cb, cc))
    for bus, (p, q) in AREA_LOADS.items():
        loads.append(Load(f"load{offset + bus}", p, q, ac_bus=str(offset + bus)))
    return buses, lines, gens, loads


def base_network(*, unbalanced: bool, r_neutral: float = R_NEUTRAL, load11: float = LOAD11,
                 name: str = "") -> Network:
    b1, l1, g1, d1 = _area(1, 0, [(10.0, 1.0), (12.0, 1.0)])
    b2, l2, g2, d2 = _area(2, 5, [(40.0, 1.0), (45.0, 1.0)])
    buses = b1 + b2 + [AcBus("11", 0.9, 1.1, is_reference=True)]
    gens = g1 + g2 + [Generator("gen5", "11", 0.1, 1.5, -1.0, 1.0, 0.0, 100.0, 1.0)]
    loads = d1 + d2 + [Load("load11", load11, 0.0, ac_bus="11")]

    all3 = frozenset({P, N, O})
    dc_buses = [DcBus("1", all3), DcBus("2", all3),
                DcBus("3", frozenset({N, O}) if unbalanced else all3), DcBus("4", all3)]

    def link(i, a, b, terms):
        cond = {t: Conductor(r_neutral if t is O else R_POLE, I_RATING) for t in terms}
        return DcBranch(i, a, b, cond)

    dc_branches = [link("dc1-4", "1", "4", (P, N, O)), link("dc4-2", "4", "2", (P, N, O)),
                   link("dc3-4", "3", "4", (N, O) if unbalanced else (P, N, O))]
    bip = (_pole(Pole.POSITIVE), _pole(Pole.NEGATIVE))
    convs = [ConverterStation("conv1", "2", "1", Configuration.BIPOLAR, bip, Grounding.RIGID),
             ConverterStation("conv2", "7", "2", Configuration.BIPOLAR, bip, Grounding.NONE)]
    if unbalanced:
        convs.append(ConverterStation("conv3", "11", "3", Configuration.ASYM_MONOPOLE_NEGATIVE,
                                      (_pole(Pole.NEGATIVE, CONV3_RATING),), Grounding.NONE))
    else:
        half = (_pole(Pole.POSITIVE, CONV3_RATING / 2), _pole(Pole.NEGATIVE, CONV3_RATING / 2))
        convs.append(ConverterStation("conv3", "11", "3", Configuration.BIPOLAR, half,
                                      Grounding.NONE))
    return Network(100.0, 345.0, tuple(buses), tuple(l1 + l2), tuple(gens), tuple(loads),
                   tuple(dc_buses), tuple(dc_branches), tuple(convs), name=name)


def cases() -> dict[str, tuple[Network, dict]]:
    sweep_opts = {"sweep": {"load": "load11", "generator": "gen5", "from": 0.05, "to": 0.5,
                            "step": 0.05}}
    return {
        "balanced_bipolar_4dc": (base_network(unbalanced=False, name="balanced_bipolar_4dc"), {}),
        "unbalanced_tap_4dc": (base_network(unbalanced=True, name="unbalanced_tap_4dc"), {}),
        "sweep_base": (base_network(unbalanced=True, r_neutral=10 * R_POLE, load11=0.05,
                                    name="sweep_base"), sweep_opts),
    }


def main() -> None:
    from mcdc_opf import case_io

    out = ROOT / "src" / "mcdc_opf" / "cases"
    out.mkdir(exist_ok=True)
    for name, (net, opts) in cases().items():
        case = case_io.from_network(net, options=opts)
        (out / f"{name}.json").write_bytes(case_io.serialize(case))
        print(f"wrote {name}.json")


if __name__ == "__main__":
    main()
