"""Map a single-conductor OPF result onto a multi-conductor network."""

from __future__ import annotations

from ..formulation.solution import Solution
from ..network import Configuration, DcTerminal, Network

_HALVED = ("p_ac", "q_ac", "i_ac", "ptf_fr", "qtf_fr", "ptf_to", "qtf_to",
           "ppr_fr", "qpr_fr", "ppr_to", "qpr_to", "p_dc")
_SHARED = ("vm_f", "va_f", "vm_c", "va_c")


def equal_split_embedding(balanced: Solution, network: Network) -> Solution:
    """Candidate point built by splitting every lumped station equally.

    Bipolar and symmetric stations get half of the lumped AC and DC power on
    each pole with zero station neutral current; a monopole takes the full
    lumped power on its only pole.  The lumped branch current is shared
    equally by the pole conductors present, each with the sign of its
    terminal; neutral conductors and neutral terminals carry nothing.  No
    feasibility is claimed: this is the point a single-wire tool would hand
    to the operator.
    """
    if balanced.model != "balanced":
        raise ValueError("expected a single-conductor (balanced model) solution")
    out = Solution(case=network.name, model="equal-split", status="Embedded", objective=0.0,
                   generators={k: dict(v) for k, v in balanced.generators.items()},
                   ac_buses={k: dict(v) for k, v in balanced.ac_buses.items()},
                   ac_branches={k: dict(v) for k, v in balanced.ac_branches.items()},
                   base_mva=balanced.base_mva)
    out.objective = float(sum(g.cost(out.generators[g.id]["p"]) for g in network.generators))

    def lumped_u(bus: str) -> float:
        return balanced.dc_terminals[bus]["positive"]

    for b in network.dc_buses:
        u = lumped_u(b.id)
        out.dc_terminals[b.id] = {t.label: {DcTerminal.POSITIVE: u, DcTerminal.NEGATIVE: -u}
                                  .get(t, 0.0) for t in sorted(b.terminals)}
    for br in network.dc_branches:
        lumped = balanced.dc_branches.get(br.id, {}).get("positive")
        i = 0.0 if lumped is None else lumped["i_fr"]
        out.dc_branches[br.id] = {}
        n_pole = sum(t is not DcTerminal.NEUTRAL for t in br.conductors)
        for t in sorted(br.conductors):
            i_t = {DcTerminal.POSITIVE: i / n_pole, DcTerminal.NEGATIVE: -i / n_pole}.get(t, 0.0)
            out.dc_branches[br.id][t.label] = {"i_fr": i_t, "i_to": -i_t,
                                               "loss": br.conductors[t].r * i_t * i_t}
    for cs in network.converters:
        lump = balanced.converters[cs.id]["poles"]["positive"]
        share = 0.5 if len(cs.poles) == 2 else 1.0
        poles = {}
        for cp in cs.poles:
            d = {f: share * lump[f] for f in _HALVED}
            d.update({f: lump[f] for f in _SHARED})
            sign = 1.0 if cp.pole.terminal is DcTerminal.POSITIVE else -1.0
            d["i_dc"] = sign * share * lump["i_dc"]
            if cs.has_neutral:
                d["i_dc_n"] = -d["i_dc"]
            i = d["i_ac"]
            d["loss"] = cp.loss_a + cp.loss_b * i + cp.loss_c * i * i
            poles[cp.pole.label] = d
        entry: dict = {"poles": poles}
        if cs.has_neutral:
            if cs.configuration is Configuration.BIPOLAR:
                entry["i_dc_n"] = 0.0
            else:
                entry["i_dc_n"] = sum(p["i_dc_n"] for p in poles.values())
            entry["p_dc_n"] = 0.0
            if cs.grounding.value != "none":
                entry["i_ground"] = 0.0
        out.converters[cs.id] = entry
    for m in network.dc_loads:
        u = lumped_u(m.dc_bus)
        out.dc_loads[m.id] = {"i": m.p / u}
    return out
