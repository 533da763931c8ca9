"""Physical view of an OPF point, independent of the NLP layout."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .._jsonfmt import dumps
from ..network import Network
from .model import POLE_FIELDS, VariableMap, pole_entity

SCHEMA = "mcdc-opf-solution/1"


@dataclass
class Solution:
    """Per-entity results in per unit.

    ``converters[id]["poles"][label]`` holds the pole quantities named in
    :data:`~mcdc_opf.formulation.model.POLE_FIELDS` plus ``loss``; station
    entries ``p_dc_n``, ``i_dc_n`` and ``i_ground`` are present only when the
    station has them.  ``dc_branches[id][label]`` holds ``i_fr``, ``i_to`` and
    ``loss`` for each conductor.
    """

    case: str
    model: str
    status: str
    objective: float
    generators: dict = field(default_factory=dict)
    ac_buses: dict = field(default_factory=dict)
    ac_branches: dict = field(default_factory=dict)
    dc_terminals: dict = field(default_factory=dict)
    dc_branches: dict = field(default_factory=dict)
    converters: dict = field(default_factory=dict)
    dc_loads: dict = field(default_factory=dict)
    prices: dict = field(default_factory=dict)
    kkt: dict = field(default_factory=dict)
    iterations: int = 0
    wall_time: float = 0.0
    base_mva: float = 100.0

    # -- convenience ------------------------------------------------------
    def pole(self, converter_id: str, pole: str) -> dict:
        return self.converters[converter_id]["poles"][pole]

    def pole_p_ac(self, converter_id: str) -> dict[str, float]:
        return {k: v["p_ac"] for k, v in self.converters[converter_id]["poles"].items()}

    def neutral_voltages(self) -> dict[str, float]:
        return {b: t["neutral"] for b, t in self.dc_terminals.items() if "neutral" in t}

    def dispatch(self) -> dict[str, float]:
        return {g: v["p"] for g, v in self.generators.items()}

    # -- serialisation ------------------------------------------------------
    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["schema"] = SCHEMA
        return d

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> Solution:
        d = dict(d)
        schema = d.pop("schema", SCHEMA)
        if schema != SCHEMA:
            raise ValueError(f"unsupported solution schema {schema!r}")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown solution fields {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str | bytes) -> Solution:
        return cls.from_dict(json.loads(text))


def extract_solution(vmap: VariableMap, x: np.ndarray, lam: np.ndarray | None = None,
                     *, status: str = "", objective: float | None = None, kkt: dict | None = None,
                     iterations: int = 0, wall_time: float = 0.0) -> Solution:
    """Read physical quantities off an NLP point ``x`` laid out by ``vmap``."""
    net: Network = vmap.network
    x = np.asarray(x, dtype=float)

    def val(kind, ent, fld):
        i = vmap.get(kind, ent, fld)
        return None if i is None else float(x[i])

    gens = {g.id: {"p": val("gen", g.id, "p"), "q": val("gen", g.id, "q")} for g in net.generators}
    if objective is None:
        objective = float(sum(g.cost(gens[g.id]["p"]) for g in net.generators))
    buses = {b.id: {"vm": val("ac_bus", b.id, "vm"), "va": val("ac_bus", b.id, "va")}
             for b in net.ac_buses}
    acbr = {br.id: {f: val("ac_branch", br.id, f) for f in ("p_fr", "q_fr", "p_to", "q_to")}
            for br in net.ac_branches}
    term = {b.id: {t.label: val("dc_terminal", b.id, t.label) for t in sorted(b.terminals)}
            for b in net.dc_buses}
    dcbr = {}
    for br in net.dc_branches:
        dcbr[br.id] = {}
        for t in sorted(br.conductors):
            i_fr = val("dc_conductor", br.id, f"{t.label}.i_fr")
            i_to = val("dc_conductor", br.id, f"{t.label}.i_to")
            dcbr[br.id][t.label] = {"i_fr": i_fr, "i_to": i_to,
                                    "loss": br.conductors[t].r * i_fr * i_fr}
    convs = {}
    for cs in net.converters:
        poles = {}
        for cp in cs.poles:
            ent = pole_entity(cs.id, cp.pole)
            d = {f: val("conv_pole", ent, f) for f in POLE_FIELDS}
            if d["i_dc_n"] is None:
                del d["i_dc_n"]
            i = d["i_ac"]
            d["loss"] = cp.loss_a + cp.loss_b * i + cp.loss_c * i * i
            poles[cp.pole.label] = d
        entry = {"poles": poles}
        for f in ("p_dc_n", "i_dc_n", "i_ground"):
            v = val("conv", cs.id, f)
            if v is not None:
                entry[f] = v
        convs[cs.id] = entry
    loads = {m.id: {"i": val("dc_load", m.id, "i")} for m in net.dc_loads}
    prices = {}
    if lam is not None and len(lam) == vmap.m:
        for j, (kind, ent, fld) in enumerate(vmap.con_keys):
            if (kind, fld) == ("ac_bus", "p_balance") or (kind == "dc_terminal"):
                prices.setdefault(kind, {})[f"{ent}.{fld}"] = float(lam[j])
    return Solution(case=net.meta.get("aggregate_of", net.name) or net.name, model=vmap.model,
                    status=status, objective=float(objective), generators=gens, ac_buses=buses,
                    ac_branches=acbr, dc_terminals=term, dc_branches=dcbr, converters=convs,
                    dc_loads=loads, prices=prices, kkt=dict(kkt or {}), iterations=iterations,
                    wall_time=wall_time, base_mva=net.base_mva)

