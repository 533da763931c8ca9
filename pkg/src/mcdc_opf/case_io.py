"""JSON case files: parsing, canonical serialisation and result tables.

A case file is a single JSON object; docs/format.md is the field reference.
:func:`parse` returns a :class:`CaseFile` whose ``data`` is the normalised
dict (integers promoted to floats where a number is expected, defaults left
out).  :func:`serialize` writes canonical bytes, so
``serialize(parse(serialize(c))) == serialize(c)`` for every case.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from . import _jsonfmt
from .network import (AcBranch, AcBus, Conductor, Configuration, ConverterPole,
                      ConverterStation, DcBranch, DcBus, DcTerminal, Generator, Grounding, Load,
                      Network, Pole, Reactor, Transformer, check)

SCHEMA_VERSION = "mcdc-opf-case/1"

# integer-valued option keys; every other number is stored as a float
_INTEGER_KEYS = frozenset({"max_iter", "max_restoration_iter", "max_soc", "dense_threshold"})


class ParseError(ValueError):
    """Input is not valid UTF-8 JSON."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = f" (line {line})" if line is not None else ""
        where += f" at {path}" if path else ""
        super().__init__(f"{message}{where}")


class SchemaError(ValueError):
    """Well-formed JSON that does not match the case schema."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


# ---------------------------------------------------------------------------
# schema

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_ID = {"type": "string", "minLength": 1}
_TERMINAL = {"enum": ["positive", "negative", "neutral"]}


def _obj(props: dict, required: list[str], *, one_of: list | None = None) -> dict:
    out = {"type": "object", "properties": props, "required": required,
           "additionalProperties": False}
    if one_of:
        out["oneOf"] = one_of
    return out


# series element given either as admittance (g, b) or impedance (r, x)
_SERIES_CHOICE = [{"required": ["g", "b"], "not": {"anyOf": [{"required": ["r"]},
                                                               {"required": ["x"]}]}},
                  {"required": ["r", "x"], "not": {"anyOf": [{"required": ["g"]},
                                                               {"required": ["b"]}]}}]

_POLE = _obj({
    "pole": {"enum": ["positive", "negative"]},
    "smax": _POS, "pmin_ac": _NUM, "pmax_ac": _NUM, "qmin_ac": _NUM, "qmax_ac": _NUM,
    "pmin_dc": _NUM, "pmax_dc": _NUM, "imax_ac": _POS, "imin_dc": _NUM, "imax_dc": _NUM,
    "vmin_cv": _POS, "vmax_cv": _POS,
    "loss_a": _NUM, "loss_b": _NUM, "loss_c": _NUM,
    "transformer": _obj({"g": _NUM, "b": _NUM, "r": _NUM, "x": _NUM, "tap": _POS}, [],
                        one_of=_SERIES_CHOICE),
    "filter_b": _NUM,
    "reactor": _obj({"g": _NUM, "b": _NUM, "r": _NUM, "x": _NUM}, [], one_of=_SERIES_CHOICE),
}, ["pole", "smax", "pmin_ac", "pmax_ac", "qmin_ac", "qmax_ac", "pmin_dc", "pmax_dc",
    "imax_ac", "imin_dc", "imax_dc", "vmin_cv", "vmax_cv", "loss_a", "loss_b", "loss_c",
    "transformer", "filter_b", "reactor"])

_OPTIONS = {
    "type": "object",
    "properties": {
        "tol_kkt": _POS, "max_iter": {"type": "integer", "minimum": 1},
        "mu_init": _POS, "bound_push": _POS,
        "linear_solver": {"enum": ["auto", "dense-LDL", "sparse-LDL"]},
        "sweep": _obj({"load": _ID, "generator": _ID, "from": _NUM, "to": _NUM, "step": _POS},
                      ["load"]),
    },
    "additionalProperties": False,
}

CASE_SCHEMA: dict = _obj({
    "schema_version": {"const": SCHEMA_VERSION},
    "name": {"type": "string"},
    "units": {"enum": ["pu", "si"]},
    "base_mva": _POS,
    "base_kv": _POS,
    "ac_buses": {"type": "array", "items": _obj({
        "id": _ID, "vmin": _POS, "vmax": _POS, "gshunt": _NUM, "bshunt": _NUM,
        "reference": {"type": "boolean"}}, ["id"])},
    "ac_branches": {"type": "array", "items": _obj({
        "id": _ID, "from": _ID, "to": _ID, "g": _NUM, "b": _NUM, "r": _NUM, "x": _NUM,
        "rating": _POS}, ["id", "from", "to", "rating"], one_of=_SERIES_CHOICE)},
    "generators": {"type": "array", "items": _obj({
        "id": _ID, "bus": _ID, "pmin": _NUM, "pmax": _NUM, "qmin": _NUM, "qmax": _NUM,
        "cost_a": _NUM, "cost_b": _NUM, "cost_c": _NUM},
        ["id", "bus", "pmin", "pmax", "qmin", "qmax"])},
    "loads": {"type": "array", "items": _obj({
        "id": _ID, "p": _NUM, "q": _NUM, "ac_bus": _ID, "dc_bus": _ID, "terminal": _TERMINAL},
        ["id", "p"], one_of=[{"required": ["ac_bus"], "not": {"required": ["dc_bus"]}},
                             {"required": ["dc_bus", "terminal"],
                              "not": {"anyOf": [{"required": ["ac_bus"]},
                                                {"required": ["q"]}]}}])},
    "dc_buses": {"type": "array", "items": _obj({
        "id": _ID,
        "terminals": {"type": "array", "items": _TERMINAL, "minItems": 1, "uniqueItems": True},
        "vmin_pole": _POS, "vmax_pole": _POS, "vmax_neutral": _POS}, ["id", "terminals"])},
    "dc_branches": {"type": "array", "items": _obj({
        "id": _ID, "from": _ID, "to": _ID,
        "conductors": {"type": "object", "minProperties": 1, "additionalProperties": False,
                       "properties": {t: _obj({"r": _POS, "rating": _POS}, ["r", "rating"])
                                      for t in ("positive", "negative", "neutral")}}},
        ["id", "from", "to", "conductors"])},
    "converters": {"type": "array", "items": _obj({
        "id": _ID, "ac_bus": _ID, "dc_bus": _ID,
        "configuration": {"enum": [c.value for c in Configuration]},
        "grounding": {"enum": [g.value for g in Grounding]},
        "r_ground": _POS,
        "poles": {"type": "array", "items": _POLE, "minItems": 1, "maxItems": 2}},
        ["id", "ac_bus", "dc_bus", "configuration", "poles"])},
    "options": _OPTIONS,
}, ["schema_version", "base_mva", "base_kv", "ac_buses", "ac_branches", "generators", "loads",
    "dc_buses", "dc_branches", "converters"])

_SECTIONS = ("ac_buses", "ac_branches", "generators", "loads", "dc_buses", "dc_branches",
             "converters")


def _relaxed(schema):
    """Copy of ``schema`` that tolerates unknown object members."""
    if isinstance(schema, dict):
        out = {k: _relaxed(v) for k, v in schema.items()}
        if out.get("additionalProperties") is False:
            del out["additionalProperties"]
        return out
    if isinstance(schema, list):
        return [_relaxed(v) for v in schema]
    return schema


_STRICT = jsonschema.Draft202012Validator(CASE_SCHEMA)
_LENIENT = jsonschema.Draft202012Validator(_relaxed(CASE_SCHEMA))


# ---------------------------------------------------------------------------
# CaseFile


@dataclass(frozen=True, eq=False)
class CaseFile:
    """A schema-valid case document.  Equality compares canonical bytes."""

    data: dict
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __eq__(self, other) -> bool:
        return isinstance(other, CaseFile) and serialize(self) == serialize(other)

    def __hash__(self) -> int:
        return hash(serialize(self))

    @property
    def name(self) -> str:
        return self.data.get("name", "")

    @property
    def options(self) -> dict:
        return self.data.get("options", {})

    def section(self, name: str) -> list[dict]:
        return self.data[name]

    def with_options(self, **options) -> CaseFile:
        d = copy.deepcopy(self.data)
        d.setdefault("options", {}).update(options)
        return from_dict(d)


def _path(parts) -> str:
    return "/".join(str(p) for p in parts)


def _schema_error(err: jsonschema.ValidationError) -> SchemaError:
    parts = list(err.absolute_path)
    if err.validator == "required":
        # message is "'base_mva' is a required property"
        missing = err.message.split("'")[1] if "'" in err.message else ""
        return SchemaError(_path(parts + [missing]), "required field is missing")
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        return SchemaError(_path(parts + extra[:1]), "unknown field")
    if err.validator == "oneOf" and isinstance(err.instance, dict):
        return SchemaError(_path(parts), "conflicting or missing alternative fields "
                                         "(give exactly one of the documented forms)")
    return SchemaError(_path(parts), err.message)


def _unknown_fields(data) -> list[str]:
    found = []
    for err in _STRICT.iter_errors(data):
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            found += [_path(list(err.absolute_path) + [e]) for e in extra]
    return sorted(found)


def _drop(data, path: str) -> None:
    *head, last = path.split("/")
    node = data
    for p in head:
        node = node[int(p)] if isinstance(node, list) else node[p]
    node.pop(last, None)


def _normalise(obj, key: str = ""):
    if isinstance(obj, dict):
        return {k: _normalise(v, k) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_normalise(v, key) for v in obj]
    if isinstance(obj, int) and not isinstance(obj, bool) and key not in _INTEGER_KEYS:
        return float(obj)
    return obj


def _check_ids(data: dict) -> None:
    for sec in _SECTIONS:
        seen = set()
        for k, rec in enumerate(data[sec]):
            if rec["id"] in seen:
                raise SchemaError(f"{sec}/{k}/id", f"duplicate id {rec['id']!r}")
            seen.add(rec["id"])
        if sec == "converters":
            for k, rec in enumerate(data[sec]):
                poles = [p["pole"] for p in rec["poles"]]
                if len(set(poles)) != len(poles):
                    raise SchemaError(f"converters/{k}/poles", "duplicate pole")


def from_dict(data: dict, *, lenient: bool = False) -> CaseFile:
    """Validate and normalise an already-decoded document."""
    if not isinstance(data, dict):
        raise SchemaError("", "top level must be a JSON object")
    data = copy.deepcopy(data)
    notes: list[str] = []
    if lenient:
        for p in _unknown_fields(data):
            notes.append(f"ignored unknown field {p}")
            warnings.warn(f"case file: ignored unknown field {p}", stacklevel=3)
        for p in reversed([n.split(" ")[-1] for n in notes]):
            _drop(data, p)
    validator = _LENIENT if lenient else _STRICT
    errors = sorted(validator.iter_errors(data), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        raise _schema_error(errors[0])
    data = _normalise(data)
    _check_ids(data)
    return CaseFile(data, tuple(notes))


def _reject_constant(name: str):
    raise ValueError(f"non-finite number {name} is not allowed")


def _pairs(pairs):
    keys = [k for k, _ in pairs]
    dup = {k for k in keys if keys.count(k) > 1}
    if dup:
        raise ValueError(f"duplicate key {sorted(dup)[0]!r}")
    return dict(pairs)


def parse(raw: bytes | str, *, lenient: bool = False) -> CaseFile:
    """Decode and validate a case file.

    Strict mode (the default) rejects unknown fields; ``lenient=True`` drops
    them with a warning.  Raises :class:`ParseError` for undecodable input and
    :class:`SchemaError` naming the offending field otherwise.
    """
    if isinstance(raw, bytes):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8: {exc.reason}") from None
    else:
        text = raw
    try:
        doc = json.loads(text, parse_constant=_reject_constant, object_pairs_hook=_pairs)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    except ValueError as exc:
        # raised from a hook; json does not report a position for these
        raise ParseError(str(exc)) from None
    return from_dict(doc, lenient=lenient)


def load(path: str | Path, *, lenient: bool = False) -> CaseFile:
    return parse(Path(path).read_bytes(), lenient=lenient)


def serialize(case: CaseFile) -> bytes:
    """Canonical UTF-8 bytes (sorted keys, 17 significant digits)."""
    return _jsonfmt.dumps(case.data).encode("utf-8")


# ---------------------------------------------------------------------------
# Network conversion


class _Units:
    """Scale factors from the file's units to per unit."""

    def __init__(self, data: dict):
        si = data.get("units", "pu") == "si"
        mva, kv = data["base_mva"], data["base_kv"]
        z = kv * kv / mva
        self.power = 1.0 / mva if si else 1.0      # MW, MVAr, MVA
        self.ohm = 1.0 / z if si else 1.0          # ohm
        self.siemens = z if si else 1.0            # S
        self.current = kv / mva if si else 1.0     # kA, base MVA/kV
        # cost in $/h with p in MW: b in $/MWh, c in $/MW^2h
        self.cost_b = mva if si else 1.0
        self.cost_c = mva * mva if si else 1.0


def _series(rec: dict, u: _Units) -> tuple[float, float]:
    if "g" in rec:
        return rec["g"] * u.siemens, rec["b"] * u.siemens
    y = 1.0 / complex(rec["r"] * u.ohm, rec["x"] * u.ohm)
    return y.real, y.imag


def to_network(case: CaseFile, *, validate: bool = True) -> Network:
    """Build the per-unit :class:`Network` described by ``case``.

    Raises :class:`~mcdc_opf.network.NetworkError` listing every violation
    when ``validate`` is true and the network is malformed.
    """
    d = case.data
    u = _Units(d)
    buses = tuple(AcBus(b["id"], b.get("vmin", 0.9), b.get("vmax", 1.1),
                        b.get("gshunt", 0.0) * u.power, b.get("bshunt", 0.0) * u.power,
                        b.get("reference", False)) for b in d["ac_buses"])
    lines = []
    for br in d["ac_branches"]:
        g, b = _series(br, u)
        lines.append(AcBranch(br["id"], br["from"], br["to"], g, b, br["rating"] * u.power))
    gens = tuple(Generator(g["id"], g["bus"], g["pmin"] * u.power, g["pmax"] * u.power,
                           g["qmin"] * u.power, g["qmax"] * u.power, g.get("cost_a", 0.0),
                           g.get("cost_b", 0.0) * u.cost_b, g.get("cost_c", 0.0) * u.cost_c)
                 for g in d["generators"])
    loads = []
    for m in d["loads"]:
        if "dc_bus" in m:
            loads.append(Load(m["id"], m["p"] * u.power, 0.0, None, m["dc_bus"],
                              DcTerminal.parse(m["terminal"])))
        else:
            loads.append(Load(m["id"], m["p"] * u.power, m.get("q", 0.0) * u.power, m["ac_bus"]))
    dc_buses = tuple(DcBus(b["id"], frozenset(DcTerminal.parse(t) for t in b["terminals"]),
                           b.get("vmin_pole", 0.9), b.get("vmax_pole", 1.1),
                           b.get("vmax_neutral", 0.1)) for b in d["dc_buses"])
    dc_branches = tuple(
        DcBranch(br["id"], br["from"], br["to"],
                 {DcTerminal.parse(t): Conductor(c["r"] * u.ohm, c["rating"] * u.current)
                  for t, c in sorted(br["conductors"].items(),
                                     key=lambda kv: DcTerminal.parse(kv[0]))})
        for br in d["dc_branches"])
    convs = []
    for cs in d["converters"]:
        poles = []
        for p in cs["poles"]:
            tg, tb = _series(p["transformer"], u)
            rg, rb = _series(p["reactor"], u)
            poles.append(ConverterPole(
                pole=Pole.parse(p["pole"]), smax=p["smax"] * u.power,
                pmin_ac=p["pmin_ac"] * u.power, pmax_ac=p["pmax_ac"] * u.power,
                qmin_ac=p["qmin_ac"] * u.power, qmax_ac=p["qmax_ac"] * u.power,
                pmin_dc=p["pmin_dc"] * u.power, pmax_dc=p["pmax_dc"] * u.power,
                imax_ac=p["imax_ac"] * u.current,
                imin_dc=p["imin_dc"] * u.current, imax_dc=p["imax_dc"] * u.current,
                vmin_cv=p["vmin_cv"], vmax_cv=p["vmax_cv"],
                # loss polynomial in MW against current in kA when units are SI
                loss_a=p["loss_a"] * u.power, loss_b=p["loss_b"] * u.power / u.current,
                loss_c=p["loss_c"] * u.power / (u.current * u.current),
                transformer=Transformer(tg, tb, p["transformer"].get("tap", 1.0)),
                filter_b=p["filter_b"] * u.power,
                reactor=Reactor(rg, rb)))
        r_ground = cs.get("r_ground")
        convs.append(ConverterStation(
            cs["id"], cs["ac_bus"], cs["dc_bus"], Configuration(cs["configuration"]),
            tuple(sorted(poles, key=lambda q: q.pole)),
            Grounding(cs.get("grounding", "none")),
            None if r_ground is None else r_ground * u.ohm))
    net = Network(d["base_mva"], d["base_kv"], buses, tuple(lines), gens, tuple(loads), dc_buses,
                  dc_branches, tuple(convs), name=d.get("name", ""),
                  meta={"options": dict(d.get("options", {}))})
    return check(net) if validate else net


def _series_out(g: float, b: float) -> dict:
    return {"g": float(g), "b": float(b)}


def from_network(net: Network, *, options: dict | None = None) -> CaseFile:
    """Per-unit case document for ``net`` (admittance form for series elements)."""
    if net.single_conductor:
        raise ValueError("aggregate single-conductor views have no case-file form")
    d: dict = {"schema_version": SCHEMA_VERSION, "name": net.name, "units": "pu",
               "base_mva": net.base_mva, "base_kv": net.base_kv}
    d["ac_buses"] = [{"id": b.id, "vmin": b.vmin, "vmax": b.vmax, "gshunt": b.gshunt,
                      "bshunt": b.bshunt, "reference": b.is_reference} for b in net.ac_buses]
    d["ac_branches"] = [{"id": l.id, "from": l.from_bus, "to": l.to_bus, **_series_out(l.g, l.b),
                         "rating": l.rating} for l in net.ac_branches]
    d["generators"] = [{"id": g.id, "bus": g.bus, "pmin": g.pmin, "pmax": g.pmax, "qmin": g.qmin,
                        "qmax": g.qmax, "cost_a": g.cost_a, "cost_b": g.cost_b,
                        "cost_c": g.cost_c} for g in net.generators]
    loads = []
    for m in net.loads:
        if m.is_dc:
            loads.append({"id": m.id, "p": m.p, "dc_bus": m.dc_bus, "terminal": m.terminal.label})
        else:
            loads.append({"id": m.id, "p": m.p, "q": m.q, "ac_bus": m.ac_bus})
    d["loads"] = loads
    d["dc_buses"] = [{"id": b.id, "terminals": [t.label for t in sorted(b.terminals)],
                      "vmin_pole": b.vmin_pole, "vmax_pole": b.vmax_pole,
                      "vmax_neutral": b.vmax_neutral} for b in net.dc_buses]
    d["dc_branches"] = [{"id": br.id, "from": br.from_bus, "to": br.to_bus,
                         "conductors": {t.label: {"r": c.r, "rating": c.rating}
                                        for t, c in br.conductors.items()}}
                        for br in net.dc_branches]
    convs = []
    for cs in net.converters:
        poles = []
        for p in cs.poles:
            poles.append({
                "pole": p.pole.label, "smax": p.smax, "pmin_ac": p.pmin_ac, "pmax_ac": p.pmax_ac,
                "qmin_ac": p.qmin_ac, "qmax_ac": p.qmax_ac, "pmin_dc": p.pmin_dc,
                "pmax_dc": p.pmax_dc, "imax_ac": p.imax_ac, "imin_dc": p.imin_dc,
                "imax_dc": p.imax_dc, "vmin_cv": p.vmin_cv, "vmax_cv": p.vmax_cv,
                "loss_a": p.loss_a, "loss_b": p.loss_b, "loss_c": p.loss_c,
                "transformer": {**_series_out(p.transformer.g, p.transformer.b),
                                "tap": p.transformer.tap},
                "filter_b": p.filter_b,
                "reactor": _series_out(p.reactor.g, p.reactor.b)})
        rec = {"id": cs.id, "ac_bus": cs.ac_bus, "dc_bus": cs.dc_bus,
               "configuration": cs.configuration.value, "grounding": cs.grounding.value,
               "poles": poles}
        if cs.r_ground is not None:
            rec["r_ground"] = cs.r_ground
        convs.append(rec)
    d["converters"] = convs
    opts = dict(net.meta.get("options", {}))
    opts.update(options or {})
    if opts:
        d["options"] = opts
    return from_dict(d)


# ---------------------------------------------------------------------------
# result tables

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _jsonfmt._num(v, "")
    return str(v)


def solution_tables(sol) -> dict[str, tuple[list[str], list[list]]]:
    """Per-entity-class tables of a :class:`~mcdc_opf.formulation.Solution`.

    Returns ``{table: (header, rows)}``, all values in per unit.  Columns are
    listed in docs/format.md.
    """
    t: dict[str, tuple[list[str], list[list]]] = {}
    t["generators"] = (["id", "p", "q"],
                       [[g, v["p"], v["q"]] for g, v in sol.generators.items()])
    t["ac_buses"] = (["id", "vm", "va"],
                     [[b, v["vm"], v["va"]] for b, v in sol.ac_buses.items()])
    t["ac_branches"] = (["id", "p_fr", "q_fr", "p_to", "q_to"],
                        [[k, v["p_fr"], v["q_fr"], v["p_to"], v["q_to"]]
                         for k, v in sol.ac_branches.items()])
    t["dc_terminals"] = (["bus", "terminal", "u"],
                         [[b, lab, u] for b, ts in sol.dc_terminals.items()
                          for lab, u in ts.items()])
    t["dc_branches"] = (["id", "conductor", "i_fr", "i_to", "loss"],
                        [[k, lab, c["i_fr"], c["i_to"], c["loss"]]
                         for k, cs in sol.dc_branches.items() for lab, c in cs.items()])
    cols = ["p_ac", "q_ac", "i_ac", "vm_c", "va_c", "p_dc", "i_dc", "loss"]
    rows = []
    for cid, entry in sol.converters.items():
        for lab, p in entry["poles"].items():
            rows.append([cid, lab] + [p[c] for c in cols]
                        + [entry.get("i_dc_n"), entry.get("i_ground")])
    t["converters"] = (["id", "pole"] + cols + ["station_i_dc_n", "station_i_ground"], rows)
    return t


def table_csv(header: list[str], rows: list[list]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue().encode("utf-8")


def write_solution_csv(sol, out_dir: str | Path) -> list[Path]:
    """Write one ``<table>.csv`` per entity class into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (header, rows) in solution_tables(sol).items():
        path = out / f"{name}.csv"
        path.write_bytes(table_csv(header, rows))
        written.append(path)
    return written
