import copy
import hashlib
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcdc_opf import _jsonfmt, cases, case_io
from mcdc_opf.case_io import CaseFile, ParseError, SchemaError
from mcdc_opf.network import DcTerminal, NetworkError

# frozen when the bundled cases were authored; any change to the files is deliberate
GOLDEN_SHA256 = {
    "balanced_bipolar_4dc": "ceae3a63073197e394e7d5e98056986e75ae7cef964c47fff42d7065902800c1",
    "unbalanced_tap_4dc": "28ba226d4410848bf31ec7aced83b01624d361618316a8e78c3919b38e33ab90",
    "sweep_base": "27ba754d91b2bab855882855fd0d256987245f1489f50536df3a18139450da7d",
}


def minimal() -> dict:
    return {
        "schema_version": case_io.SCHEMA_VERSION,
        "name": "one-bus",
        "base_mva": 100, "base_kv": 345,
        "ac_buses": [{"id": "1", "reference": True}],
        "ac_branches": [],
        "generators": [{"id": "g1", "bus": "1", "pmin": 0, "pmax": 2, "qmin": -1, "qmax": 1,
                        "cost_b": 10}],
        "loads": [{"id": "d1", "p": 0.5, "q": 0.1, "ac_bus": "1"}],
        "dc_buses": [], "dc_branches": [], "converters": [],
    }


def text(d: dict) -> str:
    return json.dumps(d, indent=1)


# -- parse -------------------------------------------------------------------


def test_minimal_case_parses_to_one_bus_network():
    case = case_io.parse(text(minimal()))
    assert isinstance(case, CaseFile)
    net = case_io.to_network(case)
    assert [b.id for b in net.ac_buses] == ["1"]
    assert net.generators[0].cost_b == 10.0


def test_missing_base_mva_names_the_field():
    d = minimal()
    del d["base_mva"]
    with pytest.raises(SchemaError) as err:
        case_io.parse(text(d))
    assert err.value.field == "base_mva"


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d["generators"][0].update(pmax="2"), "generators/0/pmax"),
    (lambda d: d["ac_buses"][0].update(colour="red"), "ac_buses/0/colour"),
    (lambda d: d.update(schema_version="other/9"), "schema_version"),
    (lambda d: d["loads"].append({"id": "d1", "p": 0.1, "ac_bus": "1"}), "loads/1/id"),
])
def test_schema_errors_name_the_failing_field(mutate, field):
    d = minimal()
    mutate(d)
    with pytest.raises(SchemaError) as err:
        case_io.parse(text(d))
    assert err.value.field == field


def test_load_on_both_sides_is_rejected():
    d = minimal()
    d["loads"][0]["dc_bus"] = "1"
    d["loads"][0]["terminal"] = "positive"
    with pytest.raises(SchemaError) as err:
        case_io.parse(text(d))
    assert err.value.field == "loads/0"


def test_malformed_json_reports_line():
    raw = text(minimal()).replace('"name": "one-bus",', '"name": "one-bus"')
    with pytest.raises(ParseError) as err:
        case_io.parse(raw)
    assert err.value.line == raw.splitlines().index(next(
        l for l in raw.splitlines() if '"name"' in l)) + 2


@pytest.mark.parametrize("raw", [
    '{"base_mva": NaN}', '{"base_mva": Infinity}', '{"a": 1, "a": 2}',
])
def test_nonfinite_and_duplicate_keys_rejected(raw):
    with pytest.raises(ParseError):
        case_io.parse(raw)


def test_non_utf8_rejected():
    with pytest.raises(ParseError, match="UTF-8"):
        case_io.parse(b"\xff\xfe{}")


def test_lenient_mode_drops_unknown_fields_with_warning():
    d = minimal()
    d["ac_buses"][0]["colour"] = "red"
    d["comment"] = "x"
    with pytest.warns(UserWarning, match="ignored unknown field") as caught:
        case = case_io.parse(text(d), lenient=True)
    assert sorted(str(w.message).split()[-1] for w in caught) == ["ac_buses/0/colour", "comment"]
    assert "colour" not in case.data["ac_buses"][0]
    assert "comment" not in case.data
    assert len(case.warnings) == 2
    assert case == case_io.parse(text(minimal()))


def test_bundled_balanced_counts():
    case = cases.load("balanced_bipolar_4dc")
    assert len(case.section("converters")) == 3
    assert len(case.section("dc_branches")) == 3


def test_bundled_unbalanced_bus4_has_three_terminals(unbalanced_net):
    assert unbalanced_net.dc_bus_map["4"].terminals == frozenset(DcTerminal)


# -- to_network ----------------------------------------------------------------


def test_dangling_converter_bus_is_a_structured_error():
    d = json.loads(cases.path("balanced_bipolar_4dc").read_text())
    d["converters"][0]["ac_bus"] = "99"
    with pytest.raises(NetworkError) as err:
        case_io.to_network(case_io.from_dict(d))
    assert any(v.entity == "converter conv1" and "99" in v.rule for v in err.value.violations)


def test_si_units_convert_to_per_unit():
    d = minimal()
    d.update(units="si", ac_buses=[{"id": "1", "reference": True}, {"id": "2"}])
    z = 345.0 ** 2 / 100.0
    d["ac_branches"] = [{"id": "l", "from": "1", "to": "2", "r": 0.01 * z, "x": 0.1 * z,
                         "rating": 150.0}]
    d["generators"][0].update(pmax=200.0, cost_b=20.0, cost_c=0.01)
    d["loads"][0].update(p=50.0, q=10.0)
    net = case_io.to_network(case_io.parse(text(d)))
    y = 1 / complex(0.01, 0.1)
    br = net.ac_branches[0]
    assert (br.g, br.b) == pytest.approx((y.real, y.imag), rel=1e-12)
    assert br.rating == pytest.approx(1.5)
    g = net.generators[0]
    # cost in $/h: 20 $/MWh * 100 MW/pu, 0.01 $/MW^2h * 100^2
    assert (g.pmax, g.cost_b, g.cost_c) == pytest.approx((2.0, 2000.0, 100.0))
    assert (net.loads[0].p, net.loads[0].q) == pytest.approx((0.5, 0.1))


def test_per_unit_values_carried_unchanged():
    d = json.loads(cases.path("unbalanced_tap_4dc").read_text())
    net = case_io.to_network(case_io.from_dict(d))
    br = d["dc_branches"][0]
    for label, c in br["conductors"].items():
        assert net.dc_branch_map[br["id"]].conductors[DcTerminal.parse(label)].r == c["r"]


# -- serialize ------------------------------------------------------------------


@pytest.mark.parametrize("name", cases.NAMES)
def test_bundled_case_golden_digest(name):
    raw = cases.path(name).read_bytes()
    assert hashlib.sha256(raw).hexdigest() == GOLDEN_SHA256[name]
    assert case_io.serialize(case_io.parse(raw)) == raw


@pytest.mark.parametrize("name", cases.NAMES)
def test_network_round_trip(name):
    case = cases.load(name)
    again = case_io.from_network(case_io.to_network(case))
    assert case_io.to_network(again) == case_io.to_network(case)
    assert case_io.parse(case_io.serialize(again)) == again


def test_nan_injected_programmatically_is_refused():
    case = cases.load("balanced_bipolar_4dc")
    d = copy.deepcopy(case.data)
    d["generators"][0]["cost_b"] = math.nan
    with pytest.raises(_jsonfmt.NonFiniteValue):
        case_io.serialize(CaseFile(d))


def test_floats_use_seventeen_digits():
    assert _jsonfmt._num(0.1, "") == "0.10000000000000001"
    assert _jsonfmt._num(1.0, "") == "1.0"
    assert _jsonfmt._num(-0.0, "") == "-0.0"


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=60, deadline=None)
@given(pmax=finite, cost=finite, vmax=st.floats(0.5, 2.0), name=st.text(max_size=12),
       n=st.integers(1, 4))
def test_parse_serialize_round_trip(pmax, cost, vmax, name, n):
    d = minimal()
    d["name"] = name
    d["generators"][0].update(pmax=pmax, cost_b=cost)
    d["ac_buses"][0]["vmax"] = vmax
    d["loads"] = [{"id": f"d{k}", "p": 0.1 * k, "ac_bus": "1"} for k in range(n)]
    first = case_io.parse(json.dumps(d))
    raw = case_io.serialize(first)
    second = case_io.parse(raw)
    assert second == first
    assert case_io.serialize(second) == raw


def test_integers_promoted_to_floats():
    case = case_io.parse(text(minimal()))
    assert isinstance(case.data["base_mva"], float)
    assert isinstance(case.data["generators"][0]["pmax"], float)
    d = minimal()
    d["options"] = {"max_iter": 50}
    assert case_io.parse(text(d)).options["max_iter"] == 50


# -- result tables --------------------------------------------------------------


def test_solution_csv_tables(solved, tmp_path):
    sol = solved("balanced_bipolar_4dc").solution
    paths = case_io.write_solution_csv(sol, tmp_path)
    names = sorted(p.name for p in paths)
    assert names == ["ac_branches.csv", "ac_buses.csv", "converters.csv", "dc_branches.csv",
                     "dc_terminals.csv", "generators.csv"]
    rows = (tmp_path / "converters.csv").read_text().splitlines()
    assert rows[0].startswith("id,pole,p_ac,q_ac")
    assert len(rows) == 1 + 6
    again = case_io.write_solution_csv(sol, tmp_path / "again")
    for a, b in zip(paths, again):
        assert a.read_bytes() == b.read_bytes()
