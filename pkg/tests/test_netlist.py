import json

import pytest

from fdrlab.circuits import TOY_CIRCUITS, bundled_path, desk_composite_document, toy_document
from fdrlab.errors import (
    MissingClock,
    MultiDriverError,
    SchemaError,
    UndrivenNetError,
    UnknownCellType,
    UnknownFlipFlop,
)
from fdrlab.netlist import (
    GATE_LIBRARY,
    canonical_form,
    dump_netlist,
    from_dict,
    list_flip_flops,
    parse_cell_type,
    parse_netlist,
)


def test_toggle_has_two_cells_one_flip_flop(write_json):
    nl = parse_netlist(write_json(toy_document("toggle")))
    assert len(nl.cells) == 2
    assert nl.flip_flops == ["tff"]


def test_pass_through_without_cells():
    nl = from_dict({"name": "wire", "inputs": ["a"], "outputs": ["a"], "cells": []})
    assert nl.flip_flops == []
    assert nl.net("a").sinks[0].pin == "a"


def test_two_gate_outputs_on_one_net():
    doc = {
        "name": "clash", "inputs": ["a"], "outputs": ["y"],
        "cells": [
            {"name": "n1", "type": "NOT", "pins": {"A": "a", "Y": "y"}},
            {"name": "n2", "type": "BUF", "pins": {"A": "a", "Y": "y"}},
        ],
    }
    with pytest.raises(MultiDriverError, match="'y'"):
        from_dict(doc)


def test_list_flip_flops_sorted():
    assert list_flip_flops(from_dict(toy_document("shift3"))) == ["FF0", "FF1", "FF2"]
    comb = {"name": "c", "inputs": ["a", "b"], "outputs": ["y"],
            "cells": [{"name": "g", "type": "AND2", "pins": {"A": "a", "B": "b", "Y": "y"}}]}
    assert list_flip_flops(from_dict(comb)) == []


@pytest.mark.parametrize("name,base,drive", [
    ("NAND2_X4", "NAND2", 4), ("DFF", "DFF", 1), ("DFFR_X2", "DFFR", 2), ("BUF_X1", "BUF", 1),
])
def test_parse_cell_type(name, base, drive):
    assert parse_cell_type(name) == (base, drive)


@pytest.mark.parametrize("name", ["AND5", "LATCH", "NAND2_X3", "FOO_X1"])
def test_unknown_cell_types(name):
    with pytest.raises(UnknownCellType):
        parse_cell_type(name)


def test_gate_library_is_closed():
    expected = {"BUF", "NOT", "XOR2", "XNOR2", "MUX2", "TIE0", "TIE1", "DFF", "DFFR"}
    expected |= {f"{g}{n}" for g in ("AND", "OR", "NAND", "NOR") for n in (2, 3, 4)}
    assert set(GATE_LIBRARY) == expected


def test_pin_arity_checked():
    doc = toy_document("gated")
    doc["cells"][0]["pins"].pop("B")
    with pytest.raises(SchemaError, match="expects pins"):
        from_dict(doc)


def test_schema_errors():
    with pytest.raises(SchemaError):
        from_dict({"name": "x", "inputs": [], "outputs": []})
    with pytest.raises(SchemaError):
        from_dict({"name": "x", "inputs": [], "outputs": [], "cells": [], "bogus": 1})


def test_flip_flop_without_clock():
    doc = toy_document("shift3")
    del doc["clock"]
    with pytest.raises(MissingClock):
        from_dict(doc)


def test_second_clock_rejected():
    doc = toy_document("shift3")
    doc["inputs"].append("clk2")
    doc["cells"][1]["pins"]["CK"] = "clk2"
    with pytest.raises(MissingClock, match="multi-clock"):
        from_dict(doc)


def test_clock_may_not_feed_data_pins():
    doc = toy_document("gated")
    doc["cells"][0]["pins"]["A"] = "clk"
    with pytest.raises(SchemaError, match="clock"):
        from_dict(doc)


def test_undriven_net():
    doc = toy_document("gated")
    doc["inputs"] = ["a"]
    with pytest.raises(UndrivenNetError, match="'b'"):
        from_dict(doc)


def test_every_net_has_exactly_one_driver():
    nl = from_dict(desk_composite_document())
    cell_outs = [c.pins[p] for c in nl.cells for p in c.output_pins]
    driven = cell_outs + nl.input_names + list(nl.constants)
    assert sorted(driven) == sorted(n.net_name for n in nl.nets)


def test_dangling_nets_reported():
    nl = from_dict(toy_document("isolated"))
    assert nl.dangling_nets()
    assert nl.summary()["dangling_nets"] == nl.dangling_nets()


def test_drive_strength_from_suffix():
    nl = from_dict(toy_document("bus4"))
    assert nl.cell("cnt_reg[0]").drive_strength == 2
    assert nl.cell("cnt_reg[3]").drive_strength == 4
    assert nl.cell("tc_and").drive_strength == 1


def test_flip_flop_lookup():
    nl = from_dict(toy_document("toggle"))
    assert nl.flip_flop("tff").cell_type == "DFF"
    with pytest.raises(UnknownFlipFlop):
        nl.flip_flop("inv")


@pytest.mark.parametrize("name", list(TOY_CIRCUITS) + ["desk_composite"])
def test_bundled_files_parse_and_round_trip(name, tmp_path):
    nl = parse_netlist(bundled_path(f"{name}.json"))
    out = tmp_path / "again.json"
    dump_netlist(nl, out)
    assert canonical_form(parse_netlist(out)) == canonical_form(nl)


def test_bundled_files_match_generators():
    for name in TOY_CIRCUITS:
        on_disk = from_dict(json.loads(bundled_path(f"{name}.json").read_text()))
        assert canonical_form(on_disk) == canonical_form(from_dict(toy_document(name)))


def test_round_trip_ignores_cell_order():
    doc = toy_document("bus4")
    shuffled = dict(doc, cells=list(reversed(doc["cells"])))
    assert canonical_form(from_dict(doc)) == canonical_form(from_dict(shuffled))


def test_invalid_json_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SchemaError):
        parse_netlist(bad)
