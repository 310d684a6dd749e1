"""Bundled example circuits and a small netlist builder.

The toy circuits are tiny enough to analyse by hand and back the unit tests.
``desk_composite`` is the ~100 flip-flop benchmark used by the end-to-end
flow: shift chains, counters, a small register-file FIFO, an LFSR and masked
pipeline stages, chosen so that flip-flops span the whole range of
functional de-rating.
"""
from __future__ import annotations

import json
from importlib import resources
from typing import Dict, List, Optional

import numpy as np

from .netlist import Netlist, from_dict
from .sim import Stimulus

TOY_CIRCUITS = ("shift3", "toggle", "gated", "ring3", "bus4", "isolated")


def _dff(name, d, q, clock="clk"):
    return {"name": name, "type": "DFF", "pins": {"D": d, "CK": clock, "Q": q}}


def toy_document(name: str) -> dict:
    if name == "shift3":
        return {
            "name": "shift3", "clock": "clk", "inputs": ["d"], "outputs": ["q"],
            "cells": [_dff("FF0", "d", "q0"), _dff("FF1", "q0", "q1"), _dff("FF2", "q1", "q")],
        }
    if name == "toggle":
        return {
            "name": "toggle", "clock": "clk", "inputs": [], "outputs": ["q"],
            "cells": [
                _dff("tff", "nq", "q"),
                {"name": "inv", "type": "NOT", "pins": {"A": "q", "Y": "nq"}},
            ],
        }
    if name == "gated":
        return {
            "name": "gated", "clock": "clk", "inputs": ["a", "b"], "outputs": ["gq"],
            "cells": [
                {"name": "g_and", "type": "AND2", "pins": {"A": "a", "B": "b", "Y": "n1"}},
                _dff("g", "n1", "gq"),
            ],
        }
    if name == "ring3":
        return {
            "name": "ring3", "clock": "clk", "inputs": ["in"], "outputs": ["qc"],
            "cells": [
                {"name": "x0", "type": "XOR2", "pins": {"A": "qc", "B": "in", "Y": "da"}},
                _dff("FF_a", "da", "qa"),
                _dff("FF_b", "qa", "qb"),
                _dff("FF_c", "qb", "qc"),
            ],
        }
    if name == "bus4":
        cells = []
        carry = "en"
        for i in range(4):
            cells.append({"name": f"x{i}", "type": "XOR2",
                          "pins": {"A": f"q{i}", "B": carry, "Y": f"d{i}"}})
            if i < 3:
                cells.append({"name": f"a{i + 1}", "type": "AND2",
                              "pins": {"A": f"q{i}", "B": carry, "Y": f"c{i + 1}"}})
                carry = f"c{i + 1}"
            cells.append({"name": f"cnt_reg[{i}]", "type": "DFFR_X4" if i == 3 else "DFFR_X2",
                          "pins": {"D": f"d{i}", "CK": "clk", "RN": "rst_n", "Q": f"q{i}"}})
        cells.append({"name": "tc_and", "type": "AND4",
                      "pins": {"A": "q0", "B": "q1", "C": "q2", "D": "q3", "Y": "tc"}})
        return {"name": "bus4", "clock": "clk", "inputs": ["en", "rst_n"], "outputs": ["tc"],
                "cells": cells}
    if name == "isolated":
        return {
            "name": "isolated", "clock": "clk", "inputs": ["d"], "outputs": ["q"],
            "constants": {"k1": 1},
            "cells": [
                _dff("keep", "d", "q"),
                {"name": "tie", "type": "TIE0", "pins": {"Y": "zero"}},
                _dff("orphan", "zero", "nq_orphan"),
                _dff("orphan2", "k1", "nq_orphan2"),
            ],
        }
    raise KeyError(f"unknown toy circuit {name!r}")


def toy_circuit(name: str) -> Netlist:
    return from_dict(toy_document(name))


class NetlistBuilder:
    """Incrementally assemble a netlist document with generated net names."""

    def __init__(self, name: str, clock: str = "clk"):
        self.doc = {"name": name, "clock": clock, "inputs": [], "outputs": [],
                    "constants": {}, "cells": []}
        self._n = 0

    def _net(self, hint: str) -> str:
        self._n += 1
        return f"n{self._n}_{hint}"

    def input(self, name: str) -> str:
        self.doc["inputs"].append(name)
        return name

    def output(self, name: str, net: str) -> None:
        self.doc["outputs"].append(name if name == net else {"name": name, "net": net})

    def gate(self, cell_type: str, name: str, *ins: str) -> str:
        pins_in = {
            1: ("A",), 2: ("A", "B"), 3: ("A", "B", "C"), 4: ("A", "B", "C", "D"),
        }[len(ins)]
        if cell_type.startswith("MUX2"):
            pins_in = ("A", "B", "S")
        out = self._net(name)
        pins = dict(zip(pins_in, ins))
        pins["Y"] = out
        self.doc["cells"].append({"name": name, "type": cell_type, "pins": pins})
        return out

    def mux(self, name: str, sel: str, when0: str, when1: str) -> str:
        return self.gate("MUX2", name, when0, when1, sel)

    def dff(self, name: str, d: Optional[str] = None, rn: Optional[str] = None,
            drive: int = 1) -> str:
        """Add a flip-flop; returns its Q net. ``d`` may be connected later
        with :meth:`connect`."""
        q = self._net("q")
        kind = "DFFR" if rn else "DFF"
        if drive != 1:
            kind += f"_X{drive}"
        pins = {"D": d or f"__unbound_{name}", "CK": self.doc["clock"], "Q": q}
        if rn:
            pins["RN"] = rn
        self.doc["cells"].append({"name": name, "type": kind, "pins": pins})
        return q

    def connect(self, ff: str, d: str) -> None:
        for cell in self.doc["cells"]:
            if cell["name"] == ff:
                cell["pins"]["D"] = d
                return
        raise KeyError(ff)

    def build(self) -> Netlist:
        return from_dict(self.doc)


def _reduce(b: NetlistBuilder, kind: str, name: str, nets: List[str]) -> str:
    level = 0
    while len(nets) > 1:
        nxt = []
        for i in range(0, len(nets), 4):
            group = nets[i:i + 4]
            if len(group) == 1:
                nxt.append(group[0])
            else:
                nxt.append(b.gate(f"{kind}{len(group)}", f"{name}_l{level}_{i // 4}", *group))
        nets, level = nxt, level + 1
    return nets[0]


def desk_composite_document() -> dict:
    """Generate the ~100 flip-flop composite benchmark netlist."""
    b = NetlistBuilder("desk_composite")
    din = [b.input(f"din{i}") for i in range(4)]
    en, wr_en, rd_en = b.input("en"), b.input("wr_en"), b.input("rd_en")
    sel0, sel1 = b.input("rd_sel0"), b.input("rd_sel1")
    rst_n, mask, mask2 = b.input("rst_n"), b.input("mask"), b.input("mask2")

    # plain shift chain
    prev = din[0]
    for i in range(8):
        prev = b.dff(f"sa_reg[{i}]", prev)
    b.output("sa_out", prev)

    # enabled shift chain, masked output
    prev = din[1]
    for i in range(8):
        name = f"sb_reg_{i}_"
        q = b.dff(name, drive=2 if i % 3 == 0 else 1)
        b.connect(name, b.mux(f"sb_mux{i}", en, q, prev))
        prev = q
    b.output("sb_out", b.gate("AND2", "sb_gate", prev, mask))

    # unobserved debug chain
    prev = din[2]
    for i in range(6):
        prev = b.dff(f"dbg_reg[{i}]", prev)
    b.gate("XOR2", "dbg_parity", prev, din[3])

    # 8-bit counter with synchronous-style reset and terminal count
    qs = [b.dff(f"cnt_reg[{i}]", rn=rst_n, drive=4 if i == 0 else 1) for i in range(8)]
    carry = en
    for i, q in enumerate(qs):
        b.connect(f"cnt_reg[{i}]", b.gate("XOR2", f"cnt_x{i}", q, carry))
        carry = b.gate("AND2", f"cnt_c{i}", q, carry)
    b.output("cnt_tc", _reduce(b, "AND", "cnt_tc", qs[:4]))
    b.output("cnt_hi", qs[7])

    # free-running 4-bit timer, only the MSB leaves the block
    ts = [b.dff(f"tmr_reg[{i}]") for i in range(4)]
    carry = None
    for i, q in enumerate(ts):
        if carry is None:
            b.connect(f"tmr_reg[{i}]", b.gate("NOT", f"tmr_x{i}", q))
            carry = q
        else:
            b.connect(f"tmr_reg[{i}]", b.gate("XOR2", f"tmr_x{i}", q, carry))
            carry = b.gate("AND2", f"tmr_c{i}", q, carry)
    b.output("tmr_msb", b.gate("AND2", "tmr_gate", ts[3], mask2))

    # 4-entry x 4-bit register file with a write pointer and registered read port
    wp = [b.dff(f"wp_reg[{i}]", rn=rst_n) for i in range(2)]
    b.connect("wp_reg[0]", b.gate("XOR2", "wp_x0", wp[0], wr_en))
    b.connect("wp_reg[1]", b.gate("XOR2", "wp_x1", wp[1], b.gate("AND2", "wp_c0", wp[0], wr_en)))
    nwp = [b.gate("NOT", f"wp_n{i}", wp[i]) for i in range(2)]
    entries = []
    for e in range(4):
        s0 = wp[0] if e & 1 else nwp[0]
        s1 = wp[1] if e & 2 else nwp[1]
        we = b.gate("AND3", f"we{e}", wr_en, s0, s1)
        bits = []
        for i in range(4):
            name = f"mem{e}_reg[{i}]"
            q = b.dff(name)
            b.connect(name, b.mux(f"mem{e}_mux{i}", we, q, din[i]))
            bits.append(q)
        entries.append(bits)
    for i in range(4):
        lo = b.mux(f"rd_lo{i}", sel0, entries[0][i], entries[1][i])
        hi = b.mux(f"rd_hi{i}", sel0, entries[2][i], entries[3][i])
        word = b.mux(f"rd_w{i}", sel1, lo, hi)
        name = f"dout_reg[{i}]"
        q = b.dff(name, drive=2)
        b.connect(name, b.mux(f"dout_mux{i}", rd_en, q, word))
        b.output(f"dout{i}", q)

    # 8-bit LFSR folded with input data, cleared by reset, observed through a mask
    ls = [b.dff(f"crc_reg[{i}]", rn=rst_n) for i in range(8)]
    fb = b.gate("XOR2", "crc_fb", ls[7], din[2])
    b.connect("crc_reg[0]", fb)
    for i in range(1, 8):
        if i in (2, 3, 4):
            b.connect(f"crc_reg[{i}]", b.gate("XOR2", f"crc_t{i}", ls[i - 1], fb))
        else:
            b.connect(f"crc_reg[{i}]", ls[i - 1])
    b.output("crc_out", b.gate("AND2", "crc_gate", ls[7], mask2))

    # one-hot 3-state controller
    st = [b.dff(f"st_reg[{i}]", rn=rst_n) for i in range(3)]
    idle = b.gate("NOR2", "st_idle", st[1], st[2])
    b.connect("st_reg[0]", b.gate("AND2", "st_n0", idle, b.gate("NOT", "st_nen", en)))
    b.connect("st_reg[1]", b.gate("AND2", "st_n1", idle, en))
    b.connect("st_reg[2]", b.gate("OR2", "st_n2", st[1], b.gate("AND2", "st_h2", st[2], mask)))
    b.output("busy", b.gate("OR2", "st_busy", st[1], st[2]))

    # masked two-stage pipelines
    for p, m in (("pa", mask), ("pb", mask2)):
        for i in range(4):
            s1 = b.dff(f"{p}1_reg[{i}]", b.gate("XOR2", f"{p}_in{i}", din[i], din[(i + 1) % 4]))
            s2 = b.dff(f"{p}2_reg[{i}]", s1)
            b.output(f"{p}_out{i}", b.gate("AND2", f"{p}_gate{i}", s2, m))

    # enabled shift chain feeding a rarely-true comparator
    prev = din[3]
    chain = []
    for i in range(8):
        name = f"sc_reg[{i}]"
        q = b.dff(name)
        b.connect(name, b.mux(f"sc_mux{i}", wr_en, q, prev))
        chain.append(q)
        prev = q
    b.output("sc_match", _reduce(b, "AND", "sc_cmp", chain[4:] + [rd_en]))
    return b.doc


def desk_composite() -> Netlist:
    return from_dict(desk_composite_document())


def desk_stimulus(cycles: int = 240, seed: int = 7, reset_every: int = 60) -> Stimulus:
    """Seeded random stimulus for :func:`desk_composite`."""
    rng = np.random.default_rng(seed)
    p_one = {"din0": 0.5, "din1": 0.5, "din2": 0.5, "din3": 0.5, "en": 0.7,
             "wr_en": 0.4, "rd_en": 0.3, "rd_sel0": 0.5, "rd_sel1": 0.5,
             "mask": 0.3, "mask2": 0.7}
    cols: Dict[str, np.ndarray] = {}
    for name, p in p_one.items():
        cols[name] = (rng.random(cycles) < p).astype(int)
    rst = np.ones(cycles, dtype=int)
    rst[::reset_every] = 0
    cols["rst_n"] = rst
    return Stimulus.from_columns(cols)


def bundled_path(filename: str):
    return resources.files("fdrlab").joinpath("data/circuits").joinpath(filename)


DESK_CONFIG = """\
# Default run of the whole estimation flow on the desk-scale composite circuit.
[netlist]
path = desk_composite.json

[sim]
stimulus = desk_composite.csv

[inject]
per_ff = 170
window = 5..200
seed = 2019
mode = statistical

[models]
kinds = ols, knn, svr
search = yes
knn_k = 3
knn_metric = manhattan
svr_C = 3.5
svr_gamma = 0.055
svr_epsilon = 0.025

[search]
random_samples = 60
grid_points = 5
grid_factor = 4
folds = 5
training_size = 1.0
metric = r2
seed = 2019

[evalharness]
folds = 10
training_size = 0.5
seed = 2019
learning_curve_sizes = 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8

[output]
directory = fdrlab-out
plots = yes
"""


def write_bundled(directory) -> list:
    """Regenerate the shipped JSON netlists, stimulus and default config."""
    from pathlib import Path

    from .sim import write_stimulus

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in TOY_CIRCUITS:
        doc = toy_circuit(name).to_dict()
        (directory / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")
    doc = desk_composite().to_dict()
    (directory / "desk_composite.json").write_text(json.dumps(doc, indent=2) + "\n")
    write_stimulus(desk_stimulus(), directory / "desk_composite.csv")
    (directory / "desk_composite.ini").write_text(DESK_CONFIG)
    return sorted(directory.iterdir())
