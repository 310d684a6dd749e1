"""Gate-level netlist data model and JSON loader.

A netlist is stored as a JSON document (see ``data/netlist.schema.json``)::

    {
      "name": "toggle",
      "clock": "clk",
      "inputs": [],
      "outputs": ["q"],
      "constants": {},
      "cells": [
        {"name": "tff", "type": "DFF", "pins": {"D": "nq", "CK": "clk", "Q": "q"}},
        {"name": "inv", "type": "NOT", "pins": {"A": "q", "Y": "nq"}}
      ]
    }

Primary inputs drive the net of the same name. A primary output observes a
net; the bare-string form uses the port name as the net name. The clock net
is kept apart from the data nets: it may only feed ``CK`` pins.
"""
from __future__ import annotations

import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import jsonschema

from .errors import (
    MissingClock,
    MultiDriverError,
    SchemaError,
    UndrivenNetError,
    UnknownCellType,
    UnknownFlipFlop,
)

PRIMARY = "PRIMARY"

#: cell type -> (input pins, output pins). CK is the clock pin of flip-flops.
GATE_LIBRARY: Dict[str, Tuple[Tuple[str, ...], Tuple[str, ...]]] = {
    "BUF": (("A",), ("Y",)),
    "NOT": (("A",), ("Y",)),
    "AND2": (("A", "B"), ("Y",)),
    "AND3": (("A", "B", "C"), ("Y",)),
    "AND4": (("A", "B", "C", "D"), ("Y",)),
    "OR2": (("A", "B"), ("Y",)),
    "OR3": (("A", "B", "C"), ("Y",)),
    "OR4": (("A", "B", "C", "D"), ("Y",)),
    "NAND2": (("A", "B"), ("Y",)),
    "NAND3": (("A", "B", "C"), ("Y",)),
    "NAND4": (("A", "B", "C", "D"), ("Y",)),
    "NOR2": (("A", "B"), ("Y",)),
    "NOR3": (("A", "B", "C"), ("Y",)),
    "NOR4": (("A", "B", "C", "D"), ("Y",)),
    "XOR2": (("A", "B"), ("Y",)),
    "XNOR2": (("A", "B"), ("Y",)),
    "MUX2": (("A", "B", "S"), ("Y",)),
    "TIE0": ((), ("Y",)),
    "TIE1": ((), ("Y",)),
    "DFF": (("D", "CK"), ("Q",)),
    "DFFR": (("D", "CK", "RN"), ("Q",)),
}

SEQUENTIAL_TYPES = frozenset({"DFF", "DFFR"})
CONSTANT_TYPES = frozenset({"TIE0", "TIE1"})
DRIVE_STRENGTHS = (1, 2, 4)

_TYPE_RE = re.compile(r"^(?P<base>[A-Z][A-Z0-9]*?)(?:_X(?P<drive>\d+))?$")


@dataclass(frozen=True)
class PortRef:
    """One pin of a cell, or a primary port when ``owner == PRIMARY``."""

    owner: str
    pin: str
    direction: str  # "in" | "out", relative to the owner

    @property
    def is_primary(self) -> bool:
        return self.owner == PRIMARY

    def __str__(self) -> str:
        return f"{self.owner}.{self.pin}"


@dataclass(frozen=True)
class ConstantDriver:
    """A net tied to a constant through the ``constants`` section."""

    value: int
    net: str

    def __str__(self) -> str:
        return f"CONST{self.value}({self.net})"


@dataclass(frozen=True)
class Cell:
    instance_name: str
    cell_type: str
    drive_strength: int
    pins: Dict[str, str] = field(hash=False)

    @property
    def is_sequential(self) -> bool:
        return self.cell_type in SEQUENTIAL_TYPES

    @property
    def is_constant(self) -> bool:
        return self.cell_type in CONSTANT_TYPES

    @property
    def input_pins(self) -> Tuple[str, ...]:
        return GATE_LIBRARY[self.cell_type][0]

    @property
    def output_pins(self) -> Tuple[str, ...]:
        return GATE_LIBRARY[self.cell_type][1]

    @property
    def type_name(self) -> str:
        if self.drive_strength == 1:
            return self.cell_type
        return f"{self.cell_type}_X{self.drive_strength}"


@dataclass(frozen=True)
class Net:
    net_name: str
    driver: Union[PortRef, ConstantDriver]
    sinks: Tuple[PortRef, ...]


@dataclass(frozen=True, eq=False)
class Netlist:
    name: str
    cells: Tuple[Cell, ...]
    nets: Tuple[Net, ...]
    primary_inputs: Tuple[PortRef, ...]
    primary_outputs: Tuple[PortRef, ...]
    clock_net: Optional[str]
    #: PO port name -> observed net
    output_nets: Dict[str, str] = field(repr=False)
    #: constant net -> value, from the ``constants`` section
    constants: Dict[str, int] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_cells", {c.instance_name: c for c in self.cells})
        object.__setattr__(self, "_nets", {n.net_name: n for n in self.nets})

    def cell(self, name: str) -> Cell:
        return self._cells[name]

    def net(self, name: str) -> Net:
        return self._nets[name]

    def has_cell(self, name: str) -> bool:
        return name in self._cells

    @property
    def input_names(self) -> List[str]:
        return [p.pin for p in self.primary_inputs]

    @property
    def output_names(self) -> List[str]:
        return [p.pin for p in self.primary_outputs]

    @property
    def flip_flops(self) -> List[str]:
        return list_flip_flops(self)

    def flip_flop(self, name: str) -> Cell:
        cell = self._cells.get(name)
        if cell is None or not cell.is_sequential:
            raise UnknownFlipFlop(f"no flip-flop named {name!r} in {self.name}")
        return cell

    def dangling_nets(self) -> List[str]:
        return sorted(n.net_name for n in self.nets if not n.sinks)

    def summary(self) -> dict:
        counts = Counter(c.cell_type for c in self.cells)
        return {
            "name": self.name,
            "cells": len(self.cells),
            "flip_flops": len(self.flip_flops),
            "nets": len(self.nets),
            "inputs": len(self.primary_inputs),
            "outputs": len(self.primary_outputs),
            "cell_types": dict(sorted(counts.items())),
            "dangling_nets": self.dangling_nets(),
        }

    def to_dict(self) -> dict:
        outputs: List[Union[str, dict]] = []
        for port in self.primary_outputs:
            net = self.output_nets[port.pin]
            outputs.append(port.pin if net == port.pin else {"name": port.pin, "net": net})
        doc = {
            "format": "fdrlab-netlist",
            "version": 1,
            "name": self.name,
            "inputs": self.input_names,
            "outputs": outputs,
            "constants": dict(self.constants),
            "cells": [
                {"name": c.instance_name, "type": c.type_name, "pins": dict(c.pins)}
                for c in self.cells
            ],
        }
        if self.clock_net is not None:
            doc["clock"] = self.clock_net
        return doc


def parse_cell_type(type_name: str) -> Tuple[str, int]:
    """Split ``"NAND2_X4"`` into ``("NAND2", 4)``."""
    m = _TYPE_RE.match(type_name)
    if m is None or m.group("base") not in GATE_LIBRARY:
        raise UnknownCellType(f"unknown cell type {type_name!r}")
    drive = int(m.group("drive") or 1)
    if drive not in DRIVE_STRENGTHS:
        raise UnknownCellType(f"unsupported drive strength in {type_name!r}")
    return m.group("base"), drive


@lru_cache(maxsize=None)
def netlist_schema() -> dict:
    text = resources.files("fdrlab").joinpath("data/netlist.schema.json").read_text()
    return json.loads(text)


def list_flip_flops(netlist: Netlist) -> List[str]:
    """Sorted instance names of all DFF/DFFR cells."""
    return sorted(c.instance_name for c in netlist.cells if c.is_sequential)


def from_dict(doc: dict) -> Netlist:
    """Build and validate a :class:`Netlist` from a decoded JSON document."""
    try:
        jsonschema.validate(doc, netlist_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {exc.message}") from None

    clock = doc.get("clock")
    inputs = list(doc["inputs"])
    constants = {k: int(v) for k, v in doc.get("constants", {}).items()}

    output_nets: Dict[str, str] = {}
    for entry in doc["outputs"]:
        name, net = (entry, entry) if isinstance(entry, str) else (entry["name"], entry["net"])
        if name in output_nets:
            raise SchemaError(f"duplicate primary output {name!r}")
        output_nets[name] = net

    if clock is not None and (clock in inputs or clock in constants):
        raise SchemaError(f"clock net {clock!r} must not be listed as a data input or constant")

    drivers: Dict[str, list] = defaultdict(list)
    sinks: Dict[str, List[PortRef]] = defaultdict(list)
    for pi in inputs:
        drivers[pi].append(PortRef(PRIMARY, pi, "in"))
    for net, value in constants.items():
        drivers[net].append(ConstantDriver(value, net))

    cells: List[Cell] = []
    seen = set()
    for entry in doc["cells"]:
        name = entry["name"]
        if name in seen:
            raise SchemaError(f"duplicate cell instance {name!r}")
        seen.add(name)
        base, drive = parse_cell_type(entry["type"])
        ins, outs = GATE_LIBRARY[base]
        pins = dict(entry["pins"])
        if set(pins) != set(ins) | set(outs):
            raise SchemaError(
                f"cell {name!r} ({base}) expects pins {sorted(ins + outs)}, got {sorted(pins)}"
            )
        for pin in ins:
            net = pins[pin]
            if pin == "CK":
                if clock is None:
                    raise MissingClock(f"flip-flop {name!r} present but no clock net declared")
                if net != clock:
                    raise MissingClock(
                        f"flip-flop {name!r} clocked by {net!r}, not the design clock "
                        f"{clock!r} (multi-clock designs are not supported)"
                    )
                continue
            if clock is not None and net == clock:
                raise SchemaError(f"clock net {clock!r} used as data on {name}.{pin}")
            sinks[net].append(PortRef(name, pin, "in"))
        for pin in outs:
            net = pins[pin]
            if clock is not None and net == clock:
                raise MultiDriverError(f"cell output {name}.{pin} drives the clock net")
            drivers[net].append(PortRef(name, pin, "out"))
        cells.append(Cell(name, base, drive, pins))

    for po, net in output_nets.items():
        if clock is not None and net == clock:
            raise SchemaError(f"primary output {po!r} observes the clock net")
        sinks[net].append(PortRef(PRIMARY, po, "out"))

    nets: List[Net] = []
    for net_name in sorted(set(drivers) | set(sinks)):
        drv = drivers.get(net_name, [])
        if len(drv) > 1:
            raise MultiDriverError(
                f"net {net_name!r} has {len(drv)} drivers: " + ", ".join(map(str, drv))
            )
        if not drv:
            users = ", ".join(map(str, sinks[net_name]))
            raise UndrivenNetError(f"net {net_name!r} has no driver (read by {users})")
        nets.append(Net(net_name, drv[0], tuple(sinks.get(net_name, ()))))

    return Netlist(
        name=doc["name"],
        cells=tuple(cells),
        nets=tuple(nets),
        primary_inputs=tuple(PortRef(PRIMARY, pi, "in") for pi in inputs),
        primary_outputs=tuple(PortRef(PRIMARY, po, "out") for po in output_nets),
        clock_net=clock,
        output_nets=output_nets,
        constants=constants,
    )


def parse_netlist(path: Union[str, Path]) -> Netlist:
    """Load a netlist JSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    return from_dict(doc)


def dump_netlist(netlist: Netlist, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(netlist.to_dict(), indent=2) + "\n")


def canonical_form(netlist: Netlist) -> dict:
    """Order-normalized view used to compare two netlists semantically."""
    return {
        "name": netlist.name,
        "clock": netlist.clock_net,
        "inputs": sorted(netlist.input_names),
        "outputs": sorted(netlist.output_nets.items()),
        "constants": sorted(netlist.constants.items()),
        "cells": sorted(
            (c.instance_name, c.cell_type, c.drive_strength, tuple(sorted(c.pins.items())))
            for c in netlist.cells
        ),
    }
