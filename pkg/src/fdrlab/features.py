"""Per flip-flop feature extraction.

Each flip-flop is described by 25 numeric columns: 18 structural columns
(the three proximity features expand to min/avg/max), 4 synthesis-related
columns and 3 signal-activity columns. Sentinels: -1 for "not connected",
"not a bus" and "no feedback loop"; bus length 0 outside a bus.
"""
from __future__ import annotations

import csv
import re
from collections import defaultdict
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Dict, List, Optional, Union

from .errors import MissingTrace
from .graph import CircuitGraph, FfAdjacency, feedback_loop, stage_depths, transitive_ff_cone
from .netlist import Netlist, list_flip_flops
from .sim import ActivityTrace

NOT_CONNECTED = -1

BUS_PATTERNS = (
    re.compile(r"^(?P<base>.+)\[(?P<idx>\d+)\]$"),
    re.compile(r"^(?P<base>.+)_reg_(?P<idx>\d+)_$"),
)


@dataclass(frozen=True)
class FeatureVector:
    ff_fan_in: int
    ff_fan_out: int
    total_ffs_influencing: int
    total_ffs_influenced: int
    pi_connections: int
    po_connections: int
    pi_proximity_min: float
    pi_proximity_avg: float
    pi_proximity_max: float
    po_proximity_min: float
    po_proximity_avg: float
    po_proximity_max: float
    part_of_bus: int
    bus_position: int
    bus_length: int
    constant_driver_connections: int
    has_feedback_loop: int
    feedback_loop_depth: int
    drive_strength: int
    comb_fan_in: int
    comb_fan_out: int
    comb_path_depth: int
    ratio_at_0: float
    ratio_at_1: float
    state_changes: int

    def values(self) -> List[float]:
        return [getattr(self, name) for name in FEATURE_NAMES]


FEATURE_NAMES = tuple(f.name for f in fields(FeatureVector))
STRUCTURAL = FEATURE_NAMES[:18]
SYNTHESIS = FEATURE_NAMES[18:22]
DYNAMIC = FEATURE_NAMES[22:]


def bus_detect(netlist: Netlist) -> Dict[str, dict]:
    """Group flip-flops named ``base[i]`` or ``base_reg_i_`` into buses.

    A group needs at least two members to count as a bus.
    """
    groups = defaultdict(list)
    parsed = {}
    for ff in list_flip_flops(netlist):
        for pattern in BUS_PATTERNS:
            m = pattern.match(ff)
            if m:
                key = (pattern.pattern, m.group("base"))
                groups[key].append(ff)
                parsed[ff] = (key, int(m.group("idx")))
                break
    out = {}
    for ff in list_flip_flops(netlist):
        if ff in parsed and len(groups[parsed[ff][0]]) >= 2:
            key, idx = parsed[ff]
            out[ff] = {"part_of_bus": 1, "bus_position": idx, "bus_length": len(groups[key])}
        else:
            out[ff] = {"part_of_bus": 0, "bus_position": -1, "bus_length": 0}
    return out


def _proximity(graph, ff, endpoint):
    depths = stage_depths(graph, ff, endpoint)
    if depths is None:
        return (NOT_CONNECTED,) * 3
    return depths.min, depths.avg, depths.max


def extract_structural(
    graph: CircuitGraph, adjacency: FfAdjacency, ff: str, buses: Optional[dict] = None
) -> dict:
    adjacency.check(ff)
    if buses is None:
        buses = bus_detect(graph.netlist)
    pi = _proximity(graph, ff, "from_primary_inputs")
    po = _proximity(graph, ff, "to_primary_outputs")
    loop = feedback_loop(adjacency, ff)
    out = {
        "ff_fan_in": len(adjacency.predecessors[ff]),
        "ff_fan_out": len(adjacency.successors[ff]),
        "total_ffs_influencing": len(transitive_ff_cone(adjacency, ff, "influencing")),
        "total_ffs_influenced": len(transitive_ff_cone(adjacency, ff, "influenced")),
        "pi_connections": len(adjacency.inputs[ff]),
        "po_connections": len(adjacency.outputs[ff]),
        "pi_proximity_min": pi[0],
        "pi_proximity_avg": pi[1],
        "pi_proximity_max": pi[2],
        "po_proximity_min": po[0],
        "po_proximity_avg": po[1],
        "po_proximity_max": po[2],
        **buses[ff],
        "constant_driver_connections": len(adjacency.constants[ff]),
        "has_feedback_loop": int(loop.has_loop),
        "feedback_loop_depth": loop.depth if loop.has_loop else -1,
    }
    return out


def extract_synthesis(graph: CircuitGraph, ff: str) -> dict:
    adj = graph.adjacency
    adj.check(ff)
    return {
        "drive_strength": graph.netlist.cell(ff).drive_strength,
        "comb_fan_in": len(adj.comb_inputs[ff]),
        "comb_fan_out": len(adj.comb_outputs[ff]),
        "comb_path_depth": graph.comb_path_depth(ff),
    }


def extract_dynamic(trace: Optional[ActivityTrace], ff: str) -> dict:
    """Fraction of sampled cycles at 0 / at 1 and number of transitions."""
    if trace is None or trace.cycles < 1:
        raise MissingTrace(f"no activity trace for {ff!r}")
    try:
        wave = trace.waveform(ff).astype(int)
    except KeyError:
        raise MissingTrace(f"activity trace has no waveform for {ff!r}") from None
    n = len(wave)
    ones = int(wave.sum())
    return {
        "ratio_at_0": (n - ones) / n,
        "ratio_at_1": ones / n,
        "state_changes": int((wave[1:] != wave[:-1]).sum()),
    }


def extract_all(
    netlist: Netlist, graph: CircuitGraph, adjacency: FfAdjacency, trace: ActivityTrace
) -> Dict[str, FeatureVector]:
    buses = bus_detect(netlist)
    out = {}
    for ff in list_flip_flops(netlist):
        row = extract_structural(graph, adjacency, ff, buses)
        row.update(extract_synthesis(graph, ff))
        row.update(extract_dynamic(trace, ff))
        out[ff] = FeatureVector(**row)
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return str(int(value)) if value.is_integer() else repr(value)
    return str(value)


def write_features(features: Dict[str, FeatureVector], path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ff_name", *FEATURE_NAMES])
        for ff in sorted(features):
            w.writerow([ff, *(_fmt(v) for v in features[ff].values())])


def as_dict(vector: FeatureVector) -> dict:
    return asdict(vector)
