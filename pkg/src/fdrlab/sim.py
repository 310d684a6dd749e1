"""Cycle-based two-valued logic simulation.

Every cycle: apply the primary-input vector, settle the combinational logic
in one levelized pass, sample primary outputs and flip-flop outputs, then
clock all flip-flops at once (``Q <- D``; a DFFR with ``RN == 0`` loads 0).
All flip-flops start at 0.

The simulator is lane-parallel: each net holds a boolean vector with one
entry per independent run, so a batch of fault-injection runs costs about as
much as a single run of the golden design.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from .errors import CycleOutOfRange, StimulusError, UnknownFlipFlop
from .graph import COMBINATIONAL, CircuitGraph, build_graph
from .netlist import ConstantDriver, Netlist, list_flip_flops


@dataclass(frozen=True)
class Stimulus:
    """Per-cycle primary-input vectors.

    ``observe_window`` is an inclusive ``(first, last)`` cycle range over which
    primary outputs are compared against the golden run.
    """

    inputs: Tuple[str, ...]
    vectors: np.ndarray  # (cycles, len(inputs)), dtype bool
    observe_window: Tuple[int, int]

    def __post_init__(self):
        vec = np.asarray(self.vectors, dtype=bool)
        if vec.ndim != 2:
            vec = vec.reshape(-1, len(self.inputs))
        if vec.shape[1] != len(self.inputs):
            raise StimulusError(f"{vec.shape[1]} stimulus columns for {len(self.inputs)} inputs")
        object.__setattr__(self, "vectors", vec)
        if vec.shape[0] < 1:
            raise StimulusError("stimulus has no cycles")
        lo, hi = self.observe_window
        if not 0 <= lo <= hi < vec.shape[0]:
            raise StimulusError(
                f"observe window {lo}..{hi} outside [0, {vec.shape[0]})"
            )

    @property
    def cycles(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def from_columns(cls, columns: Dict[str, Sequence[int]], observe_window=None, cycles=None):
        names = tuple(columns)
        if names:
            data = np.column_stack([np.asarray(columns[n], dtype=int) for n in names])
        else:
            if cycles is None:
                raise StimulusError("cycle count required when there are no inputs")
            data = np.zeros((cycles, 0), dtype=int)
        if np.any((data != 0) & (data != 1)):
            raise StimulusError("stimulus values must be 0 or 1")
        n = data.shape[0]
        window = tuple(observe_window) if observe_window is not None else (0, n - 1)
        return cls(names, data.astype(bool), window)


def parse_window(text: str) -> Tuple[int, int]:
    """Parse ``"A..B"`` (inclusive) into a tuple."""
    try:
        lo, hi = text.split("..")
        return int(lo), int(hi)
    except ValueError:
        raise StimulusError(f"cycle range must look like A..B, got {text!r}") from None


def load_stimulus(path: Union[str, Path], observe_window=None) -> Stimulus:
    """Read a stimulus CSV: header of PI names, one 0/1 row per cycle.

    An optional leading ``cycle`` column is accepted (and required for
    designs without primary inputs); its values must be 0, 1, 2, ...
    """
    path = Path(path)
    if not path.is_file():
        raise StimulusError(f"stimulus file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise StimulusError(f"{path}: empty stimulus file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    index = None
    if header and header[0] == "cycle":
        index = [int(r[0]) for r in body]
        if index != list(range(len(body))):
            raise StimulusError(f"{path}: cycle column must count 0, 1, 2, ...")
        header, body = header[1:], [r[1:] for r in body]
    if len(set(header)) != len(header):
        raise StimulusError(f"{path}: duplicate input column")
    columns: Dict[str, List[int]] = {h: [] for h in header}
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise StimulusError(f"{path}:{lineno}: expected {len(header)} values")
        for h, v in zip(header, row):
            v = v.strip()
            if v not in ("0", "1"):
                raise StimulusError(f"{path}:{lineno}: value {v!r} for {h} is not 0/1")
            columns[h].append(int(v))
    return Stimulus.from_columns(columns, observe_window, cycles=len(body))


def write_stimulus(stimulus: Stimulus, path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cycle", *stimulus.inputs])
        for t, row in enumerate(stimulus.vectors.astype(int)):
            w.writerow([t, *row.tolist()])


@dataclass(frozen=True)
class GoldenTrace:
    """Primary-output values over the observe window, one row per cycle."""

    outputs: Tuple[str, ...]
    window: Tuple[int, int]
    values: np.ndarray  # (window length, len(outputs)), dtype uint8

    def __eq__(self, other):
        return (
            isinstance(other, GoldenTrace)
            and self.outputs == other.outputs
            and self.window == other.window
            and np.array_equal(self.values, other.values)
        )

    def column(self, output: str) -> List[int]:
        return self.values[:, self.outputs.index(output)].tolist()


@dataclass(frozen=True)
class ActivityTrace:
    """Sampled Q waveform of every flip-flop, one row per cycle."""

    flip_flops: Tuple[str, ...]
    values: np.ndarray  # (cycles, len(flip_flops)), dtype uint8

    @property
    def cycles(self) -> int:
        return self.values.shape[0]

    def waveform(self, ff: str) -> np.ndarray:
        try:
            return self.values[:, self.flip_flops.index(ff)]
        except ValueError:
            raise UnknownFlipFlop(f"no trace for flip-flop {ff!r}") from None


def levelize(graph: CircuitGraph) -> List[str]:
    """Combinational cells in evaluation order (drivers first)."""
    comb = graph.g.subgraph(graph.nodes_of(COMBINATIONAL))
    return list(nx.lexicographical_topological_sort(comb))


def _and(xs):
    return reduce(np.logical_and, xs)


def _or(xs):
    return reduce(np.logical_or, xs)


_GATES = {
    "BUF": lambda xs: xs[0].copy(),
    "NOT": lambda xs: ~xs[0],
    "AND": _and,
    "OR": _or,
    "NAND": lambda xs: ~_and(xs),
    "NOR": lambda xs: ~_or(xs),
    "XOR2": lambda xs: xs[0] ^ xs[1],
    "XNOR2": lambda xs: ~(xs[0] ^ xs[1]),
    "MUX2": lambda xs: np.where(xs[2], xs[1], xs[0]),
}


def gate_function(cell_type: str):
    if cell_type in _GATES:
        return _GATES[cell_type]
    return _GATES[cell_type.rstrip("234")]


class CompiledNetlist:
    """Index-based form of a netlist ready for lane-parallel simulation."""

    def __init__(self, netlist: Netlist, graph: Optional[CircuitGraph] = None):
        graph = graph or build_graph(netlist)
        self.netlist = netlist
        self.flip_flops = tuple(list_flip_flops(netlist))
        self.inputs = tuple(netlist.input_names)
        self.outputs = tuple(netlist.output_names)
        self.net_index = {n.net_name: i for i, n in enumerate(netlist.nets)}
        idx = self.net_index

        self.const_nets, self.const_values = [], []
        for net in netlist.nets:
            if isinstance(net.driver, ConstantDriver):
                self.const_nets.append(idx[net.net_name])
                self.const_values.append(bool(net.driver.value))
        for cell in netlist.cells:
            if cell.is_constant:
                self.const_nets.append(idx[cell.pins["Y"]])
                self.const_values.append(cell.cell_type == "TIE1")

        ffs = [netlist.cell(name) for name in self.flip_flops]
        self.ff_d = np.array([idx[c.pins["D"]] for c in ffs], dtype=int)
        self.ff_q = np.array([idx[c.pins["Q"]] for c in ffs], dtype=int)
        self.ff_rn = [(i, idx[c.pins["RN"]]) for i, c in enumerate(ffs) if c.cell_type == "DFFR"]
        self.po_nets = np.array([idx[netlist.output_nets[p]] for p in self.outputs], dtype=int)
        self.order = levelize(graph)
        self.ops = []
        for name in self.order:
            cell = netlist.cell(name)
            ins = [idx[cell.pins[p]] for p in cell.input_pins]
            self.ops.append((gate_function(cell.cell_type), idx[cell.pins["Y"]], ins))

    def ff_index(self, ff: str) -> int:
        try:
            return self.flip_flops.index(ff)
        except ValueError:
            raise UnknownFlipFlop(f"no flip-flop named {ff!r}") from None

    def input_matrix(self, stimulus: Stimulus) -> np.ndarray:
        """Stimulus columns reordered to the netlist's input order."""
        missing = [p for p in self.inputs if p not in stimulus.inputs]
        if missing:
            raise StimulusError(f"stimulus lacks primary inputs: {', '.join(missing)}")
        extra = [p for p in stimulus.inputs if p not in self.inputs]
        if extra:
            raise StimulusError(f"stimulus drives unknown inputs: {', '.join(extra)}")
        cols = [stimulus.inputs.index(p) for p in self.inputs]
        return stimulus.vectors[:, cols]

    def simulate(
        self,
        stimulus: Stimulus,
        lanes: int = 1,
        flip_ff: Optional[np.ndarray] = None,
        flip_cycle: Optional[np.ndarray] = None,
        golden: Optional[np.ndarray] = None,
        record_outputs: bool = True,
        record_activity: bool = False,
    ) -> dict:
        """Run ``lanes`` copies of the design side by side.

        Lane ``r`` has flip-flop ``flip_ff[r]`` inverted right after the clock
        edge that ends cycle ``flip_cycle[r]``. When ``golden`` (the full
        ``(cycles, n_outputs)`` fault-free output matrix) is given, the result
        carries a per-lane ``failed`` mask for the observe window.
        """
        pis = self.input_matrix(stimulus)
        n_cycles = stimulus.cycles
        lo, hi = stimulus.observe_window
        V = np.zeros((len(self.net_index), lanes), dtype=bool)
        if self.const_nets:
            V[self.const_nets] = np.array(self.const_values)[:, None]
        state = np.zeros((len(self.flip_flops), lanes), dtype=bool)
        pi_nets = [self.net_index[p] for p in self.inputs]

        flips_at: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
        if flip_ff is not None:
            flip_ff = np.asarray(flip_ff, dtype=int)
            flip_cycle = np.asarray(flip_cycle, dtype=int)
            lane_ids = np.arange(lanes)
            for c in np.unique(flip_cycle):
                sel = flip_cycle == c
                flips_at[int(c)] = (flip_ff[sel], lane_ids[sel])

        outputs = np.zeros((hi - lo + 1, len(self.outputs), lanes), dtype=bool) if record_outputs else None
        activity = np.zeros((n_cycles, len(self.flip_flops), lanes), dtype=bool) if record_activity else None
        failed = np.zeros(lanes, dtype=bool) if golden is not None else None

        for t in range(n_cycles):
            if pi_nets:
                V[pi_nets] = pis[t][:, None]
            V[self.ff_q] = state
            for fn, out, ins in self.ops:
                V[out] = fn([V[i] for i in ins])
            if lo <= t <= hi:
                po = V[self.po_nets]
                if record_outputs:
                    outputs[t - lo] = po
                if golden is not None:
                    failed |= np.any(po != golden[t][:, None], axis=0)
            if record_activity:
                activity[t] = state
            state = V[self.ff_d].copy()
            for i, rn in self.ff_rn:
                state[i] &= V[rn]
            if t in flips_at:
                ffs, lane_ids = flips_at[t]
                state[ffs, lane_ids] ^= True
        return {"outputs": outputs, "activity": activity, "failed": failed}

    def golden_outputs(self, stimulus: Stimulus) -> np.ndarray:
        """Fault-free PO matrix over *all* cycles, shape ``(cycles, n_outputs)``."""
        full = Stimulus(stimulus.inputs, stimulus.vectors, (0, stimulus.cycles - 1))
        return self.simulate(full)["outputs"][:, :, 0]


def compile_netlist(netlist: Netlist, graph: Optional[CircuitGraph] = None) -> CompiledNetlist:
    return CompiledNetlist(netlist, graph)


def _as_compiled(netlist) -> CompiledNetlist:
    return netlist if isinstance(netlist, CompiledNetlist) else CompiledNetlist(netlist)


def run_golden(netlist, stimulus: Stimulus) -> Tuple[GoldenTrace, ActivityTrace]:
    """Fault-free run: PO trace over the observe window plus FF activity."""
    sim = _as_compiled(netlist)
    res = sim.simulate(stimulus, record_activity=True)
    golden = GoldenTrace(sim.outputs, stimulus.observe_window, res["outputs"][:, :, 0].astype(np.uint8))
    activity = ActivityTrace(sim.flip_flops, res["activity"][:, :, 0].astype(np.uint8))
    return golden, activity


def run_with_injection(netlist, stimulus: Stimulus, target_ff: str, flip_cycle: int) -> GoldenTrace:
    """Single run with ``target_ff`` inverted after the clock edge of ``flip_cycle``."""
    sim = _as_compiled(netlist)
    ff = sim.ff_index(target_ff)
    if not 0 <= flip_cycle < stimulus.cycles:
        raise CycleOutOfRange(f"flip cycle {flip_cycle} outside [0, {stimulus.cycles})")
    res = sim.simulate(stimulus, flip_ff=[ff], flip_cycle=[flip_cycle])
    return GoldenTrace(sim.outputs, stimulus.observe_window, res["outputs"][:, :, 0].astype(np.uint8))


def write_trace(golden: GoldenTrace, activity: ActivityTrace, path: Union[str, Path]) -> None:
    """One row per cycle: FF samples, then PO values (blank outside the window)."""
    lo, hi = golden.window
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cycle", *(f"ff:{f}" for f in activity.flip_flops), *(f"po:{o}" for o in golden.outputs)])
        for t in range(activity.cycles):
            po = golden.values[t - lo].tolist() if lo <= t <= hi else [""] * len(golden.outputs)
            w.writerow([t, *activity.values[t].tolist(), *po])
