"""Directed circuit graph and the flip-flop level traversals built on it.

Nodes are cell instance names plus synthetic ``PI:<port>``, ``PO:<port>`` and
``CONST:<net>`` nodes. There is one edge per (driver, sink pin) pair of every
data net; the clock net is not part of the graph.

"Direct" flip-flop connections cross combinational cells only. Stage depth
counts flip-flop boundaries: a purely combinational PI -> FF connection has
depth 1, and every extra flip-flop crossed adds one.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, List, NamedTuple, Optional

import networkx as nx

from .errors import CombinationalLoopError, UnknownFlipFlop
from .netlist import ConstantDriver, Netlist, list_flip_flops

FLIP_FLOP = "flip_flop"
COMBINATIONAL = "combinational"
PRIMARY_INPUT = "primary_input"
PRIMARY_OUTPUT = "primary_output"
CONSTANT = "constant"


def pi_node(name: str) -> str:
    return f"PI:{name}"


def po_node(name: str) -> str:
    return f"PO:{name}"


def const_node(net: str) -> str:
    return f"CONST:{net}"


@dataclass(frozen=True)
class FfAdjacency:
    """Per flip-flop direct neighbourhood through combinational logic only.

    Primary ports and constants are stored by port / net name, without the
    graph node prefix.
    """

    flip_flops: List[str]
    predecessors: Dict[str, FrozenSet[str]]
    successors: Dict[str, FrozenSet[str]]
    inputs: Dict[str, FrozenSet[str]]
    outputs: Dict[str, FrozenSet[str]]
    constants: Dict[str, FrozenSet[str]]
    comb_inputs: Dict[str, FrozenSet[str]]
    comb_outputs: Dict[str, FrozenSet[str]]

    def check(self, ff: str) -> None:
        if ff not in self.successors:
            raise UnknownFlipFlop(f"unknown flip-flop {ff!r}")


@dataclass(frozen=True)
class StageDepths:
    min: float
    avg: float
    max: float


class FeedbackLoop(NamedTuple):
    has_loop: bool
    depth: Optional[int]


class CircuitGraph:
    """Immutable graph view of a :class:`~fdrlab.netlist.Netlist`."""

    def __init__(self, netlist: Netlist, graph: nx.MultiDiGraph):
        self.netlist = netlist
        self.g = graph
        self.flip_flops = list_flip_flops(netlist)

    def kind(self, node: str) -> str:
        return self.g.nodes[node]["kind"]

    def nodes_of(self, kind: str) -> List[str]:
        return sorted(n for n, k in self.g.nodes(data="kind") if k == kind)

    @property
    def edge_count(self) -> int:
        return self.g.number_of_edges()

    def stats(self) -> dict:
        kinds = [FLIP_FLOP, COMBINATIONAL, PRIMARY_INPUT, PRIMARY_OUTPUT, CONSTANT]
        out = {"name": self.netlist.name, "nodes": self.g.number_of_nodes(), "edges": self.edge_count}
        out.update({k: len(self.nodes_of(k)) for k in kinds})
        return out

    @cached_property
    def adjacency(self) -> FfAdjacency:
        return ff_adjacency(self)

    @cached_property
    def _pi_distances(self) -> Dict[str, Dict[str, int]]:
        adj = self.adjacency
        seeds = {}
        for ff in adj.flip_flops:
            for pi in adj.inputs[ff]:
                seeds.setdefault(pi, []).append(ff)
        return {pi: _bfs(sorted(s), adj.successors) for pi, s in sorted(seeds.items())}

    @cached_property
    def _po_distances(self) -> Dict[str, Dict[str, int]]:
        adj = self.adjacency
        seeds = {}
        for ff in adj.flip_flops:
            for po in adj.outputs[ff]:
                seeds.setdefault(po, []).append(ff)
        return {po: _bfs(sorted(s), adj.predecessors) for po, s in sorted(seeds.items())}

    @cached_property
    def _comb_depth(self) -> Dict[str, Optional[int]]:
        # longest count of combinational cells from a node to any FF data pin or PO
        comb = self.g.subgraph(self.nodes_of(COMBINATIONAL))
        depth: Dict[str, Optional[int]] = {}
        for node in reversed(list(nx.lexicographical_topological_sort(comb))):
            best = None
            for succ in self.g.successors(node):
                kind = self.kind(succ)
                if kind in (FLIP_FLOP, PRIMARY_OUTPUT):
                    cand = 1
                elif kind == COMBINATIONAL and depth[succ] is not None:
                    cand = 1 + depth[succ]
                else:
                    continue
                best = cand if best is None else max(best, cand)
            depth[node] = best
        return depth

    def comb_path_depth(self, ff: str) -> int:
        self.adjacency.check(ff)
        best = 0
        for succ in self.g.successors(ff):
            if self.kind(succ) == COMBINATIONAL and self._comb_depth[succ] is not None:
                best = max(best, self._comb_depth[succ])
        return best


def _bfs(seeds: List[str], neighbours: Dict[str, FrozenSet[str]]) -> Dict[str, int]:
    """Unit-weight shortest distances; every seed sits at distance 1."""
    dist = {s: 1 for s in seeds}
    queue = deque(seeds)
    while queue:
        node = queue.popleft()
        for nxt in sorted(neighbours[node]):
            if nxt not in dist:
                dist[nxt] = dist[node] + 1
                queue.append(nxt)
    return dist


def build_graph(netlist: Netlist) -> CircuitGraph:
    """Convert a netlist into a :class:`CircuitGraph`.

    Raises :class:`CombinationalLoopError` if the combinational cells contain
    a cycle.
    """
    g = nx.MultiDiGraph()
    for cell in netlist.cells:
        if cell.is_sequential:
            kind = FLIP_FLOP
        elif cell.is_constant:
            kind = CONSTANT
        else:
            kind = COMBINATIONAL
        g.add_node(cell.instance_name, kind=kind)
    for port in netlist.primary_inputs:
        g.add_node(pi_node(port.pin), kind=PRIMARY_INPUT)
    for port in netlist.primary_outputs:
        g.add_node(po_node(port.pin), kind=PRIMARY_OUTPUT)
    for net in netlist.constants:
        g.add_node(const_node(net), kind=CONSTANT)

    for net in netlist.nets:
        drv = net.driver
        if isinstance(drv, ConstantDriver):
            src = const_node(drv.net)
        elif drv.is_primary:
            src = pi_node(drv.pin)
        else:
            src = drv.owner
        for sink in net.sinks:
            dst = po_node(sink.pin) if sink.is_primary else sink.owner
            g.add_edge(src, dst, net=net.net_name, pin=sink.pin)

    comb = g.subgraph(n for n, k in g.nodes(data="kind") if k == COMBINATIONAL)
    try:
        cycle = nx.find_cycle(comb)
    except nx.NetworkXNoCycle:
        pass
    else:
        raise CombinationalLoopError([edge[0] for edge in cycle] + [cycle[0][0]])
    return CircuitGraph(netlist, g)


def ff_adjacency(graph: CircuitGraph) -> FfAdjacency:
    """Direct FF/PI/PO/constant neighbours of every flip-flop."""
    g = graph.g
    kind = graph.kind
    fields = {k: {} for k in ("pred", "succ", "pi", "po", "const", "cin", "cout")}

    for ff in graph.flip_flops:
        succ, pos, cout = set(), set(), set()
        stack, seen = list(g.successors(ff)), set()
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            k = kind(node)
            if k == FLIP_FLOP:
                succ.add(node)
            elif k == PRIMARY_OUTPUT:
                pos.add(node[3:])
            elif k == COMBINATIONAL:
                cout.add(node)
                stack.extend(g.successors(node))

        pred, pis, consts, cin = set(), set(), set(), set()
        stack, seen = list(g.predecessors(ff)), set()
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            k = kind(node)
            if k == FLIP_FLOP:
                pred.add(node)
            elif k == PRIMARY_INPUT:
                pis.add(node[3:])
            elif k == CONSTANT:
                consts.add(node)
            elif k == COMBINATIONAL:
                cin.add(node)
                stack.extend(g.predecessors(node))

        for key, value in zip(fields, (pred, succ, pis, pos, consts, cin, cout)):
            fields[key][ff] = frozenset(value)

    return FfAdjacency(
        flip_flops=list(graph.flip_flops),
        predecessors=fields["pred"],
        successors=fields["succ"],
        inputs=fields["pi"],
        outputs=fields["po"],
        constants=fields["const"],
        comb_inputs=fields["cin"],
        comb_outputs=fields["cout"],
    )


def transitive_ff_cone(adjacency: FfAdjacency, ff: str, direction: str) -> FrozenSet[str]:
    """All flip-flops influencing (``"influencing"``) or influenced by
    (``"influenced"``) ``ff``. ``ff`` itself is included only when it lies on
    a cycle."""
    adjacency.check(ff)
    if direction == "influencing":
        nbrs = adjacency.predecessors
    elif direction == "influenced":
        nbrs = adjacency.successors
    else:
        raise ValueError(f"direction must be 'influencing' or 'influenced', not {direction!r}")
    seen = set()
    stack = list(nbrs[ff])
    while stack:
        node = stack.pop()
        if node not in seen:
            seen.add(node)
            stack.extend(nbrs[node])
    return frozenset(seen)


def stage_depths(graph: CircuitGraph, ff: str, endpoint: str) -> Optional[StageDepths]:
    """Min/avg/max stage depth between ``ff`` and the primary ports connected
    to it, or ``None`` when no port of that side reaches it.

    ``endpoint`` is ``"from_primary_inputs"`` or ``"to_primary_outputs"``.
    """
    graph.adjacency.check(ff)
    if endpoint == "from_primary_inputs":
        table = graph._pi_distances
    elif endpoint == "to_primary_outputs":
        table = graph._po_distances
    else:
        raise ValueError(f"unknown endpoint {endpoint!r}")
    depths = [dist[ff] for dist in table.values() if ff in dist]
    if not depths:
        return None
    return StageDepths(float(min(depths)), sum(depths) / len(depths), float(max(depths)))


def feedback_loop(adjacency: FfAdjacency, ff: str) -> FeedbackLoop:
    """Shortest cycle through ``ff`` in flip-flop hops (a combinational
    self-loop has depth 1)."""
    adjacency.check(ff)
    dist = _bfs(sorted(adjacency.successors[ff]), adjacency.successors)
    depth = dist.get(ff)
    return FeedbackLoop(depth is not None, depth)
