"""Graph model for entanglement distribution networks.

A network is an undirected graph whose edges carry an integer Bell-pair
capacity, a unit cost per delivered pair (an integer in milli-cost units), a
rational generation-error budget, and an optional bound on channel uses.
Two distinguished nodes, ``source`` and ``sink``, are the clients requesting
end-to-end entanglement.

All types in this module are immutable after construction and safe to share
across threads. All functions are pure.

Network documents are JSON objects with the exact shape::

    {
      "nodes": ["s", "r", "t"],
      "edges": [
        {"a": "s", "b": "r", "capacity": 3, "cost": 1,
         "delta": 0.001, "max_uses": 10,
         "channel": {"kind": "pure-loss", "eta": 0.5, "rate": 1},
         "yield": {"kind": "linear-floor", "rate": "1/2"}}
      ],
      "source": "s",
      "sink": "t"
    }

``delta``, ``max_uses``, ``channel`` and ``yield`` are optional; every other
field is required and unknown fields are rejected. ``cost`` is given in cost units and
is stored internally in milli-cost units (scaled by 1000); fractional costs
must be exact at that precision. Listing the same node pair more than once
merges the entries into one edge by summing capacities and channel-use
bounds; their costs and deltas must agree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ParseError, ValidationError

NodeId = str
EdgeKey = tuple[NodeId, NodeId]

# Costs are integers in milli-cost units: 1 cost unit = 1000 milli.
MILLI = 1000

_EDGE_FIELDS_REQUIRED = frozenset({"a", "b", "capacity", "cost"})
_EDGE_FIELDS_OPTIONAL = frozenset({"delta", "max_uses", "channel", "yield"})
_DOC_FIELDS = frozenset({"nodes", "edges", "source", "sink"})


def edge_key(a: NodeId, b: NodeId) -> EdgeKey:
    """Canonical (sorted) key for the undirected edge between ``a`` and ``b``."""
    return (a, b) if a <= b else (b, a)


def as_fraction(value: object, what: str = "value") -> Fraction:
    """Convert a JSON number or a string like ``"2/3"`` to an exact Fraction.

    Floats are interpreted through their decimal representation, so the
    ``0.001`` a user writes in a file means exactly 1/1000.
    """
    if isinstance(value, bool):
        raise ParseError(f"{what}: expected a number, got a boolean")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"{what}: not a valid rational: {value!r}") from exc
    if isinstance(value, Fraction):
        return value
    raise ParseError(f"{what}: expected a number, got {type(value).__name__}")


def cost_to_milli(value: object, what: str = "cost") -> int:
    """Convert a cost in cost units to integer milli-units, exactly or not at all."""
    frac = as_fraction(value, what) * MILLI
    if frac.denominator != 1:
        raise ValidationError(
            f"{what}: {value!r} is not representable in whole milli-cost units"
        )
    if frac < 0:
        raise ValidationError(f"{what}: must be non-negative, got {value!r}")
    return int(frac)


@dataclass(frozen=True)
class Edge:
    """Undirected network edge.

    Attributes:
        a: One endpoint. Endpoints are stored in sorted order.
        b: The other endpoint.
        capacity: Bell pairs deliverable within the allowed channel uses.
        unit_cost: Cost per delivered pair, in milli-cost units.
        gen_error: Trace-distance budget for one generated pair, in [0, 1].
        max_uses: Channel-use bound, or None when unbounded.
    """

    a: NodeId
    b: NodeId
    capacity: int
    unit_cost: int
    gen_error: Fraction = Fraction(0)
    max_uses: int | None = None

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValidationError(f"self-loop at node {self.a!r}")
        if self.a > self.b:
            a, b = self.a, self.b
            object.__setattr__(self, "a", b)
            object.__setattr__(self, "b", a)
        if not isinstance(self.capacity, int) or isinstance(self.capacity, bool):
            raise ValidationError(f"edge {self.key}: capacity must be an integer")
        if self.capacity < 0:
            raise ValidationError(f"edge {self.key}: negative capacity")
        if not isinstance(self.unit_cost, int) or isinstance(self.unit_cost, bool):
            raise ValidationError(f"edge {self.key}: unit_cost must be an integer")
        if self.unit_cost < 0:
            raise ValidationError(f"edge {self.key}: negative unit_cost")
        if not isinstance(self.gen_error, Fraction):
            object.__setattr__(self, "gen_error", as_fraction(self.gen_error))
        if not 0 <= self.gen_error <= 1:
            raise ValidationError(f"edge {self.key}: gen_error outside [0, 1]")
        if self.max_uses is not None:
            if not isinstance(self.max_uses, int) or isinstance(self.max_uses, bool):
                raise ValidationError(f"edge {self.key}: max_uses must be an integer")
            if self.max_uses < 1:
                raise ValidationError(f"edge {self.key}: max_uses must be positive")

    @property
    def key(self) -> EdgeKey:
        return (self.a, self.b)

    def other(self, node: NodeId) -> NodeId:
        if node == self.a:
            return self.b
        if node == self.b:
            return self.a
        raise KeyError(node)


@dataclass(frozen=True)
class NetworkGraph:
    """Immutable network with a designated client pair.

    Invariants enforced at construction: node labels are unique, endpoints
    exist, at most one edge per unordered node pair, and source != sink.
    """

    nodes: tuple[NodeId, ...]
    edges: tuple[Edge, ...]
    source: NodeId
    sink: NodeId

    def __post_init__(self) -> None:
        nodes = tuple(sorted(self.nodes))
        if len(set(nodes)) != len(nodes):
            raise ValidationError("duplicate node labels")
        for n in nodes:
            if not isinstance(n, str) or not n:
                raise ValidationError(f"node labels must be non-empty strings: {n!r}")
        edges = tuple(sorted(self.edges, key=lambda e: e.key))
        keys = [e.key for e in edges]
        if len(set(keys)) != len(keys):
            raise ValidationError("duplicate edge between the same node pair")
        node_set = set(nodes)
        for e in edges:
            if e.a not in node_set or e.b not in node_set:
                raise ValidationError(f"edge {e.key} references an unknown node")
        if self.source not in node_set:
            raise ValidationError(f"unknown source node {self.source!r}")
        if self.sink not in node_set:
            raise ValidationError(f"unknown sink node {self.sink!r}")
        if self.source == self.sink:
            raise ValidationError("source and sink must differ")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

    @cached_property
    def edge_map(self) -> Mapping[EdgeKey, Edge]:
        return {e.key: e for e in self.edges}

    @cached_property
    def adjacency(self) -> Mapping[NodeId, tuple[Edge, ...]]:
        adj: dict[NodeId, list[Edge]] = {n: [] for n in self.nodes}
        for e in self.edges:
            adj[e.a].append(e)
            adj[e.b].append(e)
        return {n: tuple(v) for n, v in adj.items()}

    def edge_between(self, a: NodeId, b: NodeId) -> Edge:
        return self.edge_map[edge_key(a, b)]

    @classmethod
    def from_edge_list(
        cls,
        edges: Iterable[Edge | tuple],
        source: NodeId,
        sink: NodeId,
        extra_nodes: Iterable[NodeId] = (),
    ) -> "NetworkGraph":
        """Build a graph from ``(a, b, capacity, unit_cost[, gen_error[, max_uses]])``
        tuples or Edge objects. Node set is inferred from the endpoints."""
        built = []
        for item in edges:
            built.append(item if isinstance(item, Edge) else Edge(*item))
        nodes = {source, sink, *extra_nodes}
        for e in built:
            nodes.add(e.a)
            nodes.add(e.b)
        return cls(tuple(sorted(nodes)), tuple(built), source, sink)


@dataclass(frozen=True)
class DiGraph:
    """Directed graph induced by a network: one arc per orientation of each edge."""

    nodes: tuple[NodeId, ...]
    arcs: tuple[tuple[NodeId, NodeId], ...]


@dataclass(frozen=True)
class NetworkDocument:
    """A parsed network file: the graph plus raw per-edge annotations."""

    graph: NetworkGraph
    channels: Mapping[EdgeKey, Mapping[str, object]]
    yields: Mapping[EdgeKey, Mapping[str, object]] = field(default_factory=dict)


def _parse_edge_entry(entry: object, index: int) -> tuple[EdgeKey, dict]:
    if not isinstance(entry, Mapping):
        raise ParseError(f"edges[{index}]: expected an object")
    unknown = set(entry) - _EDGE_FIELDS_REQUIRED - _EDGE_FIELDS_OPTIONAL
    if unknown:
        raise ParseError(f"edges[{index}]: unknown fields {sorted(unknown)}")
    missing = _EDGE_FIELDS_REQUIRED - set(entry)
    if missing:
        raise ParseError(f"edges[{index}]: missing fields {sorted(missing)}")
    a, b = entry["a"], entry["b"]
    if not isinstance(a, str) or not isinstance(b, str):
        raise ParseError(f"edges[{index}]: endpoints must be strings")
    capacity = entry["capacity"]
    if not isinstance(capacity, int) or isinstance(capacity, bool):
        raise ParseError(f"edges[{index}]: capacity must be an integer")
    fields = {
        "capacity": capacity,
        "unit_cost": cost_to_milli(entry["cost"], f"edges[{index}].cost"),
        "gen_error": None,
        "max_uses": None,
        "channel": None,
        "yield_spec": None,
    }
    if "delta" in entry:
        delta = as_fraction(entry["delta"], f"edges[{index}].delta")
        fields["gen_error"] = delta
    if "max_uses" in entry:
        mu = entry["max_uses"]
        if not isinstance(mu, int) or isinstance(mu, bool):
            raise ParseError(f"edges[{index}].max_uses: must be an integer")
        fields["max_uses"] = mu
    if "channel" in entry:
        if not isinstance(entry["channel"], Mapping):
            raise ParseError(f"edges[{index}].channel: expected an object")
        fields["channel"] = dict(entry["channel"])
    if "yield" in entry:
        if not isinstance(entry["yield"], Mapping):
            raise ParseError(f"edges[{index}].yield: expected an object")
        fields["yield_spec"] = dict(entry["yield"])
    if a == b:
        raise ValidationError(f"edges[{index}]: self-loop at node {a!r}")
    return edge_key(a, b), fields


def _merge_parallel(key: EdgeKey, entries: Sequence[dict]) -> dict:
    # Parallel channels between the same pair act as a single channel, so
    # capacities and use bounds add; price and error budget must be uniform.
    merged = dict(entries[0])
    for other in entries[1:]:
        if other["unit_cost"] != merged["unit_cost"]:
            raise ValidationError(
                f"parallel edges {key} disagree on cost; cannot merge"
            )
        if other["gen_error"] != merged["gen_error"]:
            raise ValidationError(
                f"parallel edges {key} disagree on delta; cannot merge"
            )
        merged["capacity"] += other["capacity"]
        if merged["max_uses"] is None or other["max_uses"] is None:
            merged["max_uses"] = None
        else:
            merged["max_uses"] += other["max_uses"]
        if merged["channel"] is None:
            merged["channel"] = other["channel"]
        elif other["channel"] is not None and other["channel"] != merged["channel"]:
            raise ValidationError(
                f"parallel edges {key} disagree on channel annotation"
            )
        if merged["yield_spec"] is None:
            merged["yield_spec"] = other["yield_spec"]
        elif (
            other["yield_spec"] is not None
            and other["yield_spec"] != merged["yield_spec"]
        ):
            raise ValidationError(
                f"parallel edges {key} disagree on yield annotation"
            )
    return merged


def parse_document(
    doc: Mapping, *, default_gen_error: Fraction | None = None
) -> NetworkDocument:
    """Parse an already-decoded network document.

    Args:
        doc: Mapping with exactly the documented fields.
        default_gen_error: Generation error applied to edges that do not
            specify ``delta``. Defaults to zero.

    Returns:
        The validated graph together with any per-edge channel annotations.

    Raises:
        ParseError: On structural problems (types, unknown fields).
        ValidationError: On semantic problems (self-loops, bad merges, ...).
    """
    if not isinstance(doc, Mapping):
        raise ParseError("network document must be an object")
    unknown = set(doc) - _DOC_FIELDS
    if unknown:
        raise ParseError(f"unknown fields {sorted(unknown)}")
    missing = _DOC_FIELDS - set(doc)
    if missing:
        raise ParseError(f"missing fields {sorted(missing)}")
    if not isinstance(doc["nodes"], Sequence) or isinstance(doc["nodes"], (str, bytes)):
        raise ParseError("nodes: expected an array of labels")
    if not isinstance(doc["edges"], Sequence) or isinstance(doc["edges"], (str, bytes)):
        raise ParseError("edges: expected an array of edge objects")
    nodes = list(doc["nodes"])
    for n in nodes:
        if not isinstance(n, str) or not n:
            raise ParseError(f"nodes: labels must be non-empty strings: {n!r}")
    if len(set(nodes)) != len(nodes):
        raise ValidationError("duplicate node labels")
    node_set = set(nodes)

    grouped: dict[EdgeKey, list[dict]] = {}
    order: list[EdgeKey] = []
    for i, entry in enumerate(doc["edges"]):
        key, fields = _parse_edge_entry(entry, i)
        if key[0] not in node_set or key[1] not in node_set:
            raise ValidationError(f"edges[{i}]: unknown endpoint in {key}")
        if key not in grouped:
            order.append(key)
        grouped.setdefault(key, []).append(fields)

    if default_gen_error is None:
        default_gen_error = Fraction(0)
    edges = []
    channels: dict[EdgeKey, Mapping[str, object]] = {}
    yields: dict[EdgeKey, Mapping[str, object]] = {}
    for key in order:
        merged = _merge_parallel(key, grouped[key])
        gen_error = merged["gen_error"]
        if gen_error is None:
            gen_error = default_gen_error
        edges.append(
            Edge(
                key[0],
                key[1],
                merged["capacity"],
                merged["unit_cost"],
                gen_error,
                merged["max_uses"],
            )
        )
        if merged["channel"] is not None:
            channels[key] = merged["channel"]
        if merged["yield_spec"] is not None:
            yields[key] = merged["yield_spec"]

    source, sink = doc["source"], doc["sink"]
    if not isinstance(source, str) or not isinstance(sink, str):
        raise ParseError("source and sink must be strings")
    graph = NetworkGraph(tuple(nodes), tuple(edges), source, sink)
    return NetworkDocument(graph=graph, channels=channels, yields=yields)


def build_graph(doc: Mapping) -> NetworkGraph:
    """Build a validated NetworkGraph from a decoded network document."""
    return parse_document(doc).graph


def load_network(
    source: str | Path, *, default_gen_error: Fraction | None = None
) -> NetworkDocument:
    """Load and parse a network document from a JSON file or JSON text."""
    text = source
    path = Path(source)
    try:
        if path.is_file():
            text = path.read_text()
    except OSError:
        pass
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return parse_document(doc, default_gen_error=default_gen_error)


def induce_digraph(g: NetworkGraph) -> DiGraph:
    """Both orientations of every edge, as an explicit directed graph."""
    arcs = []
    for e in g.edges:
        arcs.append((e.a, e.b))
        arcs.append((e.b, e.a))
    return DiGraph(nodes=g.nodes, arcs=tuple(sorted(arcs)))


def undirected_max_flow(
    nodes: Sequence[NodeId],
    edges: Iterable[tuple[NodeId, NodeId, object]],
    source: NodeId,
    sink: NodeId,
    *,
    tol=0,
):
    """Max-flow value of an undirected capacitated graph (Dinic's algorithm).

    Works over any ordered numeric type (int, Fraction, float). Opposing use
    of one edge cancels, so the pair of mutually-reverse residual arcs with
    capacity c each models the shared per-edge stock exactly.
    """
    idx = {v: i for i, v in enumerate(nodes)}
    n = len(idx)
    s, t = idx[source], idx[sink]
    adj: list[list[int]] = [[] for _ in range(n)]
    to: list[int] = []
    res: list = []
    total = 0
    for a, b, c in edges:
        if c <= tol:
            continue
        ia, ib = idx[a], idx[b]
        adj[ia].append(len(to))
        to.append(ib)
        res.append(c)
        adj[ib].append(len(to))
        to.append(ia)
        res.append(c)
        total += c

    flow = 0
    while True:
        level = [-1] * n
        level[s] = 0
        queue = [s]
        for u in queue:
            for aid in adj[u]:
                v = to[aid]
                if level[v] < 0 and res[aid] > tol:
                    level[v] = level[u] + 1
                    queue.append(v)
        if level[t] < 0:
            return flow
        it = [0] * n

        def augment(u, limit):
            if u == t:
                return limit
            while it[u] < len(adj[u]):
                aid = adj[u][it[u]]
                v = to[aid]
                if res[aid] > tol and level[v] == level[u] + 1:
                    pushed = augment(v, min(limit, res[aid]))
                    if pushed > tol:
                        res[aid] -= pushed
                        res[aid ^ 1] += pushed
                        return pushed
                it[u] += 1
            level[u] = -1
            return 0

        while True:
            pushed = augment(s, total)
            if pushed <= tol:
                break
            flow += pushed


def min_cut(g: NetworkGraph) -> int:
    """Minimum total capacity separating source from sink.

    Equals the minimum over node subsets containing the source but not the
    sink of the summed capacities of crossing edges, computed here as a
    max-flow. Returns 0 when the clients are disconnected.
    """
    return undirected_max_flow(
        g.nodes,
        ((e.a, e.b, e.capacity) for e in g.edges),
        g.source,
        g.sink,
    )
