"""Hierarchical network composition.

A higher-level network abstracts each edge as a whole lower-level network:
one "use" of such an edge means running the lower network once (delivering
its per-use pair target) and feeding the results to entanglement
distillation, summarized by a yield function. The edge then looks like a
physical channel again, with

* capacity: the yield at the edge's use bound,
* unit cost: an explicit price per distilled pair, or a constant-efficiency
  default derived from the lower network's per-use cost,
* generation error: the distillation target error for that edge.

Flattening a level this way reduces planning to the ordinary minimum-cost
flow machinery, and the per-edge generation errors of the active edges add
into the level's error budget regardless of how large the lower networks
are.

Hierarchical documents extend the flat network format: every edge carries a
``lower`` object instead of capacity and cost::

    {"a": "X", "b": "Y", "lower": {
        "network": { ...flat or hierarchical document... },
        "yield": {"kind": "linear-floor", "rate": "1/3"},
        "max_uses": 10,
        "delta_target": 0.01,
        "cost": 2.5,          # optional, else constant-efficiency default
        "target": 2,          # optional per-use pair target for the lower network
        "threshold": 0.1      # optional bound on the lower network's own error
    }}

Nesting depth is unbounded; traversals use explicit stacks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ParseError, ThresholdViolation, TooLarge, ValidationError
from .mincostflow import FlowSolution, min_cost_flow
from .netgraph import (
    Edge,
    EdgeKey,
    NetworkGraph,
    NodeId,
    as_fraction,
    cost_to_milli,
    min_cut,
    parse_document,
)
from .pathplan import build_swap_schedule, decompose_flow
from .stabsim import (
    ErrorBudget,
    NoiseModel,
    exact_operation_error,
    generation_error_budget,
)
from .yields import YieldFunction, parse_yield


@dataclass(frozen=True)
class HierEdge:
    """Higher-level edge backed by a lower-level network plus distillation.

    Attributes:
        a: One endpoint; endpoints are stored sorted, like physical edges.
        b: The other endpoint.
        lower: The network one level down whose clients are ``a`` and ``b``.
        yield_fn: Distilled pairs as a function of lower-network uses.
        unit_cost: Price per distilled pair in milli-units, or None to use
            the constant-efficiency default.
        distill_error: Trace-distance target for each distilled pair.
        lower_target: Pairs the lower network delivers per use; None means
            its full capacity (the min-cut).
        error_threshold: Optional bound the lower network's own error budget
            must not exceed; checked when planning lower uses.
    """

    a: NodeId
    b: NodeId
    lower: "HierarchicalNetwork"
    yield_fn: YieldFunction
    unit_cost: int | None = None
    distill_error: Fraction = Fraction(0)
    lower_target: int | None = None
    error_threshold: Fraction | None = None

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValidationError(f"self-loop at node {self.a!r}")
        if self.a > self.b:
            a, b = self.a, self.b
            object.__setattr__(self, "a", b)
            object.__setattr__(self, "b", a)
        if {self.lower.clients[0], self.lower.clients[1]} != {self.a, self.b}:
            raise ValidationError(
                f"edge {self.key}: lower network clients {self.lower.clients} "
                "do not coincide with the endpoints"
            )
        object.__setattr__(
            self, "distill_error", as_fraction(self.distill_error, "distill_error")
        )
        if not 0 <= self.distill_error <= 1:
            raise ValidationError(f"edge {self.key}: distill_error outside [0, 1]")
        if self.unit_cost is not None and (
            not isinstance(self.unit_cost, int) or self.unit_cost < 0
        ):
            raise ValidationError(f"edge {self.key}: unit_cost must be >= 0")
        if self.lower_target is not None and (
            not isinstance(self.lower_target, int) or self.lower_target < 0
        ):
            raise ValidationError(f"edge {self.key}: lower_target must be >= 0")
        # The flattened edge needs a finite capacity.
        self.yield_fn.cap()

    @property
    def key(self) -> EdgeKey:
        return (self.a, self.b)


@dataclass(frozen=True)
class HierarchicalNetwork:
    """A network whose edges are physical (level 0) or networks themselves.

    Level 0 wraps a plain NetworkGraph. At level k >= 1 every edge wraps a
    level k-1 network.
    """

    level: int
    nodes: tuple[NodeId, ...]
    edges: tuple[HierEdge, ...]
    clients: tuple[NodeId, NodeId]
    base: NetworkGraph | None = None

    def __post_init__(self) -> None:
        if self.level == 0:
            if self.base is None:
                raise ValidationError("level-0 network requires a base graph")
            if self.edges:
                raise ValidationError("level-0 network cannot carry wrapped edges")
            object.__setattr__(self, "nodes", self.base.nodes)
            object.__setattr__(self, "clients", (self.base.source, self.base.sink))
            return
        if self.base is not None:
            raise ValidationError("only level-0 networks carry a base graph")
        nodes = tuple(sorted(self.nodes))
        if len(set(nodes)) != len(nodes):
            raise ValidationError("duplicate node labels")
        edges = tuple(sorted(self.edges, key=lambda e: e.key))
        keys = [e.key for e in edges]
        if len(set(keys)) != len(keys):
            raise ValidationError("duplicate edge between the same node pair")
        node_set = set(nodes)
        for e in edges:
            if e.a not in node_set or e.b not in node_set:
                raise ValidationError(f"edge {e.key} references an unknown node")
            if e.lower.level != self.level - 1:
                raise ValidationError(
                    f"edge {e.key}: level-{self.level} edges must wrap "
                    f"level-{self.level - 1} networks, got level {e.lower.level}"
                )
        src, snk = self.clients
        if src not in node_set or snk not in node_set:
            raise ValidationError("clients must be nodes of the network")
        if src == snk:
            raise ValidationError("client nodes must differ")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_graph(cls, g: NetworkGraph) -> "HierarchicalNetwork":
        return cls(level=0, nodes=g.nodes, edges=(), clients=(g.source, g.sink), base=g)

    @classmethod
    def build(
        cls,
        edges: Sequence[HierEdge],
        source: NodeId,
        sink: NodeId,
        extra_nodes: Sequence[NodeId] = (),
    ) -> "HierarchicalNetwork":
        if not edges:
            raise ValidationError("a wrapped network needs at least one edge")
        level = edges[0].lower.level + 1
        nodes = {source, sink, *extra_nodes}
        for e in edges:
            nodes.add(e.a)
            nodes.add(e.b)
        return cls(
            level=level,
            nodes=tuple(sorted(nodes)),
            edges=tuple(edges),
            clients=(source, sink),
        )

    def edge_by_key(self, key: EdgeKey) -> HierEdge:
        for e in self.edges:
            if e.key == key:
                return e
        raise KeyError(key)


def effective_capacity(edge: HierEdge) -> int:
    """Distilled pairs available from one edge at its use bound."""
    return edge.yield_fn.cap()


@dataclass(frozen=True)
class _EdgeInfo:
    theta: int
    pounds: int
    lower_flat: NetworkGraph
    lower_target: int
    per_use_cost: int
    lower_solution: FlowSolution
    lower_generation: Fraction


@dataclass(frozen=True)
class _Resolved:
    flat: Mapping[int, NetworkGraph]  # id(network) -> flattened graph
    edges: Mapping[int, _EdgeInfo]  # id(edge) -> resolution


def _resolve(net: HierarchicalNetwork) -> _Resolved:
    """Flatten every nested network bottom-up, resolving default costs.

    The constant-efficiency default prices a distilled pair at the edge's
    use bound: ceil(max_uses * per_use_cost / capacity) milli-units, where
    per_use_cost is the lower network's minimum cost at its per-use target.
    """
    networks: list[HierarchicalNetwork] = []
    queue = [net]
    while queue:
        n = queue.pop()
        networks.append(n)
        for e in n.edges:
            queue.append(e.lower)

    flat: dict[int, NetworkGraph] = {}
    infos: dict[int, _EdgeInfo] = {}
    for n in sorted(networks, key=lambda n: n.level):
        if n.level == 0:
            flat[id(n)] = n.base
            continue
        flat_edges = []
        for e in n.edges:
            lower_flat = flat[id(e.lower)]
            theta = e.yield_fn.cap()
            target = e.lower_target
            if target is None:
                target = min_cut(lower_flat)
            lower_sol = min_cost_flow(lower_flat, target)
            per_use = lower_sol.total_cost
            if e.unit_cost is not None:
                pounds = e.unit_cost
            elif theta == 0:
                pounds = 0
            else:
                pounds = -((-e.yield_fn.max_uses * per_use) // theta)
            infos[id(e)] = _EdgeInfo(
                theta=theta,
                pounds=pounds,
                lower_flat=lower_flat,
                lower_target=target,
                per_use_cost=per_use,
                lower_solution=lower_sol,
                lower_generation=generation_error_budget(
                    lower_flat, lower_sol.active_edges
                ),
            )
            flat_edges.append(
                Edge(
                    e.a,
                    e.b,
                    capacity=theta,
                    unit_cost=pounds,
                    gen_error=e.distill_error,
                    max_uses=e.yield_fn.max_uses,
                )
            )
        flat[id(n)] = NetworkGraph(
            nodes=n.nodes,
            edges=tuple(flat_edges),
            source=n.clients[0],
            sink=n.clients[1],
        )
    return _Resolved(flat=flat, edges=infos)


def flatten(net: HierarchicalNetwork) -> NetworkGraph:
    """The equivalent flat network of a hierarchical one."""
    return _resolve(net).flat[id(net)]


def effective_min_cut(net: HierarchicalNetwork) -> int:
    """Capacity bound of the hierarchy: min-cut of the flattened network."""
    return min_cut(flatten(net))


@dataclass(frozen=True)
class AggregateResult:
    """Planning outcome for one hierarchy level.

    ``solution`` is the minimum-cost flow on the flattened network, so
    ``solution.undirected_flow`` gives distilled pairs per edge and
    ``solution.total_cost`` the level's cost. ``budget.generation`` sums
    the distillation targets of the active edges.
    """

    solution: FlowSolution
    budget: ErrorBudget
    flat: NetworkGraph

    @property
    def cost(self) -> int:
        return self.solution.total_cost


def aggregate_level(
    net: HierarchicalNetwork,
    target: int,
    *,
    swap_depolarize_p=0,
    operation_error: Fraction | None = None,
) -> AggregateResult:
    """Plan ``target`` end-to-end pairs across the top level of ``net``.

    The operation error defaults to zero for noiseless swapping; with a
    nonzero ``swap_depolarize_p`` it is computed exactly when the resulting
    schedule is small enough, and must be supplied otherwise.

    Raises:
        InfeasibleTarget, NegativeTarget: From the underlying flow solve.
        TooLarge: Noisy operation error requested beyond the exact regime.
    """
    flat = flatten(net)
    sol = min_cost_flow(flat, target)
    generation = generation_error_budget(flat, sol.active_edges)
    if operation_error is not None:
        operation = as_fraction(operation_error, "operation_error")
    else:
        p = as_fraction(swap_depolarize_p, "swap_depolarize_p")
        if p == 0:
            operation = Fraction(0)
        else:
            sched = build_swap_schedule(decompose_flow(sol))
            try:
                operation = exact_operation_error(
                    sched, NoiseModel(swap_depolarize_p=p)
                )
            except TooLarge as exc:
                raise TooLarge(
                    f"{exc}; supply operation_error explicitly for this size"
                ) from exc
    return AggregateResult(
        solution=sol, budget=ErrorBudget(generation=generation, operation=operation), flat=flat
    )


@dataclass(frozen=True)
class LowerUsePlan:
    """How often one active edge's lower network must run, recursively.

    ``uses`` is per parent-level run; ``total_uses`` multiplies the use
    counts down from the root plan.
    """

    edge: EdgeKey
    pairs: int
    uses: int
    per_use_target: int
    per_use_cost: int
    total_uses: int
    lower_error: Fraction
    sub: tuple["LowerUsePlan", ...]


def plan_lower_uses(
    net: HierarchicalNetwork, sol: FlowSolution
) -> tuple[LowerUsePlan, ...]:
    """Invert every active edge's yield into lower-network use counts.

    For each active edge the smallest use count whose yield covers the
    edge's pairs is chosen; deeper levels expand the same way under the
    multiplied use count. Edges with an ``error_threshold`` require the
    lower network's error budget to stay within it.

    Raises:
        YieldShortfall: An edge cannot reach its pairs within its use bound.
        ThresholdViolation: A lower network's error exceeds the threshold.
    """
    resolved = _resolve(net)
    created: list[dict] = []
    roots: list[dict] = []
    stack: list[tuple[HierarchicalNetwork, FlowSolution, int, list[dict]]] = [
        (net, sol, 1, roots)
    ]
    while stack:
        network, solution, multiplier, out = stack.pop()
        for key in sorted(solution.active_edges):
            edge = network.edge_by_key(key)
            info = resolved.edges[id(edge)]
            pairs = solution.undirected_flow[key]
            uses = edge.yield_fn.invert(pairs)
            lower_error = info.lower_generation
            if edge.error_threshold is not None and lower_error > edge.error_threshold:
                raise ThresholdViolation(
                    f"edge {key}: lower error {lower_error} exceeds "
                    f"threshold {edge.error_threshold}"
                )
            node = {
                "edge": key,
                "pairs": pairs,
                "uses": uses,
                "per_use_target": info.lower_target,
                "per_use_cost": info.per_use_cost,
                "total_uses": uses * multiplier,
                "lower_error": lower_error,
                "sub": [],
            }
            created.append(node)
            out.append(node)
            if edge.lower.level >= 1:
                stack.append(
                    (edge.lower, info.lower_solution, uses * multiplier, node["sub"])
                )
    frozen: dict[int, LowerUsePlan] = {}
    for node in reversed(created):
        frozen[id(node)] = LowerUsePlan(
            edge=node["edge"],
            pairs=node["pairs"],
            uses=node["uses"],
            per_use_target=node["per_use_target"],
            per_use_cost=node["per_use_cost"],
            total_uses=node["total_uses"],
            lower_error=node["lower_error"],
            sub=tuple(frozen[id(c)] for c in node["sub"]),
        )
    return tuple(frozen[id(n)] for n in roots)


def total_lower_cost(net: HierarchicalNetwork, sol: FlowSolution) -> int:
    """Cost of running the lower networks for every top-level active edge:
    use count times lower per-use cost, summed, in milli-units."""
    resolved = _resolve(net)
    total = 0
    for key in sorted(sol.active_edges):
        edge = net.edge_by_key(key)
        info = resolved.edges[id(edge)]
        uses = edge.yield_fn.invert(sol.undirected_flow[key])
        total += uses * info.per_use_cost
    return total


_LOWER_REQUIRED = frozenset({"network", "yield", "delta_target"})
_LOWER_OPTIONAL = frozenset({"max_uses", "cost", "target", "threshold"})


def _parse_lower(raw: Mapping, where: str) -> dict:
    if not isinstance(raw, Mapping):
        raise ParseError(f"{where}: lower must be an object")
    unknown = set(raw) - _LOWER_REQUIRED - _LOWER_OPTIONAL
    if unknown:
        raise ParseError(f"{where}: unknown lower fields {sorted(unknown)}")
    missing = _LOWER_REQUIRED - set(raw)
    if missing:
        raise ParseError(f"{where}: missing lower fields {sorted(missing)}")
    max_uses = raw.get("max_uses")
    if max_uses is not None and (not isinstance(max_uses, int) or max_uses < 0):
        raise ParseError(f"{where}: max_uses must be a non-negative integer")
    out = {
        "network": raw["network"],
        "yield_fn": parse_yield(raw["yield"], max_uses),
        "distill_error": as_fraction(raw["delta_target"], f"{where}.delta_target"),
        "unit_cost": None,
        "lower_target": None,
        "error_threshold": None,
    }
    if "cost" in raw:
        out["unit_cost"] = cost_to_milli(raw["cost"], f"{where}.cost")
    if "target" in raw:
        tgt = raw["target"]
        if not isinstance(tgt, int) or isinstance(tgt, bool) or tgt < 0:
            raise ParseError(f"{where}: target must be a non-negative integer")
        out["lower_target"] = tgt
    if "threshold" in raw:
        out["error_threshold"] = as_fraction(raw["threshold"], f"{where}.threshold")
    return out


def parse_hierarchical(doc: Mapping) -> HierarchicalNetwork:
    """Parse a hierarchical document; flat documents become level 0."""
    if not isinstance(doc, Mapping):
        raise ParseError("network document must be an object")
    edges = doc.get("edges")
    if not isinstance(edges, Sequence) or isinstance(edges, (str, bytes)):
        raise ParseError("edges: expected an array of edge objects")
    wrapped = [isinstance(e, Mapping) and "lower" in e for e in edges]
    if not any(wrapped):
        return HierarchicalNetwork.from_graph(parse_document(doc).graph)
    if not all(wrapped):
        raise ValidationError(
            "a network must be uniformly physical or uniformly wrapped; "
            "wrap single physical edges as two-node networks instead of mixing"
        )
    unknown = set(doc) - {"nodes", "edges", "source", "sink"}
    if unknown:
        raise ParseError(f"unknown fields {sorted(unknown)}")
    missing = {"nodes", "edges", "source", "sink"} - set(doc)
    if missing:
        raise ParseError(f"missing fields {sorted(missing)}")
    nodes = doc["nodes"]
    if not isinstance(nodes, Sequence) or isinstance(nodes, (str, bytes)):
        raise ParseError("nodes: expected an array of labels")
    hier_edges = []
    for i, entry in enumerate(edges):
        where = f"edges[{i}]"
        unknown = set(entry) - {"a", "b", "lower"}
        if unknown:
            raise ParseError(f"{where}: unknown fields {sorted(unknown)}")
        if {"a", "b", "lower"} - set(entry):
            raise ParseError(f"{where}: needs a, b and lower")
        a, b = entry["a"], entry["b"]
        if not isinstance(a, str) or not isinstance(b, str):
            raise ParseError(f"{where}: endpoints must be strings")
        fields = _parse_lower(entry["lower"], where)
        lower_net = parse_hierarchical(fields.pop("network"))
        hier_edges.append(HierEdge(a=a, b=b, lower=lower_net, **fields))
    source, sink = doc.get("source"), doc.get("sink")
    if not isinstance(source, str) or not isinstance(sink, str):
        raise ParseError("source and sink must be strings")
    levels = {e.lower.level for e in hier_edges}
    if len(levels) > 1:
        raise ValidationError(
            f"edges wrap networks of different levels {sorted(levels)}"
        )
    net = HierarchicalNetwork(
        level=hier_edges[0].lower.level + 1,
        nodes=tuple(nodes),
        edges=tuple(hier_edges),
        clients=(source, sink),
    )
    return net


def load_hierarchical(source: str | Path) -> HierarchicalNetwork:
    """Load a hierarchical network from a JSON file or JSON text."""
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
    return parse_hierarchical(doc)
