import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ebitflow import (
    Edge,
    NetworkGraph,
    ParseError,
    ValidationError,
    as_fraction,
    build_graph,
    cost_to_milli,
    edge_key,
    induce_digraph,
    load_network,
    min_cut,
    parse_document,
    undirected_max_flow,
)
from oracles import cut_by_enumeration, random_network


def single(cap=5, cost=1000):
    return NetworkGraph.from_edge_list([("s", "t", cap, cost)], "s", "t")


CHAIN = NetworkGraph.from_edge_list(
    [("r", "s", 3, 1000), ("r", "t", 2, 1000)], "s", "t"
)
DIAMOND = NetworkGraph.from_edge_list(
    [
        ("a", "s", 1, 1000),
        ("a", "t", 1, 1000),
        ("b", "s", 1, 1000),
        ("b", "t", 1, 1000),
    ],
    "s",
    "t",
)


class TestEdge:
    def test_endpoints_sorted(self):
        e = Edge("z", "a", 1, 0)
        assert (e.a, e.b) == ("a", "z")
        assert e.key == ("a", "z")
        assert e.other("a") == "z"

    def test_self_loop_rejected(self):
        with pytest.raises(ValidationError):
            Edge("s", "s", 1, 0)

    def test_negative_capacity_rejected(self):
        with pytest.raises(ValidationError):
            Edge("a", "b", -1, 0)

    def test_negative_cost_rejected(self):
        with pytest.raises(ValidationError):
            Edge("a", "b", 1, -5)

    def test_gen_error_range(self):
        Edge("a", "b", 1, 0, Fraction(1))
        with pytest.raises(ValidationError):
            Edge("a", "b", 1, 0, Fraction(11, 10))

    def test_max_uses_positive(self):
        with pytest.raises(ValidationError):
            Edge("a", "b", 1, 0, 0, 0)


class TestUnits:
    def test_cost_scaling_exact(self):
        assert cost_to_milli(1) == 1000
        assert cost_to_milli(0.001) == 1
        assert cost_to_milli("3/2") == 1500

    def test_cost_below_milli_rejected(self):
        with pytest.raises(ValidationError):
            cost_to_milli(0.0001)
        with pytest.raises(ValidationError):
            cost_to_milli("1/3")

    def test_negative_cost_rejected(self):
        with pytest.raises(ValidationError):
            cost_to_milli(-1)

    def test_fraction_parsing(self):
        assert as_fraction("2/3") == Fraction(2, 3)
        assert as_fraction(0.001) == Fraction(1, 1000)
        with pytest.raises(ParseError):
            as_fraction(True)
        with pytest.raises(ParseError):
            as_fraction("abc")


MINIMAL_DOC = {
    "nodes": ["s", "t"],
    "edges": [{"a": "s", "b": "t", "capacity": 5, "cost": 1}],
    "source": "s",
    "sink": "t",
}


class TestParsing:
    def test_minimal_document(self):
        g = build_graph(MINIMAL_DOC)
        assert len(g.nodes) == 2
        assert len(g.edges) == 1
        assert g.edges[0].capacity == 5
        assert g.edges[0].unit_cost == 1000

    def test_self_loop_rejected(self):
        doc = {
            "nodes": ["s", "t"],
            "edges": [{"a": "s", "b": "s", "capacity": 1, "cost": 0}],
            "source": "s",
            "sink": "t",
        }
        with pytest.raises(ValidationError):
            build_graph(doc)

    def test_six_node_eight_edge_fixture(self):
        nodes = ["s", "u", "v", "w", "x", "t"]
        links = [
            ("s", "u"), ("s", "v"), ("u", "v"), ("u", "w"),
            ("v", "x"), ("w", "x"), ("w", "t"), ("x", "t"),
        ]
        doc = {
            "nodes": nodes,
            "edges": [
                {"a": a, "b": b, "capacity": 2, "cost": 1} for a, b in links
            ],
            "source": "s",
            "sink": "t",
        }
        g = build_graph(doc)
        assert len(g.nodes) == 6
        assert len(g.edges) == 8

    def test_unknown_fields_rejected(self):
        doc = dict(MINIMAL_DOC, extra=1)
        with pytest.raises(ParseError):
            build_graph(doc)
        doc = dict(MINIMAL_DOC)
        doc["edges"] = [dict(doc["edges"][0], weird=2)]
        with pytest.raises(ParseError):
            build_graph(doc)

    def test_missing_fields_rejected(self):
        doc = {k: v for k, v in MINIMAL_DOC.items() if k != "sink"}
        with pytest.raises(ParseError):
            build_graph(doc)

    def test_unknown_endpoint_rejected(self):
        doc = dict(MINIMAL_DOC)
        doc["edges"] = [{"a": "s", "b": "q", "capacity": 1, "cost": 0}]
        with pytest.raises(ValidationError):
            build_graph(doc)

    def test_source_equals_sink_rejected(self):
        doc = dict(MINIMAL_DOC, sink="s")
        with pytest.raises(ValidationError):
            build_graph(doc)

    def test_parallel_entries_merge(self):
        doc = {
            "nodes": ["s", "t"],
            "edges": [
                {"a": "s", "b": "t", "capacity": 2, "cost": 1, "max_uses": 4},
                {"a": "t", "b": "s", "capacity": 3, "cost": 1, "max_uses": 5},
            ],
            "source": "s",
            "sink": "t",
        }
        g = build_graph(doc)
        assert len(g.edges) == 1
        assert g.edges[0].capacity == 5
        assert g.edges[0].max_uses == 9

    def test_parallel_cost_mismatch_rejected(self):
        doc = {
            "nodes": ["s", "t"],
            "edges": [
                {"a": "s", "b": "t", "capacity": 2, "cost": 1},
                {"a": "s", "b": "t", "capacity": 3, "cost": 2},
            ],
            "source": "s",
            "sink": "t",
        }
        with pytest.raises(ValidationError):
            build_graph(doc)

    def test_parallel_delta_mismatch_rejected(self):
        doc = {
            "nodes": ["s", "t"],
            "edges": [
                {"a": "s", "b": "t", "capacity": 2, "cost": 1, "delta": 0.01},
                {"a": "s", "b": "t", "capacity": 3, "cost": 1, "delta": 0.02},
            ],
            "source": "s",
            "sink": "t",
        }
        with pytest.raises(ValidationError):
            build_graph(doc)

    def test_delta_parsed_exactly(self):
        doc = dict(MINIMAL_DOC)
        doc["edges"] = [dict(doc["edges"][0], delta=0.001)]
        g = build_graph(doc)
        assert g.edges[0].gen_error == Fraction(1, 1000)

    def test_delta_default_applied(self):
        docu = parse_document(MINIMAL_DOC, default_gen_error=Fraction(1, 50))
        assert docu.graph.edges[0].gen_error == Fraction(1, 50)

    def test_load_network_from_text_and_file(self, tmp_path):
        text = json.dumps(MINIMAL_DOC)
        assert load_network(text).graph == build_graph(MINIMAL_DOC)
        f = tmp_path / "net.json"
        f.write_text(text)
        assert load_network(f).graph == build_graph(MINIMAL_DOC)

    def test_invalid_json_rejected(self):
        with pytest.raises(ParseError):
            load_network("{not json")

    def test_annotations_collected(self):
        doc = dict(MINIMAL_DOC)
        doc["edges"] = [
            dict(
                doc["edges"][0],
                channel={"kind": "explicit", "Q": 1, "rate": 1},
                **{"yield": {"kind": "identity"}},
            )
        ]
        docu = parse_document(doc)
        key = edge_key("s", "t")
        assert docu.channels[key]["kind"] == "explicit"
        assert docu.yields[key]["kind"] == "identity"


class TestDigraph:
    def test_single_edge(self):
        d = induce_digraph(single())
        assert set(d.arcs) == {("s", "t"), ("t", "s")}

    def test_path_has_four_arcs(self):
        assert len(induce_digraph(CHAIN).arcs) == 4

    def test_empty_edges(self):
        g = NetworkGraph.from_edge_list([], "s", "t", extra_nodes=["s", "t"])
        assert induce_digraph(g).arcs == ()

    def test_forgetting_orientation_recovers_edges(self):
        d = induce_digraph(DIAMOND)
        undirected = {edge_key(a, b) for a, b in d.arcs}
        assert undirected == set(DIAMOND.edge_map)
        assert len(d.arcs) == 2 * len(DIAMOND.edges)


class TestMinCut:
    def test_single_edge(self):
        assert min_cut(single(5)) == 5

    def test_chain(self):
        assert min_cut(CHAIN) == 2

    def test_diamond(self):
        assert min_cut(DIAMOND) == 2

    def test_disconnected_is_zero(self):
        g = NetworkGraph.from_edge_list([], "s", "t", extra_nodes=["s", "t"])
        assert min_cut(g) == 0

    def test_zero_capacity_edge_disconnects(self):
        g = single(0)
        assert min_cut(g) == 0

    def test_matches_enumeration_small_corpus(self):
        rnd = random.Random(7)
        for _ in range(60):
            g = random_network(rnd, max_nodes=7, max_cap=4)
            assert min_cut(g) == cut_by_enumeration(g)

    def test_monotone_in_capacity(self):
        rnd = random.Random(8)
        for _ in range(20):
            g = random_network(rnd, max_nodes=6, max_cap=3)
            if not g.edges:
                continue
            base = min_cut(g)
            bumped = list(g.edges)
            i = rnd.randrange(len(bumped))
            e = bumped[i]
            bumped[i] = Edge(e.a, e.b, e.capacity + 2, e.unit_cost)
            g2 = NetworkGraph.from_edge_list(
                bumped, g.source, g.sink, extra_nodes=g.nodes
            )
            assert min_cut(g2) >= base

    def test_zero_iff_disconnected(self):
        rnd = random.Random(9)
        for _ in range(40):
            g = random_network(rnd, max_nodes=6, max_cap=2)
            positive = [e for e in g.edges if e.capacity > 0]
            seen = {g.source}
            frontier = [g.source]
            while frontier:
                u = frontier.pop()
                for e in positive:
                    if u in (e.a, e.b):
                        v = e.other(u)
                        if v not in seen:
                            seen.add(v)
                            frontier.append(v)
            assert (min_cut(g) == 0) == (g.sink not in seen)


@st.composite
def small_graphs(draw):
    n = draw(st.integers(2, 6))
    labels = [f"n{i}" for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if draw(st.booleans()):
                cap = draw(st.integers(0, 4))
                cost = draw(st.integers(0, 4)) * 1000
                edges.append((labels[i], labels[j], cap, cost))
    return NetworkGraph.from_edge_list(edges, labels[0], labels[1], extra_nodes=labels)


class TestMinCutProperties:
    @given(small_graphs())
    def test_equals_enumeration(self, g):
        assert min_cut(g) == cut_by_enumeration(g)

    @given(small_graphs())
    def test_max_flow_value_matches(self, g):
        triples = [(e.a, e.b, e.capacity) for e in g.edges]
        flow = undirected_max_flow(g.nodes, triples, g.source, g.sink)
        assert flow == min_cut(g)
