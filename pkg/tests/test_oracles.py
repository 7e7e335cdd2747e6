"""The oracles must agree with each other before they may judge the solvers."""

import random
from fractions import Fraction

from ebitflow import NetworkGraph, YieldFunction
from oracles import (
    cut_by_enumeration,
    min_cost_by_search,
    min_cost_joint_enumeration,
    smallest_uses_by_scan,
    random_network,
)


def test_signed_search_equals_joint_enumeration():
    rnd = random.Random(123)
    for _ in range(40):
        g = random_network(rnd, max_nodes=4, max_cap=2, max_cost_units=3, max_edges=4)
        cut = cut_by_enumeration(g)
        for target in range(cut + 2):
            assert min_cost_by_search(g, target) == min_cost_joint_enumeration(
                g, target
            ), (g, target)


def test_search_infeasible_returns_none():
    g = NetworkGraph.from_edge_list([("s", "t", 2, 1000)], "s", "t")
    assert min_cost_by_search(g, 3) is None
    assert min_cost_by_search(g, 2) == 2000


def test_search_handles_isolated_terminals():
    g = NetworkGraph.from_edge_list([], "s", "t", extra_nodes=["s", "t"])
    assert min_cost_by_search(g, 0) == 0
    assert min_cost_by_search(g, 1) is None


def test_cost_bound_prunes_but_preserves_below_bound():
    g = NetworkGraph.from_edge_list(
        [("s", "t", 1, 2000), ("r", "s", 1, 3000), ("r", "t", 1, 3000)], "s", "t"
    )
    assert min_cost_by_search(g, 1, cost_bound=2001) == 2000
    assert min_cost_by_search(g, 1, cost_bound=2000) is None


def test_scan_oracle_basics():
    yf = YieldFunction.identity(10)
    assert smallest_uses_by_scan(yf, 4) == 4
    assert smallest_uses_by_scan(yf, 0) == 0
    assert smallest_uses_by_scan(yf, 11) is None
    half = YieldFunction.linear_floor(Fraction(1, 2), 20)
    assert smallest_uses_by_scan(half, 3) == 6
