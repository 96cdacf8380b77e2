import json

import numpy as np
import pytest

from ramseyopt.chain import QubitRole, Target, build_chain_protocol
from ramseyopt.errors import DomainError, ParseError
from ramseyopt.tiler import (
    CouplingGraph, Exhaustive, Greedy, TilingPlan, grid_graph,
    heavy_hex_graph, load_graph, path_graph, star_graph, tile, validate_plan)


def omega_round_count(plan):
    return sum(1 for e in plan.experiments
               if any(t.kind == "omega" for t in e.targets))


@pytest.mark.parametrize("n", [2, 3, 7, 20])
def test_path_needs_four_experiments(n):
    graph = path_graph(n)
    plan = tile(graph)
    assert len(plan.experiments) == 4
    assert validate_plan(graph, plan) == []


def test_single_edge_matches_chain_schedule():
    plan = tile(path_graph(2))
    assert plan.experiments == tuple(build_chain_protocol(2))


@pytest.mark.parametrize("distance", [1, 2, 3])
def test_heavy_hex_needs_four_experiments(distance):
    graph = heavy_hex_graph(distance)
    assert max(len(a) for a in graph.adjacency) <= 3
    plan = tile(graph)
    assert len(plan.experiments) == 4
    assert validate_plan(graph, plan) == []


def test_heavy_hex_smallest_instance():
    graph = heavy_hex_graph(1)
    # one hexagonal cell with every edge subdivided: a 12-cycle
    assert graph.n_vertices == 12
    assert sorted(len(a) for a in graph.adjacency) == [2] * 12
    assert omega_round_count(tile(graph)) == 2


def test_star_shares_the_hub():
    graph = star_graph(4)
    plan = tile(graph)
    assert len(plan.experiments) == 3
    assert validate_plan(graph, plan) == []
    j_exps = [e for e in plan.experiments
              if any(t.kind == "J" for t in e.targets)]
    assert len(j_exps) == 1
    roles = j_exps[0].roles
    assert roles[0] is QubitRole.One
    assert all(roles[i] is QubitRole.Ramsey for i in range(1, 5))
    assert len(j_exps[0].targets) == 4


def _small_graphs():
    yield path_graph(2)
    yield path_graph(4)
    yield star_graph(4)
    yield grid_graph(2, 3)
    yield CouplingGraph(5, ((0, 1), (1, 2), (2, 3), (3, 4), (4, 0)))
    yield CouplingGraph(5, ((0, 1), (1, 2), (0, 2), (2, 3), (3, 4)))


def test_exhaustive_never_needs_more_rounds():
    for graph in _small_graphs():
        greedy = tile(graph, Greedy())
        exact = tile(graph, Exhaustive())
        assert len(exact.experiments) <= len(greedy.experiments)
        assert validate_plan(graph, exact) == []


def test_exhaustive_improves_on_greedy_somewhere():
    graph = CouplingGraph(5, ((0, 1), (1, 2), (0, 2), (2, 3), (3, 4)))
    assert len(tile(graph, Exhaustive()).experiments) \
        < len(tile(graph, Greedy()).experiments)


def test_tiny_node_limit_falls_back_to_greedy():
    graph = grid_graph(3, 3)
    with pytest.warns(RuntimeWarning, match="node limit"):
        capped = tile(graph, Exhaustive(node_limit=10))
    assert capped == tile(graph)


def test_random_graphs_validate_clean():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 21))
        edges = tuple((a, b) for a in range(n) for b in range(a + 1, n)
                      if rng.random() < 0.2)
        graph = CouplingGraph(n, edges)
        plan = tile(graph)
        assert validate_plan(graph, plan) == []
        covered = set(plan.coverage)
        assert all(("omega", v) in covered for v in range(n))
        assert all(("J", a, b) in covered for a, b in graph.edges)


def test_bipartite_graphs_use_two_frequency_rounds():
    for graph in (path_graph(6), grid_graph(3, 4), heavy_hex_graph(2),
                  star_graph(5),
                  CouplingGraph(6, ((0, 1), (1, 2), (2, 3), (3, 4), (4, 5),
                                    (5, 0)))):
        assert omega_round_count(tile(graph)) == 2


def test_tiling_is_deterministic():
    graph = grid_graph(3, 3)
    assert tile(graph) == tile(graph)
    assert tile(graph, Exhaustive()) == tile(graph, Exhaustive())


def test_unknown_effort_rejected():
    with pytest.raises(DomainError):
        tile(path_graph(3), effort="fast")


def test_validator_names_every_defect():
    graph = path_graph(4)
    good = tile(graph)

    def swap_roles(exp_idx, roles):
        exps = list(good.experiments)
        exps[exp_idx] = type(exps[exp_idx])(tuple(roles),
                                            exps[exp_idx].targets)
        return TilingPlan(tuple(exps), good.coverage)

    R, O, Z = QubitRole.Ramsey, QubitRole.One, QubitRole.Zero
    adjacent = swap_roles(0, (R, R, R, Z))
    assert any("adjacent" in v for v in validate_plan(graph, adjacent))

    crowded = swap_roles(2, (O, R, O, Z))
    assert any("|1> neighbors" in v for v in validate_plan(graph, crowded))

    dropped = TilingPlan(good.experiments[:-1], good.coverage)
    messages = validate_plan(graph, dropped)
    assert any("never measured" in v for v in messages)

    stray = TilingPlan(
        good.experiments
        + (type(good.experiments[0])((Z, R, Z, Z),
                                     (Target(1, "J", (1, 2)),)),),
        good.coverage)
    assert any("far end" in v for v in validate_plan(graph, stray))

    phantom = TilingPlan(
        good.experiments
        + (type(good.experiments[0])((R, Z, Z, O),
                                     (Target(0, "J", (0, 3)),)),),
        good.coverage)
    assert any("not in graph" in v for v in validate_plan(graph, phantom))


def test_graph_validation():
    with pytest.raises(DomainError, match="self-loop"):
        CouplingGraph(3, ((0, 0),))
    with pytest.raises(DomainError, match="duplicate"):
        CouplingGraph(3, ((0, 1), (1, 0)))
    with pytest.raises(DomainError, match="out of range"):
        CouplingGraph(3, ((0, 3),))
    graph = CouplingGraph(3, ((1, 0), (2, 1)))
    assert graph.edges == ((0, 1), (1, 2))


def test_load_graph_round_trip_and_errors():
    graph = grid_graph(2, 2)
    again = load_graph(json.dumps(graph.to_json()))
    assert again == graph
    with pytest.raises(ParseError):
        load_graph("{not json")
    with pytest.raises(ParseError, match="keys"):
        load_graph('{"n": 3}')
    with pytest.raises(ParseError, match="pairs"):
        load_graph('{"n": 3, "edges": [[0, 1, 2]]}')
    with pytest.raises(ParseError, match="self-loop"):
        load_graph('{"n": 3, "edges": [[1, 1]]}')


def test_generators():
    assert path_graph(4).edges == ((0, 1), (1, 2), (2, 3))
    grid = grid_graph(2, 2)
    assert grid.n_vertices == 4 and len(grid.edges) == 4
    star = star_graph(3)
    assert len(star.adjacency[0]) == 3
    with pytest.raises(DomainError):
        path_graph(0)
    with pytest.raises(DomainError):
        heavy_hex_graph(0)
    hh = heavy_hex_graph(2)
    assert max(len(a) for a in hh.adjacency) == 3


def test_plan_json_format():
    plan = tile(path_graph(3))
    blob = plan.to_json()
    assert {e["roles"][0] for e in blob["experiments"]} <= {"R", "0", "1"}
    assert blob["coverage"]["omega:0"] in range(4)
    assert blob["coverage"]["J:0:1"] in range(4)
