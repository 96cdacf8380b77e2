"""Role-assignment scheduling on arbitrary coupling graphs.

Every vertex frequency needs one experiment with the vertex probed and all
neighbors in |0>; every edge coupling needs one with exactly one endpoint
probed and the other in |1>. tile() packs these into few experiments:
frequencies by independent-set covers (a two-coloring when the graph is
bipartite), couplings by either a conflict-coloring construction (bipartite)
or a descending-degree greedy, whichever needs fewer rounds. The exhaustive
mode branch-and-bounds each phase to a true minimum, with the greedy plan as
incumbent and fallback.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

from .chain import ExperimentConfig, QubitRole, Target, build_chain_protocol
from .errors import DomainError, ParseError

R, ONE, ZERO = QubitRole.Ramsey, QubitRole.One, QubitRole.Zero


@dataclass(frozen=True)
class CouplingGraph:
    n_vertices: int
    edges: tuple
    layout: dict | None = None

    def __post_init__(self):
        norm = []
        seen = set()
        for e in self.edges:
            a, b = int(e[0]), int(e[1])
            if a == b:
                raise DomainError(f"self-loop at vertex {a}")
            if not (0 <= a < self.n_vertices and 0 <= b < self.n_vertices):
                raise DomainError(f"edge ({a}, {b}) out of range")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise DomainError(f"duplicate edge {key}")
            seen.add(key)
            norm.append(key)
        object.__setattr__(self, "edges", tuple(sorted(norm)))
        if self.n_vertices < 1:
            raise DomainError("graph needs at least one vertex")

    @property
    def adjacency(self):
        adj = [[] for _ in range(self.n_vertices)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return [tuple(sorted(nbrs)) for nbrs in adj]

    def to_json(self) -> dict:
        return {"n": self.n_vertices, "edges": [list(e) for e in self.edges]}


def load_graph(text: str) -> CouplingGraph:
    """Parse the JSON graph format {"n": int, "edges": [[a, b], ...]}."""
    try:
        blob = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"graph is not valid JSON: {err.msg}",
                         line=err.lineno) from None
    if not isinstance(blob, dict) or "n" not in blob or "edges" not in blob:
        raise ParseError("graph JSON needs keys 'n' and 'edges'")
    try:
        edges = tuple((int(a), int(b)) for a, b in blob["edges"])
        return CouplingGraph(int(blob["n"]), edges)
    except DomainError as err:
        raise ParseError(str(err)) from None
    except (TypeError, ValueError):
        raise ParseError("edges must be pairs of integers") from None


# ---------------------------------------------------------------------------
# generators

def path_graph(n: int) -> CouplingGraph:
    if n < 1:
        raise DomainError("path needs at least one vertex")
    return CouplingGraph(n, tuple((i, i + 1) for i in range(n - 1)))


def grid_graph(width: int, height: int) -> CouplingGraph:
    if width < 1 or height < 1:
        raise DomainError("grid needs positive dimensions")
    def vid(r, c):
        return r * width + c
    edges = []
    for r in range(height):
        for c in range(width):
            if c + 1 < width:
                edges.append((vid(r, c), vid(r, c + 1)))
            if r + 1 < height:
                edges.append((vid(r, c), vid(r + 1, c)))
    return CouplingGraph(width * height, tuple(edges))


def star_graph(n_leaves: int) -> CouplingGraph:
    if n_leaves < 1:
        raise DomainError("star needs at least one leaf")
    return CouplingGraph(n_leaves + 1, tuple((0, i + 1) for i in range(n_leaves)))


def heavy_hex_graph(distance: int) -> CouplingGraph:
    """Hexagonal brick-wall lattice of the given size with every coupling
    routed through an extra qubit (edge subdivision). Bipartite, degree <= 3."""
    if distance < 1:
        raise DomainError("heavy-hex distance must be >= 1")
    rows, cols = distance + 1, 2 * distance + 1
    def vid(r, c):
        return r * cols + c
    base_edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                base_edges.append((vid(r, c), vid(r, c + 1)))
            if r + 1 < rows and (r + c) % 2 == 0:
                base_edges.append((vid(r, c), vid(r + 1, c)))
    n = rows * cols
    edges = []
    for a, b in sorted(base_edges):
        mid = n
        n += 1
        edges.append((a, mid))
        edges.append((mid, b))
    return CouplingGraph(n, tuple(edges))


# ---------------------------------------------------------------------------
# plans

@dataclass(frozen=True)
class TilingPlan:
    experiments: tuple
    coverage: dict   # ("omega", v) or ("J", a, b) -> experiment index

    def to_json(self) -> dict:
        return {
            "experiments": [e.to_json() for e in self.experiments],
            "coverage": {":".join(str(p) for p in key): idx
                         for key, idx in sorted(self.coverage.items(),
                                                key=lambda kv: str(kv[0]))},
        }


@dataclass(frozen=True)
class Greedy:
    pass


@dataclass(frozen=True)
class Exhaustive:
    node_limit: int = 10**6


def _bipartition(n, adj):
    """BFS two-coloring; None when an odd cycle exists."""
    color = [-1] * n
    for root in range(n):
        if color[root] != -1:
            continue
        color[root] = 0
        queue = [root]
        while queue:
            v = queue.pop(0)
            for u in adj[v]:
                if color[u] == -1:
                    color[u] = 1 - color[v]
                    queue.append(u)
                elif color[u] == color[v]:
                    return None
    return color


def _degree_order(n, adj):
    return sorted(range(n), key=lambda v: (-len(adj[v]), v))


def _omega_experiment(n, active):
    roles = [ZERO] * n
    for v in active:
        roles[v] = R
    targets = tuple(Target(v, "omega") for v in sorted(active))
    return ExperimentConfig(tuple(roles), targets)


def _omega_phase_greedy(graph: CouplingGraph):
    """Cover all vertices by independent sets. Two-coloring when possible,
    otherwise greedy maximal-independent-set peeling."""
    n, adj = graph.n_vertices, graph.adjacency
    color = _bipartition(n, adj)
    if color is not None:
        sides = [[v for v in range(n) if color[v] == s] for s in (0, 1)]
        return [_omega_experiment(n, side) for side in sides if side]
    experiments = []
    uncovered = set(range(n))
    order = _degree_order(n, adj)
    while uncovered:
        chosen = []
        taken = set()
        for v in order:
            if v in uncovered and v not in taken:
                chosen.append(v)
                taken.add(v)
                taken.update(adj[v])
        experiments.append(_omega_experiment(n, chosen))
        uncovered -= set(chosen)
    return experiments


def _materialize_j_experiment(n, adj, pairs):
    """Roles and targets from (ramsey, one) pairs; spectators default |0>."""
    roles = [ZERO] * n
    for rv, ov in pairs:
        roles[ov] = ONE
    for rv, ov in pairs:
        roles[rv] = R
    targets = tuple(Target(rv, "J", (min(rv, ov), max(rv, ov)))
                    for rv, ov in sorted(pairs))
    return ExperimentConfig(tuple(roles), targets)


def _pair_fits(adj, pairs, rv, ov):
    """Can (rv Ramsey, ov One) join the experiment described by pairs?"""
    rset = {p[0] for p in pairs}
    oset = {p[1] for p in pairs}
    if rv in rset or rv in oset or ov in rset:
        return False
    for w in adj[rv]:
        if w in rset:
            return False                 # adjacent probed qubits
        if w != ov and w in oset:
            return False                 # second |1> neighbor
    for r, u in pairs:
        if u != ov and ov in adj[r]:
            return False                 # existing probe gains a second |1>
    return True


def _j_phase_greedy(graph: CouplingGraph):
    """Descending-degree greedy: each round, probed vertices pick one
    uncovered incident edge whose far end goes to |1>."""
    n, adj = graph.n_vertices, graph.adjacency
    uncovered = set(graph.edges)
    order = _degree_order(n, adj)
    experiments = []
    while uncovered:
        pairs = []
        for v in order:
            for u in adj[v]:
                key = (min(v, u), max(v, u))
                if key in uncovered and _pair_fits(adj, pairs, v, u):
                    pairs.append((v, u))
                    uncovered.discard(key)
                    break
        if not pairs:
            a, b = sorted(uncovered)[0]
            pairs = [(a, b)]
            uncovered.discard((a, b))
        experiments.append(_materialize_j_experiment(n, adj, pairs))
    return experiments


def _conflict_classes(members, adj):
    """Color the conflict graph (sharing a neighbor) on the given side."""
    members = sorted(members)
    index = {v: i for i, v in enumerate(members)}
    cadj = [set() for _ in members]
    neighbor_of = {}
    for i, v in enumerate(members):
        for w in adj[v]:
            for u in adj[w]:
                if u != v and u in index:
                    cadj[i].add(index[u])
    cadj = [tuple(sorted(s)) for s in cadj]
    color = _bipartition(len(members), cadj)
    if color is None:
        color = [-1] * len(members)
        for i in sorted(range(len(members)),
                        key=lambda i: (-len(cadj[i]), i)):
            used = {color[j] for j in cadj[i] if color[j] != -1}
            c = 0
            while c in used:
                c += 1
            color[i] = c
    classes = {}
    for i, v in enumerate(members):
        classes.setdefault(color[i], []).append(v)
    return [classes[c] for c in sorted(classes)]


def _j_phase_side_coloring(graph: CouplingGraph, color):
    """Bipartite graphs only: pick one side as the |1> pool; two pool
    vertices sharing a probe must land in different rounds, so the round
    count is a coloring of that conflict graph. Every edge is covered from
    its non-pool side in the pool vertex's round."""
    n, adj = graph.n_vertices, graph.adjacency
    best = None
    for side in (0, 1):
        members = [v for v in range(n) if color[v] == side and adj[v]]
        if not members:
            continue
        experiments = []
        for cls in _conflict_classes(members, adj):
            pairs = []
            for ov in cls:
                for rv in adj[ov]:
                    pairs.append((rv, ov))
            if pairs:
                experiments.append(_materialize_j_experiment(n, adj, pairs))
        if best is None or len(experiments) < len(best):
            best = experiments
    return best


def _is_path(graph: CouplingGraph):
    """Connected, acyclic, max degree 2: vertex order along the path."""
    n, adj = graph.n_vertices, graph.adjacency
    if n < 2 or len(graph.edges) != n - 1:
        return None
    degs = [len(a) for a in adj]
    if max(degs) > 2 or degs.count(1) != 2:
        return None
    start = degs.index(1)
    order = [start]
    prev = -1
    while len(order) < n:
        nxt = [u for u in adj[order[-1]] if u != prev]
        if not nxt:
            return None
        prev = order[-1]
        order.append(nxt[0])
    return order


def _plan_from_experiments(experiments):
    coverage = {}
    for idx, exp in enumerate(experiments):
        for t in exp.targets:
            key = ("omega", t.qubit) if t.kind == "omega" else ("J", *t.edge)
            coverage.setdefault(key, idx)
    return TilingPlan(tuple(experiments), coverage)


def _greedy_plan(graph: CouplingGraph) -> TilingPlan:
    order = _is_path(graph)
    if order is not None:
        # chains keep their four-experiment schedule
        relabel = {i: v for i, v in enumerate(order)}
        experiments = []
        for cfg in build_chain_protocol(graph.n_vertices):
            roles = [ZERO] * graph.n_vertices
            for i, role in enumerate(cfg.roles):
                roles[relabel[i]] = role
            targets = tuple(
                Target(relabel[t.qubit], t.kind,
                       None if t.edge is None else
                       tuple(sorted(relabel[q] for q in t.edge)))
                for t in cfg.targets)
            experiments.append(ExperimentConfig(tuple(roles), targets))
        return _plan_from_experiments(experiments)

    omega_exps = _omega_phase_greedy(graph)
    j_greedy = _j_phase_greedy(graph) if graph.edges else []
    color = _bipartition(graph.n_vertices, graph.adjacency)
    if color is not None and graph.edges:
        j_colored = _j_phase_side_coloring(graph, color)
        if j_colored is not None and len(j_colored) < len(j_greedy):
            j_greedy = j_colored
    return _plan_from_experiments(omega_exps + j_greedy)


# ---------------------------------------------------------------------------
# exhaustive search

class _NodeBudget:
    def __init__(self, limit):
        self.left = limit

    def spend(self):
        self.left -= 1
        if self.left < 0:
            raise _OutOfNodes


class _OutOfNodes(Exception):
    pass


def _min_coloring(n, adj, upper, budget):
    """Smallest k such that vertices split into k independent sets."""
    order = _degree_order(n, adj)
    for k in range(1, upper):
        colors = {}

        def assign(i, used):
            budget.spend()
            if i == len(order):
                return True
            v = order[i]
            taken = {colors[u] for u in adj[v] if u in colors}
            for c in range(min(used + 1, k)):
                if c in taken:
                    continue
                colors[v] = c
                if assign(i + 1, max(used, c + 1)):
                    return True
                del colors[v]
            return False

        if assign(0, 0):
            groups = {}
            for v, c in colors.items():
                groups.setdefault(c, []).append(v)
            return [groups[c] for c in sorted(groups)]
    return None


def _min_j_cover(graph: CouplingGraph, upper, budget):
    """Branch and bound: assign each edge an (experiment, orientation) so
    every experiment is a valid one-hot pattern, minimizing experiments."""
    adj = graph.adjacency
    edges = list(graph.edges)
    best_pairs = None
    state = []

    def recurse(idx):
        nonlocal best_pairs
        budget.spend()
        if len(state) >= (upper if best_pairs is None else len(best_pairs)):
            return
        if idx == len(edges):
            best_pairs = [list(cls) for cls in state]
            return
        a, b = edges[idx]
        for ci in range(len(state) + 1):
            if ci == len(state):
                state.append([])
            for rv, ov in ((a, b), (b, a)):
                if _pair_fits(adj, state[ci], rv, ov):
                    state[ci].append((rv, ov))
                    recurse(idx + 1)
                    state[ci].pop()
            if ci == len(state) - 1 and not state[ci]:
                state.pop()

    recurse(0)
    return best_pairs


def tile(graph: CouplingGraph, effort=Greedy()) -> TilingPlan:
    """Schedule experiments measuring every vertex frequency and every
    coupling. Exhaustive effort searches phase-separated plans (frequency
    rounds, then coupling rounds) to a true per-phase minimum within its
    node limit, keeping the greedy plan when the search is cut short or
    ties it."""
    greedy = _greedy_plan(graph)
    if isinstance(effort, Greedy):
        return greedy
    if not isinstance(effort, Exhaustive):
        raise DomainError(f"unknown effort {effort!r}")

    budget = _NodeBudget(effort.node_limit)
    n, adj = graph.n_vertices, graph.adjacency
    greedy_omega = sum(1 for e in greedy.experiments
                       if any(t.kind == "omega" for t in e.targets))
    greedy_j = len(greedy.experiments) - greedy_omega
    try:
        groups = _min_coloring(n, adj, greedy_omega + 1, budget)
        pair_classes = _min_j_cover(graph, greedy_j + 1, budget) \
            if graph.edges else []
    except _OutOfNodes:
        warnings.warn("exhaustive search hit its node limit; keeping the "
                      "greedy plan", RuntimeWarning, stacklevel=2)
        return greedy
    experiments = [_omega_experiment(n, g) for g in groups or []]
    for cls in pair_classes or []:
        experiments.append(_materialize_j_experiment(n, adj, cls))
    if groups is None or pair_classes is None:
        return greedy
    exact = _plan_from_experiments(experiments)
    return exact if len(exact.experiments) < len(greedy.experiments) else greedy


# ---------------------------------------------------------------------------
# validation

def validate_plan(graph: CouplingGraph, plan: TilingPlan):
    """All broken rules, one message each; empty list means the plan holds."""
    n, adj = graph.n_vertices, graph.adjacency
    violations = []
    edge_set = set(graph.edges)
    for idx, exp in enumerate(plan.experiments):
        if len(exp.roles) != n:
            violations.append(f"experiment {idx}: {len(exp.roles)} roles for "
                              f"{n} vertices")
            continue
        for v, role in enumerate(exp.roles):
            if role is not R:
                continue
            for u in adj[v]:
                if u > v and exp.roles[u] is R:
                    violations.append(
                        f"experiment {idx}: adjacent probed vertices {v}-{u}")
            ones = [u for u in adj[v] if exp.roles[u] is ONE]
            if len(ones) > 1:
                violations.append(
                    f"experiment {idx}: vertex {v} has {len(ones)} |1> neighbors")
        for t in exp.targets:
            if exp.roles[t.qubit] is not R:
                violations.append(
                    f"experiment {idx}: target on unprobed vertex {t.qubit}")
            elif t.kind == "J":
                if t.edge not in edge_set:
                    violations.append(
                        f"experiment {idx}: target edge {t.edge} not in graph")
                else:
                    far = t.edge[0] if t.edge[1] == t.qubit else t.edge[1]
                    if exp.roles[far] is not ONE:
                        violations.append(
                            f"experiment {idx}: edge {t.edge} far end not |1>")
    for v in range(n):
        key = ("omega", v)
        if not _covered(plan, key):
            violations.append(f"vertex {v} frequency never measured")
    for e in graph.edges:
        if not _covered(plan, ("J", *e)):
            violations.append(f"edge {e} coupling never measured")
    return violations


def _covered(plan: TilingPlan, key):
    idx = plan.coverage.get(key)
    if idx is None or not 0 <= idx < len(plan.experiments):
        return False
    exp = plan.experiments[idx]
    for t in exp.targets:
        tkey = ("omega", t.qubit) if t.kind == "omega" else ("J", *t.edge)
        if tkey == key:
            return True
    return False
