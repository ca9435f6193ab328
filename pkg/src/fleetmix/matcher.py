"""Greedy multi-transfer matching of requests onto dispatch decisions.

Executed dispatch decisions form a weighted directed multigraph: one
edge per decision, carrying the truck id, departure time, travel time,
and the capacity still free on that leg.  Each request is assigned the
feasible source-to-destination path that adds the least driving time to
the fleet, where legs already carrying other packages are free
(ride-sharing).  Assignment is greedy in request-id order and never
revisits earlier choices.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InputError
from .world import MATCHED, PENDING, UNSERVED, Request, TruckSpec, WorldNetwork

log = logging.getLogger(__name__)

DEFAULT_PATH_CAP = 100_000


@dataclass
class Decision:
    """One executed dispatch decision (one truck, one leg)."""

    truck: int
    frm: int
    to: int
    depart_s: float
    eta_s: float
    epoch: int = 0


@dataclass
class Edge:
    truck: int
    frm: int
    to: int
    depart_s: float
    eta_s: float
    capacity: int            # initial, from the truck spec
    capacity_left: int
    matched_count: int = 0

    @property
    def arrival_s(self) -> float:
        return self.depart_s + self.eta_s

    @property
    def eta_hours(self) -> float:
        return self.eta_s / 3600.0


class DispatchGraph:
    """Directed multigraph of dispatch decisions, mutated as requests match."""

    def __init__(self):
        self.edges: list[Edge] = []
        self._out: dict[int, list[int]] = {}

    def add_decision(self, dec: Decision, capacity: int) -> Edge:
        edge = Edge(truck=dec.truck, frm=dec.frm, to=dec.to,
                    depart_s=dec.depart_s, eta_s=dec.eta_s,
                    capacity=capacity, capacity_left=capacity)
        self.edges.append(edge)
        self._out.setdefault(dec.frm, []).append(len(self.edges) - 1)
        return edge

    def out_edges(self, node: int) -> list[int]:
        return self._out.get(node, [])

    @property
    def nodes(self) -> set[int]:
        seen = set()
        for e in self.edges:
            seen.add(e.frm)
            seen.add(e.to)
        return seen


def build_graph(decisions: list[Decision], fleet: list[TruckSpec],
                net: WorldNetwork) -> DispatchGraph:
    """One edge per decision; capacities come from the truck specs."""
    cap = {t.id: t.capacity for t in fleet}
    n = net.num_locations
    g = DispatchGraph()
    for dec in decisions:
        if dec.truck not in cap:
            raise InputError(f"decision references unknown truck {dec.truck}")
        if not (0 <= dec.frm < n and 0 <= dec.to < n):
            raise InputError(f"decision references unknown stop {dec.frm}->{dec.to}")
        g.add_decision(dec, cap[dec.truck])
    return g


@dataclass
class MatchPath:
    edges: list[Edge]
    added_hours: float

    @property
    def hops(self) -> int:
        return len(self.edges)

    def tiebreak_key(self) -> list[tuple[int, float]]:
        return [(e.truck, e.depart_s) for e in self.edges]


@dataclass
class MatchingResult:
    outcomes: dict[int, MatchPath | None] = field(default_factory=dict)
    served: int = 0
    added_hours: float = 0.0


def _iter_feasible_paths(g: DispatchGraph, req: Request, single_truck: bool,
                         path_cap: int):
    """DFS over simple paths source->destination.

    A path is feasible when every leg still has room for the package and,
    from the second leg on, the leg departs no earlier than the package
    arrives at the handoff stop.  The first leg has no timing condition:
    the package waits at its source.
    """
    size = req.size
    stack_edges: list[Edge] = []
    visited = {req.source}
    emitted = 0
    capped = False

    def dfs(node: int, arrival: float):
        nonlocal emitted, capped
        for idx in g.out_edges(node):
            if capped:
                return
            e = g.edges[idx]
            if e.capacity_left < size or e.to in visited:
                continue
            if stack_edges and e.depart_s < arrival:
                continue
            if single_truck and stack_edges and e.truck != stack_edges[0].truck:
                continue
            stack_edges.append(e)
            if e.to == req.destination:
                emitted += 1
                yield list(stack_edges)
                if emitted >= path_cap:
                    capped = True
                    log.warning(
                        "path enumeration cap (%d) hit for request %d",
                        path_cap, req.id)
            else:
                visited.add(e.to)
                yield from dfs(e.to, e.arrival_s)
                visited.discard(e.to)
            stack_edges.pop()

    yield from dfs(req.source, 0.0)


def path_added_cost(path_edges: list[Edge]) -> float:
    """Hours of driving this path adds: legs already matched ride free."""
    return sum(e.eta_hours for e in path_edges if e.matched_count == 0)


def feasible_paths(g: DispatchGraph, req: Request, single_truck: bool = False,
                   path_cap: int = DEFAULT_PATH_CAP) -> list[MatchPath]:
    """All feasible simple paths for a pending request."""
    return [MatchPath(edges, path_added_cost(edges))
            for edges in _iter_feasible_paths(g, req, single_truck, path_cap)]


def match_request(g: DispatchGraph, req: Request, single_truck: bool = False,
                  path_cap: int = DEFAULT_PATH_CAP) -> MatchPath | None:
    """Assign the least-added-cost path, or nothing when no path exists.

    Ties on added cost break to the fewest legs, then to the
    lexicographically smallest (truck, departure) leg sequence, so the
    choice is a pure function of the graph and the request.
    """
    if req.source == req.destination:
        raise InputError(f"request {req.id} has source == destination")
    best: MatchPath | None = None
    best_key = None
    for edges in _iter_feasible_paths(g, req, single_truck, path_cap):
        cost = path_added_cost(edges)
        key = (cost, len(edges), [(e.truck, e.depart_s) for e in edges])
        if best_key is None or key < best_key:
            best_key = key
            best = MatchPath(list(edges), cost)
    if best is None:
        return None
    for e in best.edges:
        e.capacity_left -= req.size
        e.matched_count += 1
    return best


def match_all(g: DispatchGraph, requests: list[Request],
              single_truck: bool = False,
              path_cap: int = DEFAULT_PATH_CAP) -> MatchingResult:
    """Greedy pass over pending requests in ascending id order."""
    result = MatchingResult()
    for req in sorted(requests, key=lambda r: r.id):
        if req.status != PENDING:
            continue
        path = match_request(g, req, single_truck, path_cap)
        result.outcomes[req.id] = path
        if path is None:
            req.status = UNSERVED
        else:
            req.status = MATCHED
            result.served += 1
            result.added_hours += path.added_hours
    return result


def verify_matching(g: DispatchGraph, requests: list[Request],
                    result: MatchingResult) -> list[str]:
    """Post-hoc re-validation of the feasibility and capacity invariants.

    Returns a list of violation descriptions (empty when clean).
    """
    problems = []
    loads: dict[int, int] = {}
    by_id = {r.id: r for r in requests}
    for rid, path in result.outcomes.items():
        if path is None:
            continue
        req = by_id[rid]
        if path.edges[0].frm != req.source:
            problems.append(f"request {rid}: path does not start at source")
        if path.edges[-1].to != req.destination:
            problems.append(f"request {rid}: path does not end at destination")
        nodes = [path.edges[0].frm] + [e.to for e in path.edges]
        if len(set(nodes)) != len(nodes):
            problems.append(f"request {rid}: path repeats a stop")
        for a, b in zip(path.edges, path.edges[1:]):
            if a.to != b.frm:
                problems.append(f"request {rid}: disconnected legs")
            if b.depart_s < a.arrival_s:
                problems.append(f"request {rid}: leg departs before package arrives")
        for e in path.edges:
            loads[id(e)] = loads.get(id(e), 0) + req.size
            if req.size > e.capacity:
                problems.append(f"request {rid}: exceeds leg capacity")
    for e in g.edges:
        if e.capacity - loads.get(id(e), 0) != e.capacity_left:
            problems.append(
                f"edge {e.truck}:{e.frm}>{e.to}: capacity bookkeeping off")
        if e.capacity_left < 0:
            problems.append(f"edge {e.truck}:{e.frm}>{e.to}: negative capacity")
    return problems


# --- standalone CSV mode ----------------------------------------------------

def read_decisions_csv(path: str | Path) -> list[Decision]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(Decision(
                truck=int(row["truck"]), frm=int(row["from"]), to=int(row["to"]),
                depart_s=float(row["depart_s"]), eta_s=float(row["eta_s"]),
                epoch=int(row.get("epoch", 0) or 0)))
    return out


def read_requests_csv(path: str | Path) -> list[Request]:
    out = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh)):
            out.append(Request(
                id=int(row.get("id", i) or i), source=int(row["source"]),
                destination=int(row["destination"]), size=int(row["size"])))
    return out


def format_path(path: MatchPath | None) -> str:
    if path is None:
        return ""
    return ";".join(f"{e.truck}:{e.frm}>{e.to}" for e in path.edges)


def write_matching_csv(path: str | Path, requests: list[Request],
                       result: MatchingResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["request_id", "status", "path", "added_hours"])
        for req in sorted(requests, key=lambda r: r.id):
            p = result.outcomes.get(req.id)
            hours = f"{p.added_hours:.6f}" if p else ""
            w.writerow([req.id, req.status, format_path(p), hours])
