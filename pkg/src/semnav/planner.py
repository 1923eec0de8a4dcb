"""Semantic planner: mode dispatch, room-graph Dijkstra, metric refinement.

Planning dispatches on how many graph nodes match the goal:

    none      Discovery Mode — ask the oracle which room most likely holds
              the goal, then route to that room (one attempt, no recursion);
    exactly 1 Targeted Navigation Mode — one graph search;
    several   Multi-target Exploration Mode — search per candidate, keep the
              cheapest, silently skipping unreachable candidates.

Path length means accumulated edge weight by default; hop count is
available for ablation. Planning is read-only over a frozen map, so any
number of concurrent plans may share one SemanticMap.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, replace

from .discovery import RoomContext, goal_llm_response
from .errors import (
    DiscoveryFailedError,
    GridBoundsError,
    MapConsistencyError,
    UnreachableError,
    ValidationError,
)
from .graph import GoalQuery, SemanticGraph, normalize_label
from .mapio import SemanticMap
from .metric import GridIndex, MetricPoint, grid_shortest_path

MODE_DISCOVERY = "discovery"
MODE_TARGETED = "targeted"
MODE_MULTI_TARGET = "multi-target"

FAIL_NO_ROUTE = "no-route"
FAIL_DISCOVERY = "discovery-failed"
FAIL_INVALID_START = "invalid-start"

LENGTH_WEIGHT = "weight"
LENGTH_HOPS = "hops"


@dataclass(frozen=True)
class PlanRequest:
    start: str | MetricPoint
    goal: GoalQuery
    allow_inscribed: bool = False
    refine_metric: bool = False
    length_metric: str = LENGTH_WEIGHT

    def __post_init__(self):
        if self.length_metric not in (LENGTH_WEIGHT, LENGTH_HOPS):
            raise ValidationError(f"unknown length metric {self.length_metric!r}")


@dataclass(frozen=True)
class SemanticPath:
    """Room-node route, ending at an object node for object goals."""

    nodes: tuple[str, ...]
    graph_cost: float
    mode: str = MODE_TARGETED
    waypoints: tuple[MetricPoint, ...] | None = None


@dataclass(frozen=True)
class PlanOutcome:
    result: SemanticPath | None
    failure_reason: str | None = None
    wall_time: float = 0.0  # milliseconds

    @property
    def ok(self) -> bool:
        return self.result is not None


def dijkstra(graph: SemanticGraph, start_room: str, goal_node: str) -> SemanticPath | None:
    """Minimum-weight room path; None when the goal room is unreachable.

    An object goal resolves to its containing room and the object id is
    appended as the terminal node (objects are leaves with no edges).
    Equal-cost paths tie-break to the lexicographically smallest node-id
    sequence: heap entries carry the path tuple, so among equal costs the
    smallest sequence pops first.
    """
    if start_room not in graph.rooms:
        raise ValidationError(f"start {start_room!r} is not a room node")
    tail: tuple[str, ...] = ()
    if goal_node in graph.objects:
        tail = (goal_node,)
        goal_room = graph.objects[goal_node].room_id
    elif goal_node in graph.rooms:
        goal_room = goal_node
    else:
        raise ValidationError(f"goal {goal_node!r} is not a node in the graph")

    if start_room == goal_room:
        return SemanticPath(nodes=(start_room,) + tail, graph_cost=0.0)

    heap: list[tuple[float, tuple[str, ...]]] = [(0.0, (start_room,))]
    closed: set[str] = set()
    while heap:
        cost, path = heapq.heappop(heap)
        node = path[-1]
        if node in closed:
            continue
        closed.add(node)
        if node == goal_room:
            return SemanticPath(nodes=path + tail, graph_cost=cost)
        for neighbor, weight in graph.neighbors(node):
            if neighbor not in closed:
                heapq.heappush(heap, (cost + weight, path + (neighbor,)))
    return None


def resolve_start(m: SemanticMap, start: str | MetricPoint) -> tuple[str, MetricPoint] | None:
    """Start room id plus the metric point refinement should begin from.

    Accepts a room id, an object id (its containing room), or a world point
    resolved through the room raster. None means the start is invalid; a
    point in an unlabeled cell is invalid rather than snapped.
    """
    if isinstance(start, str):
        label = normalize_label(start)
        if label in m.graph.rooms:
            return label, m.graph.rooms[label].centroid
        if label in m.graph.objects:
            obj = m.graph.objects[label]
            return obj.room_id, obj.position
        return None
    point = MetricPoint(*start)
    try:
        cell = m.costmap.world_to_grid(point)
    except GridBoundsError:
        return None
    room_id = m.room_id_at(cell)
    if room_id is None:
        return None
    return room_id, point


def plan(m: SemanticMap, request: PlanRequest, oracle=None) -> PlanOutcome:
    """Run the full mode-dispatch plan over a frozen semantic map."""
    t0 = time.perf_counter()

    def done(result=None, failure=None):
        wall = (time.perf_counter() - t0) * 1000.0
        return PlanOutcome(result=result, failure_reason=failure, wall_time=wall)

    resolved = resolve_start(m, request.start)
    if resolved is None:
        return done(failure=FAIL_INVALID_START)
    start_room, start_point = resolved

    goal = request.goal
    if isinstance(goal, str):
        goal = GoalQuery(text=goal)
    goal_state = m.graph.find_goal_state(goal)

    if goal_state.empty:
        mode = MODE_DISCOVERY
        if oracle is None:
            return done(failure=FAIL_DISCOVERY)
        contexts = [
            RoomContext(room_id=r.id, category=r.category, attributes=tuple(r.attributes))
            for r in sorted(m.graph.rooms.values(), key=lambda r: r.id)
        ]
        try:
            response = goal_llm_response(contexts, goal, oracle)
        except DiscoveryFailedError:
            return done(failure=FAIL_DISCOVERY)
        best = dijkstra(m.graph, start_room, response.top_room)
        if best is None:
            return done(failure=FAIL_NO_ROUTE)
    elif len(goal_state) == 1:
        mode = MODE_TARGETED
        best = dijkstra(m.graph, start_room, goal_state.nodes[0])
        if best is None:
            return done(failure=FAIL_NO_ROUTE)
    else:
        mode = MODE_MULTI_TARGET
        best = None
        best_length = None
        for candidate in goal_state.nodes:
            path = dijkstra(m.graph, start_room, candidate)
            if path is None:
                continue
            length = path.graph_cost if request.length_metric == LENGTH_WEIGHT else len(path.nodes)
            if best_length is None or length < best_length:
                best = path
                best_length = length
        if best is None:
            return done(failure=FAIL_NO_ROUTE)

    best = replace(best, mode=mode)
    if request.refine_metric:
        waypoints = refine_to_metric(
            m, best, start_point=start_point, allow_inscribed=request.allow_inscribed
        )
        best = replace(best, waypoints=waypoints)
    return done(result=best)


def refine_to_metric(
    m: SemanticMap,
    path: SemanticPath,
    start_point: MetricPoint | None = None,
    *,
    allow_inscribed: bool = False,
) -> tuple[MetricPoint, ...]:
    """Realize a graph path as a cell-level waypoint polyline.

    Concatenates grid shortest-path segments start -> portal -> ... -> goal;
    adjacent segments share their joint cell, and every waypoint is the
    center of a traversable cell. Unreachability inside a room means the
    graph and raster disagree, reported as a consistency error naming the
    room.
    """
    graph = m.graph
    rooms = [n for n in path.nodes if n in graph.rooms]
    if not rooms:
        raise ValidationError("path contains no room nodes")

    goal_node = path.nodes[-1]
    if goal_node in graph.objects:
        goal_point = graph.objects[goal_node].position
    else:
        goal_point = graph.rooms[goal_node].centroid
    if start_point is None:
        start_point = graph.rooms[rooms[0]].centroid

    anchors: list[GridIndex] = [m.costmap.world_to_grid(MetricPoint(*start_point))]
    for a, b in zip(rooms, rooms[1:]):
        edge = graph.get_edge(a, b)
        if edge is None:
            raise MapConsistencyError(f"rooms {a!r} and {b!r} are not connected by an edge")
        anchors.append(edge.portal)
    anchors.append(m.costmap.world_to_grid(MetricPoint(*goal_point)))

    cells: list[GridIndex] = []
    for i, (src, dst) in enumerate(zip(anchors, anchors[1:])):
        room = rooms[min(i, len(rooms) - 1)]
        try:
            segment, _ = grid_shortest_path(
                m.costmap, src, dst, allow_inscribed=allow_inscribed
            )
        except (UnreachableError, ValidationError) as exc:
            raise MapConsistencyError(
                f"room {room!r}: cannot realize graph path on the costmap: {exc}"
            ) from exc
        if cells:
            segment = segment[1:]
        cells.extend(segment)
    return tuple(m.costmap.grid_to_world(c) for c in cells)
