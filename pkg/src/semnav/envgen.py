"""Synthetic office-environment generator with exact ground truth.

Produces a costmap, a ground-truth room raster/graph, and object placements
for two deterministic layouts:

  spine  rooms attached alternately above/below a central corridor, one
         doorway per room onto the corridor (star adjacency);
  chain  rooms in a row, one doorway in each shared wall (path adjacency).

Everything is a pure function of the spec (seeded RNG), so the same spec
yields byte-identical maps. Rooms are furnished from a vocabulary of
(object class -> room category) affinities; a room's ground-truth category
is the category it was furnished as, or "uncategorized" when it received no
objects (there is nothing on the map to recover the category from).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import GenerationError, ValidationError
from .graph import ObjectNode, RoomEdge, RoomNode, SemanticGraph, UNCATEGORIZED, normalize_label
from .metric import (
    COST_FREE,
    COST_LETHAL,
    COST_UNKNOWN,
    CostmapGrid,
    GridIndex,
    MetricPoint,
    read_key_value_file,
)
from .segmentation import DEFAULT_DOOR_WIDTH_MAX, RoomLabelRaster

DEFAULT_VOCABULARY: tuple[tuple[str, str], ...] = (
    ("desk", "office"),
    ("chair", "office"),
    ("bookcase", "office"),
    ("monitor", "office"),
    ("whiteboard", "conference_room"),
    ("projector", "conference_room"),
    ("conference_table", "conference_room"),
    ("sink", "kitchen"),
    ("fridge", "kitchen"),
    ("sofa", "lounge"),
    ("coffee_table", "lounge"),
    ("plant", "lounge"),
    ("extinguisher", "corridor"),
    ("exit_sign", "corridor"),
)

CORRIDOR_CATEGORY = "corridor"

_MARGIN_CELLS = 2  # unknown ring outside the building


@dataclass(frozen=True)
class EnvSpec:
    seed: int = 0
    n_rooms: int = 4
    room_size_range: tuple[float, float] = (3.0, 5.0)
    corridor_width: float = 2.0
    object_density: tuple[int, int] = (1, 3)
    vocabulary: tuple[tuple[str, str], ...] = DEFAULT_VOCABULARY
    resolution: float = 0.05
    layout: str = "spine"
    door_width: float = 0.8
    wall_thickness: float = 0.2

    def __post_init__(self):
        if self.n_rooms < 1:
            raise ValidationError("n_rooms must be >= 1")
        lo, hi = self.room_size_range
        if not (0 < lo <= hi):
            raise ValidationError(f"bad room_size_range {self.room_size_range}")
        dlo, dhi = self.object_density
        if not (0 <= dlo <= dhi):
            raise ValidationError(f"bad object_density {self.object_density}")
        if self.resolution <= 0:
            raise ValidationError("resolution must be positive")
        if self.layout not in ("spine", "chain"):
            raise ValidationError(f"layout must be 'spine' or 'chain', got {self.layout!r}")
        if self.door_width <= 0 or self.corridor_width <= 0:
            raise ValidationError("door_width and corridor_width must be positive")
        if self.layout == "spine" and self.n_rooms > 1:
            if self.corridor_width <= DEFAULT_DOOR_WIDTH_MAX:
                raise ValidationError(
                    f"corridor_width {self.corridor_width} must exceed the doorway "
                    f"threshold {DEFAULT_DOOR_WIDTH_MAX} or the corridor reads as a door"
                )
        if self.wall_thickness <= 0:
            raise ValidationError("wall_thickness must be positive")


@dataclass(frozen=True)
class GroundTruthRoom:
    id: str
    category: str
    label: int
    col0: int
    row0: int
    width: int
    height: int

    @property
    def cell_count(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class GroundTruthDoor:
    room_a: str
    room_b: str
    col0: int
    row0: int
    width: int
    height: int

    @property
    def center(self) -> GridIndex:
        return GridIndex(self.col0 + self.width // 2, self.row0 + self.height // 2)


@dataclass(frozen=True)
class GroundTruthObject:
    id: str
    class_label: str
    position: MetricPoint
    room_id: str


@dataclass(frozen=True)
class GroundTruth:
    rooms: tuple[GroundTruthRoom, ...]
    doors: tuple[GroundTruthDoor, ...]
    objects: tuple[GroundTruthObject, ...]
    raster: RoomLabelRaster
    label_to_room: dict[int, str] = field(default_factory=dict)
    wall_cells: int = 0


def generate(spec: EnvSpec) -> tuple[CostmapGrid, GroundTruth, SemanticGraph]:
    """Generate (costmap, ground truth, ground-truth graph) from a spec."""
    rng = random.Random(spec.seed)
    res = spec.resolution

    def cells(meters: float) -> int:
        return max(1, round(meters / res))

    wt = cells(spec.wall_thickness)
    door = cells(spec.door_width)
    m = _MARGIN_CELLS

    sizes = []
    lo, hi = spec.room_size_range
    for _ in range(spec.n_rooms):
        sizes.append((cells(rng.uniform(lo, hi)), cells(rng.uniform(lo, hi))))

    for w, _ in sizes:
        if w < door + 2:
            raise GenerationError(
                f"room width {w} cells cannot hold a {door}-cell door with margins"
            )

    if spec.n_rooms == 1:
        layout = _layout_single(sizes[0], wt, m)
    elif spec.layout == "spine":
        layout = _layout_spine(sizes, cells(spec.corridor_width), wt, door, m, rng)
    else:
        layout = _layout_chain(sizes, wt, door, m, rng)

    grid_w, grid_h, room_rects, corridor_rect, door_rects = layout

    costs = np.full((grid_h, grid_w), COST_UNKNOWN, dtype=np.uint8)
    costs[m : grid_h - m, m : grid_w - m] = COST_LETHAL
    interiors = list(room_rects)
    if corridor_rect is not None:
        interiors.append(corridor_rect)
    for c0, r0, w, h in interiors:
        costs[r0 : r0 + h, c0 : c0 + w] = COST_FREE
    for c0, r0, w, h in door_rects:
        costs[r0 : r0 + h, c0 : c0 + w] = COST_FREE

    bbox_area = (grid_w - 2 * m) * (grid_h - 2 * m)
    wall_cells = bbox_area - sum(w * h for _, _, w, h in interiors) - sum(
        w * h for _, _, w, h in door_rects
    )

    grid = CostmapGrid(
        width=grid_w,
        height=grid_h,
        resolution=res,
        origin_x=0.0,
        origin_y=0.0,
        cells=costs,
    )

    gt, graph = _furnish(spec, rng, grid, room_rects, corridor_rect, door_rects, wall_cells)
    return grid, gt, graph


def _layout_single(size, wt, m):
    w, h = size
    grid_w = m + wt + w + wt + m
    grid_h = m + wt + h + wt + m
    room = (m + wt, m + wt, w, h)
    return grid_w, grid_h, [room], None, []


def _layout_spine(sizes, ch, wt, door, m, rng):
    """Rooms alternately above/below a full-width corridor, doors onto it."""
    cursors = [0, 0]  # above, below
    placements = []  # (side, x0, w, d)
    for i, (w, d) in enumerate(sizes):
        side = i % 2
        x0 = cursors[side]
        placements.append((side, x0, w, d))
        cursors[side] += w + wt
    interior_w = max(c - wt for c in cursors if c > 0)
    da = max((d for side, _, _, d in placements if side == 0), default=0)
    db = max((d for side, _, _, d in placements if side == 1), default=0)

    col0 = m + wt
    below0 = m + wt
    corr0 = below0 + db + (wt if db else 0)
    above0 = corr0 + ch + wt
    grid_w = m + wt + interior_w + wt + m
    grid_h = above0 + da + wt + m

    room_rects = []
    door_rects = []
    for side, x0, w, d in placements:
        if side == 0:
            rect = (col0 + x0, above0, w, d)
            wall_row0 = corr0 + ch  # wall band between corridor and above room
        else:
            rect = (col0 + x0, below0 + (db - d), w, d)
            wall_row0 = below0 + db
        room_rects.append(rect)
        dx = rng.randint(x0 + 1, x0 + w - door - 1)
        door_rects.append((col0 + dx, wall_row0, door, wt))
    corridor_rect = (col0, corr0, interior_w, ch)
    return grid_w, grid_h, room_rects, corridor_rect, door_rects


def _layout_chain(sizes, wt, door, m, rng):
    """Rooms in a row; one door through each shared wall."""
    dmax = max(d for _, d in sizes)
    col0 = m + wt
    row0 = m + wt
    cur = 0
    room_rects = []
    door_rects = []
    for i, (w, d) in enumerate(sizes):
        room_rects.append((col0 + cur, row0, w, d))
        if i + 1 < len(sizes):
            overlap = min(d, sizes[i + 1][1])
            if overlap < door + 2:
                raise GenerationError(
                    f"rooms {i} and {i + 1} are too shallow for a {door}-cell door"
                )
            dy = rng.randint(1, overlap - door - 1)
            door_rects.append((col0 + cur + w, row0 + dy, wt, door))
        cur += w + wt
    interior_w = cur - wt
    grid_w = m + wt + interior_w + wt + m
    grid_h = m + wt + dmax + wt + m
    return grid_w, grid_h, room_rects, None, door_rects


def _furnish(spec, rng, grid, room_rects, corridor_rect, door_rects, wall_cells):
    """Assign categories, place objects, and build raster + ground-truth graph."""
    vocab = [(normalize_label(c), normalize_label(cat)) for c, cat in spec.vocabulary]
    categories = []
    for _, cat in vocab:
        if cat != CORRIDOR_CATEGORY and cat not in categories:
            categories.append(cat)
    by_category: dict[str, list[str]] = {}
    for cls, cat in vocab:
        by_category.setdefault(cat, []).append(cls)

    labels = np.zeros((grid.height, grid.width), dtype=np.uint16)
    rooms: list[GroundTruthRoom] = []
    cat_counter: dict[str, int] = {}
    dmin, dmax = spec.object_density

    # sample object counts first so ids/categories are settled before placement
    planned: list[tuple[int, str, int]] = []  # (room index, assigned category, n objects)
    rects = list(room_rects)
    assigned = []
    for i in range(len(rects)):
        cat = categories[i % len(categories)] if categories else UNCATEGORIZED
        assigned.append(cat)
    if corridor_rect is not None:
        rects.append(corridor_rect)
        assigned.append(CORRIDOR_CATEGORY)

    for i, cat in enumerate(assigned):
        n_objects = rng.randint(dmin, dmax)
        if not by_category.get(cat):
            n_objects = 0
        if n_objects == 0:
            cat = UNCATEGORIZED
        planned.append((i, cat, n_objects))

    for i, cat, _ in planned:
        c0, r0, w, h = rects[i]
        label = i + 1
        labels[r0 : r0 + h, c0 : c0 + w] = label
        base = "room" if cat == UNCATEGORIZED else cat
        cat_counter[base] = cat_counter.get(base, 0) + 1
        rooms.append(
            GroundTruthRoom(
                id=f"{base}_{cat_counter[base]}",
                category=cat,
                label=label,
                col0=c0,
                row0=r0,
                width=w,
                height=h,
            )
        )

    raster = RoomLabelRaster(width=grid.width, height=grid.height, labels=labels)
    label_to_room = {room.label: room.id for room in rooms}

    graph = SemanticGraph()
    for room in rooms:
        centroid = grid.grid_to_world(
            GridIndex(room.col0 + room.width // 2, room.row0 + room.height // 2)
        )
        graph.add_room(
            RoomNode(
                id=room.id,
                category=room.category,
                centroid=centroid,
                cell_count=room.cell_count,
            )
        )

    objects: list[GroundTruthObject] = []
    class_counter: dict[str, int] = {}
    for i, cat, n_objects in planned:
        if n_objects == 0:
            continue
        room = rooms[i]
        classes = by_category[cat]
        # first object is the category's signature class; extras sampled freely
        picks = [classes[0]] + [rng.choice(classes) for _ in range(n_objects - 1)]
        spots = _object_cells(rects[i], n_objects, rng)
        for cls, (col, row) in zip(picks, spots):
            class_counter[cls] = class_counter.get(cls, 0) + 1
            oid = f"{cls}_{class_counter[cls]}"
            position = grid.grid_to_world(GridIndex(col, row))
            obj = GroundTruthObject(id=oid, class_label=cls, position=position, room_id=room.id)
            objects.append(obj)
            graph.add_object(
                ObjectNode(id=oid, class_label=cls, position=position, room_id=room.id)
            )

    doors: list[GroundTruthDoor] = []
    if corridor_rect is not None:
        corridor_id = rooms[-1].id
        for i, rect in enumerate(door_rects):
            doors.append(GroundTruthDoor(rooms[i].id, corridor_id, *rect))
    else:
        for i, rect in enumerate(door_rects):
            doors.append(GroundTruthDoor(rooms[i].id, rooms[i + 1].id, *rect))

    for d in doors:
        ca = graph.rooms[d.room_a].centroid
        cb = graph.rooms[d.room_b].centroid
        pw = grid.grid_to_world(d.center)
        weight = math.dist(ca, pw) + math.dist(pw, cb)
        graph.add_room_edge(RoomEdge(room_a=d.room_a, room_b=d.room_b, weight=weight, portal=d.center))
    graph.freeze()

    gt = GroundTruth(
        rooms=tuple(rooms),
        doors=tuple(doors),
        objects=tuple(objects),
        raster=raster,
        label_to_room=label_to_room,
        wall_cells=wall_cells,
    )
    return gt, graph


def _object_cells(rect, count, rng) -> list[tuple[int, int]]:
    c0, r0, w, h = rect
    margin = 1 if w > 2 and h > 2 else 0
    candidates = [
        (col, row)
        for row in range(r0 + margin, r0 + h - margin)
        for col in range(c0 + margin, c0 + w - margin)
    ]
    if count > len(candidates):
        raise GenerationError(f"room at {rect} too small for {count} objects")
    return rng.sample(candidates, count)


_SPEC_KEYS = {
    "seed",
    "n_rooms",
    "room_size_range",
    "corridor_width",
    "object_density",
    "vocabulary",
    "resolution",
    "layout",
    "door_width",
    "wall_thickness",
}


def load_env_spec(path) -> EnvSpec:
    """Read an EnvSpec from a `key: value` file; every key is optional."""
    raw = read_key_value_file(path, required=set(), allowed=_SPEC_KEYS)
    kwargs = {}
    try:
        if "seed" in raw:
            kwargs["seed"] = int(raw["seed"])
        if "n_rooms" in raw:
            kwargs["n_rooms"] = int(raw["n_rooms"])
        if "room_size_range" in raw:
            lo, hi = raw["room_size_range"].split(",")
            kwargs["room_size_range"] = (float(lo), float(hi))
        if "corridor_width" in raw:
            kwargs["corridor_width"] = float(raw["corridor_width"])
        if "object_density" in raw:
            lo, hi = raw["object_density"].split(",")
            kwargs["object_density"] = (int(lo), int(hi))
        if "vocabulary" in raw:
            pairs = []
            for item in raw["vocabulary"].split(","):
                item = item.strip()
                if not item:
                    continue
                cls, cat = item.split(":")
                pairs.append((cls.strip(), cat.strip()))
            kwargs["vocabulary"] = tuple(pairs)
        if "resolution" in raw:
            kwargs["resolution"] = float(raw["resolution"])
        if "layout" in raw:
            kwargs["layout"] = raw["layout"]
        if "door_width" in raw:
            kwargs["door_width"] = float(raw["door_width"])
        if "wall_thickness" in raw:
            kwargs["wall_thickness"] = float(raw["wall_thickness"])
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"{path}: bad spec value: {exc}") from exc
    return EnvSpec(**kwargs)
