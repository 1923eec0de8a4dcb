"""Room segmentation of a costmap and rule-based place categorization.

Segmentation is a deterministic watershed over the Euclidean distance
transform of free space:

  1. per free cell, distance to the nearest untraversable cell;
  2. seed regions at distance local maxima deeper than half the doorway
     threshold;
  3. flood seeds outward in decreasing-distance order (4-connected);
  4. merge regions whose shared boundary is wider than the doorway
     threshold (they are halves of one space, not two rooms);
  5. absorb regions smaller than the minimum room size into their largest
     neighbor.

Only the largest 4-connected free component is segmented; free pockets a
robot could never reach keep label 0.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ConfigError, MapConsistencyError, ValidationError
from .graph import RoomEdge, UNCATEGORIZED, normalize_label
from .metric import CostmapGrid, GridIndex, grid_shortest_path

DEFAULT_DOOR_WIDTH_MAX = 1.2  # meters
DEFAULT_MIN_ROOM_AREA = 4.0  # square meters

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class RoomLabelRaster:
    """Row-major room labels, same dimensions as the source costmap.

    Label 0 marks non-room cells (walls, unknown, unreachable pockets);
    label k > 0 marks room k's cells.
    """

    width: int
    height: int
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.uint16)
        if labels.shape != (self.height, self.width):
            raise ValidationError(
                f"label raster shape {labels.shape} != ({self.height}, {self.width})"
            )
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __eq__(self, other):
        if not isinstance(other, RoomLabelRaster):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.labels, other.labels)
        )

    def room_labels(self) -> list[int]:
        return sorted(int(v) for v in np.unique(self.labels) if v > 0)

    def label_at(self, index: GridIndex) -> int:
        return int(self.labels[index.row, index.col])


def default_min_room_cells(resolution: float, area_m2: float = DEFAULT_MIN_ROOM_AREA) -> int:
    return max(1, round(area_m2 / (resolution * resolution)))


def segment_rooms(
    g: CostmapGrid,
    min_room_cells: int | None = None,
    door_width_max: float = DEFAULT_DOOR_WIDTH_MAX,
) -> RoomLabelRaster:
    """Partition reachable free space into room regions.

    Deterministic: seeds, flooding order, merges, and the final label
    numbering are all fixed by (row, col) scan order, so identical inputs
    produce identical rasters.
    """
    if min_room_cells is None:
        min_room_cells = default_min_room_cells(g.resolution)
    free = g.cells < 253
    if not free.any():
        raise ValidationError("costmap has no free cells to segment")

    components, n_comp = ndimage.label(free, structure=FOUR_CONNECTED)
    sizes = np.bincount(components.ravel())
    sizes[0] = 0
    domain = components == int(np.argmax(sizes))

    dist = ndimage.distance_transform_edt(free, sampling=g.resolution)

    seeds = _seed_components(dist, domain, door_width_max / 2.0)
    labels = _flood(dist, domain, seeds)
    labels = _merge_wide_boundaries(labels, door_width_max, g.resolution)
    labels = _absorb_small_regions(labels, min_room_cells)
    labels = _compact_labels(labels)
    return RoomLabelRaster(width=g.width, height=g.height, labels=labels)


def _seed_components(dist: np.ndarray, domain: np.ndarray, min_depth: float) -> list[np.ndarray]:
    """Distance local maxima grouped into components; one seed region each."""
    h, w = dist.shape
    padded = np.full((h + 2, w + 2), -1.0)
    padded[1:-1, 1:-1] = np.where(domain, dist, -1.0)
    center = padded[1:-1, 1:-1]
    is_max = center > min_depth
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            is_max &= center >= padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
    is_max &= domain
    if not is_max.any():
        # Narrow map: fall back to the single deepest cell, first in scan order.
        flat = np.where(domain.ravel(), dist.ravel(), -1.0)
        is_max = np.zeros_like(domain)
        is_max.ravel()[int(np.argmax(flat))] = True
    comp, n = ndimage.label(is_max, structure=np.ones((3, 3), dtype=bool))
    out = []
    for k in range(1, n + 1):
        out.append(np.argwhere(comp == k))
    # label order fixed by each component's first cell in row-major scan
    out.sort(key=lambda cells: (int(cells[0][0]), int(cells[0][1])))
    return out


def _flood(dist: np.ndarray, domain: np.ndarray, seeds: list[np.ndarray]) -> np.ndarray:
    """Grow seed regions over the domain, deepest cells first, 4-connected."""
    h, w = dist.shape
    labels = np.zeros((h, w), dtype=np.int32)
    heap: list[tuple[float, int, int, int]] = []
    for k, cells in enumerate(seeds, start=1):
        for r, c in cells:
            labels[r, c] = k
    for k, cells in enumerate(seeds, start=1):
        for r, c in cells:
            _push_frontier(heap, dist, domain, labels, int(r), int(c), k)
    while heap:
        _, r, c, k = heapq.heappop(heap)
        if labels[r, c]:
            continue
        labels[r, c] = k
        _push_frontier(heap, dist, domain, labels, r, c, k)
    return labels


def _push_frontier(heap, dist, domain, labels, r: int, c: int, k: int) -> None:
    h, w = dist.shape
    for nr, nc in ((r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)):
        if 0 <= nr < h and 0 <= nc < w and domain[nr, nc] and not labels[nr, nc]:
            heapq.heappush(heap, (-dist[nr, nc], nr, nc, k))


def _boundary_pairs(labels: np.ndarray) -> dict[tuple[int, int], int]:
    """Count 4-adjacent cell pairs joining two distinct positive labels."""
    pairs: dict[tuple[int, int], int] = {}
    for a, b in (
        (labels[:, :-1], labels[:, 1:]),
        (labels[:-1, :], labels[1:, :]),
    ):
        both = (a > 0) & (b > 0) & (a != b)
        lo = np.minimum(a[both], b[both])
        hi = np.maximum(a[both], b[both])
        for la, lb in zip(lo.tolist(), hi.tolist()):
            pairs[(la, lb)] = pairs.get((la, lb), 0) + 1
    return pairs


def _merge_wide_boundaries(labels: np.ndarray, door_width_max: float, res: float) -> np.ndarray:
    """Fold together region pairs whose shared boundary exceeds doorway width."""
    labels = labels.copy()
    while True:
        pairs = _boundary_pairs(labels)
        wide = [
            (cnt, la, lb)
            for (la, lb), cnt in pairs.items()
            if cnt * res > door_width_max
        ]
        if not wide:
            return labels
        # widest first; ties by smaller label pair
        wide.sort(key=lambda t: (-t[0], t[1], t[2]))
        _, la, lb = wide[0]
        labels[labels == lb] = la


def _absorb_small_regions(labels: np.ndarray, min_room_cells: int) -> np.ndarray:
    """Merge sub-minimum regions into their largest neighbor (label 0 if isolated)."""
    labels = labels.copy()
    while True:
        counts = np.bincount(labels.ravel())
        present = [k for k in range(1, counts.size) if counts[k] > 0]
        small = [k for k in present if counts[k] < min_room_cells]
        if not small or len(present) == 1:
            return labels
        small.sort(key=lambda k: (counts[k], k))
        victim = small[0]
        pairs = _boundary_pairs(labels)
        neighbors = []
        for la, lb in pairs:
            if la == victim:
                neighbors.append(lb)
            elif lb == victim:
                neighbors.append(la)
        if not neighbors:
            labels[labels == victim] = 0
            continue
        target = max(neighbors, key=lambda k: (counts[k], -k))
        labels[labels == victim] = target


def _compact_labels(labels: np.ndarray) -> np.ndarray:
    """Renumber labels 1..K in order of first appearance in row-major scan."""
    out = np.zeros_like(labels, dtype=np.uint16)
    mapping: dict[int, int] = {}
    flat = labels.ravel()
    nonzero = np.flatnonzero(flat)
    for idx in nonzero.tolist():
        k = int(flat[idx])
        if k not in mapping:
            mapping[k] = len(mapping) + 1
    for old, new in mapping.items():
        out[labels == old] = new
    return out


# ---------------------------------------------------------------------------
# Adjacency


def region_centroid_cell(raster: RoomLabelRaster, label: int) -> GridIndex:
    """Cell of the region nearest its arithmetic mean (always inside the region)."""
    cells = np.argwhere(raster.labels == label)
    if cells.size == 0:
        raise ValidationError(f"label {label} has no cells")
    mean = cells.mean(axis=0)
    d2 = ((cells - mean) ** 2).sum(axis=1)
    order = np.lexsort((cells[:, 1], cells[:, 0], d2))
    r, c = cells[order[0]]
    return GridIndex(int(c), int(r))


def extract_adjacency(raster: RoomLabelRaster, g: CostmapGrid) -> list[RoomEdge]:
    """Room adjacency edges from shared free boundaries.

    Two rooms are adjacent iff a free cell of one is 4-adjacent to a free
    cell of the other; the portal is the boundary cell closest to the
    boundary's mean position. Edge ids are the raster labels rendered as
    strings (callers remap them to final room ids).

    Weight is the grid shortest-path cost centroid_a -> portal -> centroid_b,
    with each leg searched within its own room (plus the portal cell).
    """
    labels = raster.labels
    boundary_cells: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for (asl, bsl), (aoff, boff) in (
        ((np.s_[:, :-1], np.s_[:, 1:]), ((0, 0), (0, 1))),
        ((np.s_[:-1, :], np.s_[1:, :]), ((0, 0), (1, 0))),
    ):
        a, b = labels[asl], labels[bsl]
        both = (a > 0) & (b > 0) & (a != b)
        rows, cols = np.nonzero(both)
        av, bv = a[both], b[both]
        for r, c, la, lb in zip(rows.tolist(), cols.tolist(), av.tolist(), bv.tolist()):
            key = (min(la, lb), max(la, lb))
            boundary_cells.setdefault(key, []).append((r + aoff[0], c + aoff[1]))
            boundary_cells.setdefault(key, []).append((r + boff[0], c + boff[1]))

    centroids = {k: region_centroid_cell(raster, k) for k in raster.room_labels()}
    edges = []
    for (la, lb), cells in sorted(boundary_cells.items()):
        arr = np.array(sorted(set(cells)))
        mean = arr.mean(axis=0)
        d2 = ((arr - mean) ** 2).sum(axis=1)
        order = np.lexsort((arr[:, 1], arr[:, 0], d2))
        pr, pc = arr[order[0]]
        portal = GridIndex(int(pc), int(pr))
        weight = _portal_weight(g, raster, la, lb, portal, centroids[la], centroids[lb])
        edges.append(RoomEdge(room_a=str(la), room_b=str(lb), weight=weight, portal=portal))
    return edges


def _portal_weight(
    g: CostmapGrid,
    raster: RoomLabelRaster,
    label_a: int,
    label_b: int,
    portal: GridIndex,
    centroid_a: GridIndex,
    centroid_b: GridIndex,
) -> float:
    total = 0.0
    for label, centroid in ((label_a, centroid_a), (label_b, centroid_b)):
        mask = raster.labels == label
        mask[portal.row, portal.col] = True
        try:
            _, cost = grid_shortest_path(g, portal, centroid, mask=mask)
        except Exception as exc:
            raise MapConsistencyError(
                f"room label {label}: centroid unreachable from portal {portal}: {exc}"
            ) from exc
        total += cost
    return total


# ---------------------------------------------------------------------------
# Place categorization


@dataclass(frozen=True)
class CategoryRule:
    """Ontology rule: a room qualifies when every required class is present;

    qualifying rules compete on the summed weights of present classes."""

    category: str
    required: frozenset[str]
    score_weights: dict[str, float]

    def __post_init__(self):
        if not self.required and not self.score_weights:
            raise ValidationError(
                f"rule {self.category!r} needs a required set or score weights"
            )
        for cls, wgt in self.score_weights.items():
            if not (wgt > 0):
                raise ValidationError(f"rule {self.category!r}: weight for {cls!r} must be > 0")


def categorize_room(attributes, rules: list[CategoryRule]) -> str:
    """Best qualifying rule's category; 'uncategorized' when none qualifies.

    Scores sum the rule's weights over attributes present; ties (including
    all-zero scores) go to the earliest rule in the list.
    """
    attrs = {normalize_label(a) for a in attributes}
    best_category = UNCATEGORIZED
    best_score = None
    for rule in rules:
        if not rule.required <= attrs:
            continue
        score = sum(w for cls, w in rule.score_weights.items() if cls in attrs)
        if best_score is None or score > best_score:
            best_score = score
            best_category = rule.category
    return best_category


def parse_rules(path) -> list[CategoryRule]:
    """Parse a rules file: one `category: required=a,b; weights=a:2,b:1` per line."""
    rules = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'category: clauses'")
            category, rest = line.split(":", 1)
            category = normalize_label(category)
            if category in seen:
                raise ConfigError(f"{path}:{lineno}: duplicate category {category!r}")
            seen.add(category)
            required: frozenset[str] = frozenset()
            weights: dict[str, float] = {}
            for clause in rest.split(";"):
                clause = clause.strip()
                if not clause:
                    continue
                if "=" not in clause:
                    raise ConfigError(f"{path}:{lineno}: bad clause {clause!r}")
                key, value = clause.split("=", 1)
                key = key.strip()
                if key == "required":
                    required = frozenset(
                        normalize_label(v) for v in value.split(",") if v.strip()
                    )
                elif key == "weights":
                    for item in value.split(","):
                        item = item.strip()
                        if not item:
                            continue
                        if ":" not in item:
                            raise ConfigError(f"{path}:{lineno}: bad weight {item!r}")
                        cls, wgt = item.split(":", 1)
                        cls = normalize_label(cls)
                        if cls in weights:
                            raise ConfigError(f"{path}:{lineno}: duplicate class {cls!r}")
                        try:
                            weights[cls] = float(wgt)
                        except ValueError as exc:
                            raise ConfigError(
                                f"{path}:{lineno}: non-numeric weight {wgt!r}"
                            ) from exc
                else:
                    raise ConfigError(f"{path}:{lineno}: unknown clause {key!r}")
            try:
                rules.append(
                    CategoryRule(category=category, required=required, score_weights=weights)
                )
            except ValidationError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return rules
