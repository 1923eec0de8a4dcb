"""Metric layer: costmap grid, PGM import/export, and grid-level shortest paths.

Cell cost convention (one byte per cell):

    0         fully free
    1..252    increasing traversal cost
    253       inscribed / near-lethal (traversable only when explicitly allowed)
    254       lethal obstacle
    255       unknown (always untraversable)

Traversal cost of a step between two traversable cells is

    step_length * 0.5 * (factor(a) + factor(b))

with factor(c) = 1 + c/128 for c <= 252 and factor(253) = 3.0 when inscribed
cells are allowed. Averaging the two endpoint factors keeps the rule symmetric
(cost(a->b) == cost(b->a)) and leaves free-space cost equal to geometric
length. step_length is resolution for the 4 straight moves and
resolution*sqrt(2) for the 4 diagonal moves.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    ConfigError,
    GridBoundsError,
    MapFormatError,
    UnreachableError,
    ValidationError,
)

COST_FREE = 0
COST_INSCRIBED = 253
COST_LETHAL = 254
COST_UNKNOWN = 255

INSCRIBED_FACTOR = 3.0

DEFAULT_FREE_THRESH = 250
DEFAULT_LETHAL_THRESH = 50

SQRT2 = math.sqrt(2.0)


class GridIndex(NamedTuple):
    col: int
    row: int


class MetricPoint(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class CostmapGrid:
    """Immutable 2D cost grid with world-frame geometry.

    cells is row-major with shape (height, width), dtype uint8; the world
    coordinates of the (0, 0) cell corner are (origin_x, origin_y).
    """

    width: int
    height: int
    resolution: float
    origin_x: float
    origin_y: float
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("grid dimensions must be positive")
        if not (self.resolution > 0):
            raise ValidationError(f"resolution must be positive, got {self.resolution}")
        cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        if cells.size != self.width * self.height:
            raise ValidationError(
                f"cell count {cells.size} != width*height {self.width * self.height}"
            )
        cells = cells.reshape(self.height, self.width)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    def __eq__(self, other):
        if not isinstance(other, CostmapGrid):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.resolution == other.resolution
            and self.origin_x == other.origin_x
            and self.origin_y == other.origin_y
            and np.array_equal(self.cells, other.cells)
        )

    def in_bounds(self, index: GridIndex) -> bool:
        return 0 <= index.col < self.width and 0 <= index.row < self.height

    def cost_at(self, index: GridIndex) -> int:
        if not self.in_bounds(index):
            raise GridBoundsError(f"index {index} outside {self.width}x{self.height} grid")
        return int(self.cells[index.row, index.col])

    def world_to_grid(self, p: MetricPoint) -> GridIndex:
        """Map a world point to the grid cell containing it."""
        col = math.floor((p.x - self.origin_x) / self.resolution)
        row = math.floor((p.y - self.origin_y) / self.resolution)
        idx = GridIndex(col, row)
        if not self.in_bounds(idx):
            raise GridBoundsError(f"point ({p.x}, {p.y}) outside grid bounds")
        return idx

    def grid_to_world(self, index: GridIndex) -> MetricPoint:
        """World coordinates of a cell's center."""
        if not self.in_bounds(index):
            raise GridBoundsError(f"index {index} outside {self.width}x{self.height} grid")
        return MetricPoint(
            self.origin_x + (index.col + 0.5) * self.resolution,
            self.origin_y + (index.row + 0.5) * self.resolution,
        )


def world_to_grid(g: CostmapGrid, p: MetricPoint) -> GridIndex:
    return g.world_to_grid(p)


def grid_to_world(g: CostmapGrid, index: GridIndex) -> MetricPoint:
    return g.grid_to_world(index)


# ---------------------------------------------------------------------------
# PGM I/O


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read a binary (P5) PGM file. Returns (array, maxval).

    maxval 255 yields uint8, larger maxvals (up to 65535) yield uint16
    decoded big-endian per the format.
    """
    with open(path, "rb") as f:
        data = f.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise MapFormatError(f"{path}: truncated PGM header")
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    if tokens[0] != b"P5":
        raise MapFormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise MapFormatError(f"{path}: non-numeric PGM header field") from exc
    if width <= 0 or height <= 0 or not (0 < maxval < 65536):
        raise MapFormatError(f"{path}: bad PGM dimensions {width}x{height} max {maxval}")
    pos += 1  # single whitespace byte after maxval
    bytes_per = 1 if maxval < 256 else 2
    need = width * height * bytes_per
    raster = data[pos : pos + need]
    if len(raster) < need:
        raise MapFormatError(f"{path}: truncated PGM raster ({len(raster)}/{need} bytes)")
    dtype = np.uint8 if bytes_per == 1 else np.dtype(">u2")
    arr = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return arr.astype(np.uint8 if bytes_per == 1 else np.uint16), maxval


def write_pgm(path, array: np.ndarray, maxval: int | None = None) -> None:
    """Write a binary (P5) PGM; uint8 data for maxval <= 255, else big-endian 16-bit."""
    arr = np.asarray(array)
    if maxval is None:
        maxval = 255 if arr.dtype == np.uint8 else 65535
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n{maxval}\n".encode("ascii")
    payload = arr.astype(np.uint8 if maxval < 256 else np.dtype(">u2")).tobytes()
    with open(path, "wb") as f:
        f.write(header + payload)


def read_key_value_file(path, *, required: set[str], allowed: set[str]) -> dict[str, str]:
    """Parse a UTF-8 `key: value` per line file, rejecting unknown keys."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key: value', got {line!r}")
            key, value = line.split(":", 1)
            key = key.strip()
            if key not in allowed:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = value.strip()
    missing = required - values.keys()
    if missing:
        raise ConfigError(f"{path}: missing required key(s): {', '.join(sorted(missing))}")
    return values


_META_KEYS = {"resolution", "origin_x", "origin_y", "free_thresh", "lethal_thresh"}


def load_costmap(image_path, meta_path) -> CostmapGrid:
    """Load a grayscale occupancy PGM plus metadata into a CostmapGrid.

    Pixel mapping: >= free_thresh -> 0, <= lethal_thresh -> 254, in between
    linearly rescaled into 1..252 (darker pixels cost more). The thresholds
    live in the metadata file so the mapping is reproducible bit for bit.
    """
    meta = read_key_value_file(
        meta_path, required={"resolution", "origin_x", "origin_y"}, allowed=_META_KEYS
    )
    try:
        resolution = float(meta["resolution"])
        origin_x = float(meta["origin_x"])
        origin_y = float(meta["origin_y"])
        free_thresh = int(meta.get("free_thresh", DEFAULT_FREE_THRESH))
        lethal_thresh = int(meta.get("lethal_thresh", DEFAULT_LETHAL_THRESH))
    except ValueError as exc:
        raise ConfigError(f"{meta_path}: non-numeric value: {exc}") from exc
    if resolution <= 0:
        raise ValidationError(f"{meta_path}: resolution must be positive, got {resolution}")
    if not (0 <= lethal_thresh < free_thresh <= 255):
        raise ConfigError(
            f"{meta_path}: need 0 <= lethal_thresh < free_thresh <= 255, "
            f"got {lethal_thresh}/{free_thresh}"
        )

    pixels, maxval = read_pgm(image_path)
    if maxval != 255:
        raise MapFormatError(f"{image_path}: costmap PGM must have maxval 255, got {maxval}")
    cells = pixels_to_costs(pixels, free_thresh=free_thresh, lethal_thresh=lethal_thresh)
    h, w = cells.shape
    return CostmapGrid(
        width=w, height=h, resolution=resolution, origin_x=origin_x, origin_y=origin_y, cells=cells
    )


def pixels_to_costs(pixels: np.ndarray, *, free_thresh: int, lethal_thresh: int) -> np.ndarray:
    """Threshold/rescale 8-bit grayscale pixels into cost values."""
    p = pixels.astype(np.int64)
    # Integer linear ramp over the open interval, rounded half-up; the span
    # degenerates when the thresholds leave a single intermediate pixel value.
    span = max(1, free_thresh - lethal_thresh - 2)
    ramp = 1 + ((free_thresh - 1 - p) * 251 + span // 2) // span
    ramp = np.clip(ramp, 1, 252)
    out = np.where(p >= free_thresh, COST_FREE, np.where(p <= lethal_thresh, COST_LETHAL, ramp))
    return out.astype(np.uint8)


def costs_to_pixels(
    costs: np.ndarray,
    *,
    free_thresh: int = DEFAULT_FREE_THRESH,
    lethal_thresh: int = DEFAULT_LETHAL_THRESH,
) -> np.ndarray:
    """Render cost values as grayscale occupancy pixels (for external tools).

    Exact for free (255) and lethal/inscribed (0) cells; graded costs are
    squeezed into the open threshold interval (lossy: the interval has fewer
    pixel values than there are graded costs). Unknown maps to 205.
    """
    c = costs.astype(np.int64)
    lo, hi = lethal_thresh + 1, free_thresh - 1
    span = max(1, hi - lo)
    ramp = hi - ((c - 1) * span + 125) // 251
    ramp = np.clip(ramp, lo, hi)
    out = np.where(
        c == COST_FREE,
        255,
        np.where(c == COST_UNKNOWN, 205, np.where(c >= COST_INSCRIBED, 0, ramp)),
    )
    return out.astype(np.uint8)


# ---------------------------------------------------------------------------
# Grid shortest path


def traversal_factor(cost: int, allow_inscribed: bool = False) -> float:
    """Per-cell cost multiplier; raises ValidationError on untraversable cells."""
    if cost <= 252:
        return 1.0 + cost / 128.0
    if cost == COST_INSCRIBED and allow_inscribed:
        return INSCRIBED_FACTOR
    raise ValidationError(f"cell cost {cost} is untraversable")


def _factor_row(allow_inscribed: bool) -> np.ndarray:
    # -1 marks untraversable values so the search can test with one compare.
    factors = np.full(256, -1.0)
    factors[:253] = 1.0 + np.arange(253) / 128.0
    if allow_inscribed:
        factors[COST_INSCRIBED] = INSCRIBED_FACTOR
    return factors


def grid_shortest_path(
    g: CostmapGrid,
    start: GridIndex,
    goal: GridIndex,
    *,
    allow_inscribed: bool = False,
    mask: np.ndarray | None = None,
) -> tuple[list[GridIndex], float]:
    """Minimum-cost 8-connected path between two traversable cells.

    Dijkstra with deterministic tie-breaking (heap entries carry the flat
    cell index; predecessors update only on strict improvement). `mask`, when
    given, additionally restricts traversable cells to True entries.

    Returns (path, cost) with path endpoints equal to start/goal. Raises
    ValidationError for untraversable endpoints and UnreachableError when no
    route exists.
    """
    start = GridIndex(*start)
    goal = GridIndex(*goal)
    for name, idx in (("start", start), ("goal", goal)):
        if not g.in_bounds(idx):
            raise GridBoundsError(f"{name} {idx} outside {g.width}x{g.height} grid")

    factors = _factor_row(allow_inscribed)
    fcost = factors[g.cells]
    if mask is not None:
        if mask.shape != (g.height, g.width):
            raise ValidationError("mask shape must match grid")
        fcost = np.where(mask, fcost, -1.0)
    for name, idx in (("start", start), ("goal", goal)):
        if fcost[idx.row, idx.col] < 0:
            raise ValidationError(f"{name} cell {idx} is untraversable")

    if start == goal:
        return [start], 0.0

    w, h = g.width, g.height
    flat_factor = fcost.ravel()
    n = w * h
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    closed = np.zeros(n, dtype=bool)

    straight = g.resolution
    diagonal = g.resolution * SQRT2
    # (flat offset, dcol, step length)
    moves = (
        (-w, 0, straight),
        (-1, -1, straight),
        (1, 1, straight),
        (w, 0, straight),
        (-w - 1, -1, diagonal),
        (-w + 1, 1, diagonal),
        (w - 1, -1, diagonal),
        (w + 1, 1, diagonal),
    )

    sidx = start.row * w + start.col
    gidx = goal.row * w + goal.col
    dist[sidx] = 0.0
    heap = [(0.0, sidx)]
    pop = heapq.heappop
    push = heapq.heappush
    while heap:
        d, u = pop(heap)
        if closed[u]:
            continue
        closed[u] = True
        if u == gidx:
            break
        fu = flat_factor[u]
        ucol = u % w
        for off, dcol, step in moves:
            vcol = ucol + dcol
            if vcol < 0 or vcol >= w:
                continue
            v = u + off
            if v < 0 or v >= n or closed[v]:
                continue
            fv = flat_factor[v]
            if fv < 0:
                continue
            nd = d + step * (0.5 * (fu + fv))
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                push(heap, (nd, v))
    if not closed[gidx]:
        raise UnreachableError(f"no traversable route from {start} to {goal}")

    path = []
    node = gidx
    while node >= 0:
        path.append(GridIndex(node % w, node // w))
        node = pred[node]
    path.reverse()
    return path, float(dist[gidx])
