from __future__ import annotations

import numpy as np
import pytest

from semnav import builder, envgen, mapio, segmentation
from semnav.builder import ObjectPlacement
from semnav.metric import CostmapGrid

# one line per acceptance criterion, printed after the test summary
acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion():
    def _record(number: int, description: str, passed: bool, detail: str = ""):
        status = "PASS" if passed else "FAIL"
        suffix = f" ({detail})" if detail else ""
        acceptance_lines.append(f"[{number:>2}] {status} {description}{suffix}")
        assert passed, f"criterion {number}: {description}{suffix}"

    return _record


def grid_from_ascii(art: str, resolution: float = 1.0, origin=(0.0, 0.0)) -> CostmapGrid:
    """Build a costmap from ASCII art: '.' free, '#' lethal, '~' unknown,
    '+' inscribed, 'a'..'z' graded costs 10,20,..."""
    rows = [line.strip() for line in art.strip().splitlines()]
    height = len(rows)
    width = len(rows[0])
    cells = np.zeros((height, width), dtype=np.uint8)
    # ASCII row 0 is drawn top-most; grid row 0 is the origin (bottom) row
    for r, line in enumerate(reversed(rows)):
        assert len(line) == width, "ragged ascii grid"
        for c, ch in enumerate(line):
            if ch == ".":
                cells[r, c] = 0
            elif ch == "#":
                cells[r, c] = 254
            elif ch == "~":
                cells[r, c] = 255
            elif ch == "+":
                cells[r, c] = 253
            else:
                cells[r, c] = 10 * (ord(ch) - ord("a") + 1)
    return CostmapGrid(
        width=width,
        height=height,
        resolution=resolution,
        origin_x=origin[0],
        origin_y=origin[1],
        cells=cells,
    )


@pytest.fixture(scope="session")
def default_rules():
    from semnav.cli import _default_rules_path

    return segmentation.parse_rules(_default_rules_path())


@pytest.fixture(scope="session")
def small_env():
    """4 rooms + corridor at 0.1 m/cell, with ground truth."""
    spec = envgen.EnvSpec(seed=7, n_rooms=4, resolution=0.1)
    return envgen.generate(spec)


@pytest.fixture(scope="session")
def gt_map(small_env):
    grid, gt, graph = small_env
    return mapio.assemble_map(grid, gt.raster, graph, gt.label_to_room, name="gt-small")


@pytest.fixture(scope="session")
def built_map(small_env, default_rules):
    grid, gt, _ = small_env
    objects = [
        ObjectPlacement(class_label=o.class_label, position=o.position, id=o.id)
        for o in gt.objects
    ]
    return builder.build_semantic_map(grid, objects, default_rules, name="built-small")


@pytest.fixture(scope="session")
def big_env():
    """Desk-scale environment: 12 rooms, >= 50 objects, default resolution."""
    spec = envgen.EnvSpec(seed=11, n_rooms=12, object_density=(4, 7), resolution=0.05)
    return envgen.generate(spec)


@pytest.fixture(scope="session")
def big_gt_map(big_env):
    grid, gt, graph = big_env
    assert len(gt.objects) >= 50
    return mapio.assemble_map(grid, gt.raster, graph, gt.label_to_room, name="gt-big")
