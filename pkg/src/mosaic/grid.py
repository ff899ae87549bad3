"""Host grids: square or hexagonal lattices the elements are mapped onto.

Cells are integer ids laid out row-major.  Square grids use the
4-neighborhood on integer centers; hex grids are pointy-top hexagons on
axial coordinates (col = q, row = r) forming a rhombus, with unit edge
length, so adjacent centers sit sqrt(3) apart.  The y axis grows with
the row index, i.e. downward in screen terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import EmptyRestriction

SQUARE = "square"
HEX = "hex"

CellId = int
Point = tuple[float, float]

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class CellMetrics:
    edge_length: float
    cell_area: float
    cell_perimeter: float


SQUARE_METRICS = CellMetrics(1.0, 1.0, 4.0)
HEX_METRICS = CellMetrics(1.0, 3.0 * SQRT3 / 2.0, 6.0)


@dataclass(frozen=True)
class HostGrid:
    kind: str
    rows: int
    cols: int
    cells: tuple[CellId, ...]
    adjacency: dict[CellId, tuple[CellId, ...]]
    center: dict[CellId, Point]
    cell_metrics: CellMetrics

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def edges(self) -> list[tuple[CellId, CellId]]:
        """Undirected edges (u, v) with u < v, sorted."""
        out = []
        for u in self.cells:
            for v in self.adjacency[u]:
                if u < v:
                    out.append((u, v))
        out.sort()
        return out

    def contains(self, cell: CellId) -> bool:
        return cell in self.center


def grid_size_for(n_elements: int) -> tuple[int, int]:
    """Default host dimensions: one more than the tight square root."""
    if n_elements < 1:
        raise ValueError("need at least one element")
    side = math.isqrt(n_elements)
    if side * side < n_elements:
        side += 1
    return side + 1, side + 1


def build_grid(kind: str, rows: int, cols: int) -> HostGrid:
    if kind not in (SQUARE, HEX):
        raise ValueError(f"unknown grid kind {kind!r}")
    if rows < 1 or cols < 1:
        raise ValueError("grid dimensions must be positive")
    cells = tuple(range(rows * cols))
    center: dict[CellId, Point] = {}
    adjacency: dict[CellId, tuple[CellId, ...]] = {}
    if kind == SQUARE:
        offsets = ((0, -1), (0, 1), (-1, 0), (1, 0))
        metrics = SQUARE_METRICS
    else:
        # axial neighbors: east/west, the two row shifts, and the diagonals
        # that keep |dq + dr| <= 1
        offsets = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))
        metrics = HEX_METRICS
    for r in range(rows):
        for q in range(cols):
            cid = r * cols + q
            if kind == SQUARE:
                center[cid] = (float(q), float(r))
            else:
                center[cid] = (SQRT3 * (q + r / 2.0), 1.5 * r)
            nbrs = []
            for dq, dr in offsets:
                q2, r2 = q + dq, r + dr
                if 0 <= q2 < cols and 0 <= r2 < rows:
                    nbrs.append(r2 * cols + q2)
            adjacency[cid] = tuple(sorted(nbrs))
    return HostGrid(kind, rows, cols, cells, adjacency, center, metrics)


def max_internal_edges(kind: str, n: int) -> int:
    """Most adjacencies any n cells of the infinite lattice can induce.

    Classic extremal values: 2n - ceil(2*sqrt(n)) on the square lattice,
    3n - ceil(sqrt(12n - 3)) on the hexagonal one.  Any region inside a
    bounded grid can only do worse, so this is a safe upper bound.
    """
    if n <= 1:
        return 0
    if kind == SQUARE:
        return 2 * n - math.ceil(2.0 * math.sqrt(n))
    return 3 * n - math.ceil(math.sqrt(12.0 * n - 3.0))


def grid_centroid(grid: HostGrid) -> Point:
    xs = [grid.center[c][0] for c in grid.cells]
    ys = [grid.center[c][1] for c in grid.cells]
    return (sum(xs) / len(xs), sum(ys) / len(ys))


def restrict(grid: HostGrid, keep: Iterable[CellId]) -> HostGrid:
    """Sub-grid induced on `keep`; ids, centers and metrics are preserved."""
    kept = sorted(set(keep))
    if not kept:
        raise EmptyRestriction("cannot restrict a grid to zero cells")
    for c in kept:
        if not grid.contains(c):
            raise ValueError(f"cell {c} not in grid")
    keep_set = set(kept)
    adjacency = {
        c: tuple(v for v in grid.adjacency[c] if v in keep_set) for c in kept
    }
    center = {c: grid.center[c] for c in kept}
    return HostGrid(grid.kind, grid.rows, grid.cols, tuple(kept), adjacency,
                    center, grid.cell_metrics)


# --- per-cell geometry ------------------------------------------------------

_HEX_ANGLES = tuple(math.pi / 2.0 + k * math.pi / 3.0 for k in range(6))
_HEX_CORNERS = tuple((math.cos(a), math.sin(a)) for a in _HEX_ANGLES)
_SQUARE_CORNERS = ((-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5))


def cell_polygon(grid: HostGrid, cell: CellId, shrink: float = 1.0) -> tuple[Point, ...]:
    """Corner points of one cell, optionally scaled toward its center.

    shrink = 1 gives the true cell; render passes < 1 to open visual
    gaps between cells.
    """
    cx, cy = grid.center[cell]
    corners = _SQUARE_CORNERS if grid.kind == SQUARE else _HEX_CORNERS
    return tuple((cx + dx * shrink, cy + dy * shrink) for dx, dy in corners)
