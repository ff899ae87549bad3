"""Region geometry and compactness scores.

Perimeter works on the true (unshrunk) cells: every cell contributes
its full boundary, and each internal edge, an edge of the grid graph
with both endpoints in the region, cancels two edge lengths of it.
Holes therefore count toward the perimeter, as they should for a
compactness measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import EmptyRegion
from .grid import CellId, HostGrid
from .setsystem import BASE, SetSystem


@dataclass(frozen=True)
class RegionGeometry:
    set_name: str
    cells: frozenset[CellId]
    area: float
    perimeter: float
    component_count: int


def _components(grid: HostGrid, cells: frozenset[CellId]) -> int:
    left = set(cells)
    count = 0
    while left:
        count += 1
        stack = [left.pop()]
        while stack:
            c = stack.pop()
            for w in grid.adjacency[c]:
                if w in left:
                    left.discard(w)
                    stack.append(w)
    return count


def is_contiguous(grid: HostGrid, cells: Iterable[CellId]) -> bool:
    cellset = frozenset(cells)
    if not cellset:
        return False
    return _components(grid, cellset) == 1


def region_geometry(grid: HostGrid, cells: Iterable[CellId],
                    set_name: str = "") -> RegionGeometry:
    cellset = frozenset(cells)
    if not cellset:
        raise EmptyRegion(f"set {set_name!r} occupies no cells")
    for c in cellset:
        if not grid.contains(c):
            raise ValueError(f"cell {c} not in grid")
    internal = 0
    for u in cellset:
        for v in grid.adjacency[u]:
            if u < v and v in cellset:
                internal += 1
    m = grid.cell_metrics
    area = len(cellset) * m.cell_area
    perimeter = len(cellset) * m.cell_perimeter - 2 * internal * m.edge_length
    return RegionGeometry(set_name, cellset, area, perimeter,
                          _components(grid, cellset))


def polsby_popper(geom: RegionGeometry) -> float:
    """4 * pi * area / perimeter^2; 1 for a disc, smaller for anything else."""
    return 4.0 * math.pi * geom.area / (geom.perimeter * geom.perimeter)


def pp_scores(assignment: Mapping[str, CellId], system: SetSystem,
              grid: HostGrid) -> dict[str, float]:
    """Three compactness aggregates over one embedding.

    pp_c1 scores the union of all occupied cells, pp_c2 averages over
    every set, pp_c3 over base sets only.  Means are unweighted.
    """
    all_cells = set(assignment[e.id] for e in system.elements)
    c1 = polsby_popper(region_geometry(grid, all_cells, "__union__"))
    per_set = {}
    for s in system.sets:
        cells = set(assignment[m] for m in s.members)
        per_set[s.name] = polsby_popper(region_geometry(grid, cells, s.name))
    base = [per_set[s.name] for s in system.sets if s.kind == BASE]
    c2 = sum(per_set.values()) / len(per_set)
    c3 = sum(base) / len(base)
    return {"pp_c1": c1, "pp_c2": c2, "pp_c3": c3}


def metrics_report(assignment: Mapping[str, CellId], system: SetSystem,
                   grid: HostGrid) -> dict:
    """Per-set geometry rows plus the three aggregates, JSON-friendly."""
    rows = []
    for s in system.sets:
        cells = set(assignment[m] for m in s.members)
        geom = region_geometry(grid, cells, s.name)
        rows.append({
            "set": s.name,
            "kind": s.kind,
            "cells": len(geom.cells),
            "area": geom.area,
            "perimeter": geom.perimeter,
            "components": geom.component_count,
            "polsby_popper": polsby_popper(geom),
        })
    return {"sets": rows, **pp_scores(assignment, system, grid)}
