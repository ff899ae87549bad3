"""Shared fixtures and small helpers used across the test modules."""

from __future__ import annotations

from mosaic.grid import HostGrid
from mosaic.setsystem import BASE, OVERLAY, Element, NamedSet, SetSystem


def make_system(bases: dict[str, list[str]],
                overlays: dict[str, list[str]] | None = None) -> SetSystem:
    """Build a SetSystem from {base: members} and {overlay: members} dicts."""
    elements = tuple(
        Element(i, i.upper()) for ms in bases.values() for i in ms)
    sets = [NamedSet(n, tuple(ms), BASE) for n, ms in bases.items()]
    for n, ms in (overlays or {}).items():
        sets.append(NamedSet(n, tuple(ms), OVERLAY))
    return SetSystem(elements, tuple(sets))


def seven_star() -> SetSystem:
    """One hub element shared by seven 2-element sets.

    Any embedding with all sets contiguous needs the hub's cell to have
    seven neighbors, more than either grid kind offers, so the instance
    is infeasible under full contiguity on every grid.
    """
    leaves = [f"l{i}" for i in range(1, 8)]
    return make_system(
        {"core": ["hub"] + leaves},
        {f"s{i}": ["hub", f"l{i}"] for i in range(1, 8)})


def connected_cells(grid: HostGrid, cells) -> bool:
    """Breadth-first connectivity, written independently of the package."""
    todo = sorted(set(cells))
    if not todo:
        return False
    seen = {todo[0]}
    queue = [todo[0]]
    while queue:
        c = queue.pop()
        for w in grid.adjacency[c]:
            if w in cells and w not in seen:
                seen.add(w)
                queue.append(w)
    return seen == set(cells)


def region_cells(system: SetSystem, embedding, name: str) -> set:
    """Cells one set occupies, from original element ids."""
    return {embedding.assignment[m] for m in system.get_set(name).members}


def assert_connected_sets(system: SetSystem, grid: HostGrid, embedding,
                          names) -> None:
    for name in names:
        assert connected_cells(grid, region_cells(system, embedding, name)), (
            f"set {name!r} is split: {sorted(region_cells(system, embedding, name))}")
