"""Backends, solution decoding, the four pipelines, and a brute-force oracle.

The default backend drives HiGHS through scipy.optimize.milp.  Adapters
are looked up through the MOSAIC_SOLVER environment variable so an
alternative solver can be dropped in without touching callers; every
adapter reports the same (status, objective, gap, values-by-name)
surface.
"""

from __future__ import annotations

import itertools
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint
from scipy.optimize import milp as scipy_milp

from .errors import (
    Infeasible,
    NoIncumbent,
    NonIntegralSolution,
    OccupancyViolation,
    SolverError,
    TooLarge,
)
from .grid import CellId, HostGrid, max_internal_edges, restrict
from .metrics import is_contiguous
from .milp import (
    ASSIGNMENT_COST,
    BINARY,
    CONTINUOUS,
    PERIMETER_BONUS,
    CostTable,
    MilpModel,
    ModelOptions,
    build_assignment_model,
    eccentricity_costs,
    initial_centers,
)
from .setsystem import ContractedSystem, expand_embedding

OPTIMAL = "optimal"
FEASIBLE = "feasible"        # incumbent in hand, stopped on a limit
INFEASIBLE = "infeasible"
NO_INCUMBENT = "no_incumbent"
ERROR = "error"

INTEGRALITY_TOL = 1e-6
CONVERGENCE_TOL = 1e-9


@dataclass
class SolverConfig:
    relative_gap: float = 0.005
    time_limit: float | None = None
    seed: int = 0  # recorded for reproducibility; HiGHS runs deterministically


@dataclass
class SolveOutcome:
    status: str
    objective: float | None
    gap: float | None
    values: dict[str, float] | None
    wall_time: float
    message: str = ""


class ScipyMilpBackend:
    """HiGHS via scipy.optimize.milp."""

    def __init__(self, config: SolverConfig | None = None):
        self.config = config or SolverConfig()

    def solve(self, model: MilpModel) -> SolveOutcome:
        t0 = time.perf_counter()
        n = len(model.variables)
        c = np.zeros(n)
        sign = -1.0 if model.objective.sense == "max" else 1.0
        for h, coef in model.objective.terms:
            c[h] += sign * coef
        rows, cols, data, lo, hi = [], [], [], [], []
        for i, con in enumerate(model.constraints):
            for h, coef in con.terms:
                rows.append(i)
                cols.append(h)
                data.append(coef)
            if con.sense == "<=":
                lo.append(-np.inf)
                hi.append(con.rhs)
            elif con.sense == ">=":
                lo.append(con.rhs)
                hi.append(np.inf)
            else:
                lo.append(con.rhs)
                hi.append(con.rhs)
        a = sparse.csc_array((data, (rows, cols)), shape=(len(model.constraints), n))
        integrality = np.array(
            [0 if v.kind == CONTINUOUS else 1 for v in model.variables])
        bounds = Bounds(np.array([v.lower for v in model.variables]),
                        np.array([v.upper for v in model.variables]))
        options: dict = {"mip_rel_gap": self.config.relative_gap}
        if self.config.time_limit is not None:
            options["time_limit"] = self.config.time_limit
        res = scipy_milp(c=c, constraints=LinearConstraint(a, np.array(lo), np.array(hi)),
                         integrality=integrality, bounds=bounds, options=options)
        wall = time.perf_counter() - t0
        if res.status == 2:
            return SolveOutcome(INFEASIBLE, None, None, None, wall, res.message)
        if res.status in (0, 1) and res.x is not None:
            status = OPTIMAL if res.status == 0 else FEASIBLE
            values = {v.name: float(res.x[i]) for i, v in enumerate(model.variables)}
            objective = sign * float(res.fun)
            gap = float(res.mip_gap) if res.mip_gap is not None else 0.0
            return SolveOutcome(status, objective, gap, values, wall, res.message)
        if res.status == 1:
            return SolveOutcome(NO_INCUMBENT, None, None, None, wall, res.message)
        return SolveOutcome(ERROR, None, None, None, wall, res.message)


BACKENDS: dict[str, Callable[[SolverConfig], object]] = {
    "scipy": ScipyMilpBackend,
}


def get_backend(config: SolverConfig | None = None, name: str | None = None):
    name = name or os.environ.get("MOSAIC_SOLVER", "scipy")
    if name not in BACKENDS:
        raise SolverError(
            f"unknown solver backend {name!r}; known: {sorted(BACKENDS)}")
    return BACKENDS[name](config or SolverConfig())


# --- decoding ------------------------------------------------------------------

@dataclass
class Embedding:
    """element id -> cell, plus per-set flow edges (u, v, amount)."""
    assignment: dict[str, CellId]
    flows: dict[str, list[tuple[CellId, CellId, int]]] = field(default_factory=dict)

    def occupied_cells(self) -> tuple[CellId, ...]:
        return tuple(sorted(set(self.assignment.values())))


def decode(model: MilpModel, values: Mapping[str, float],
           contracted: ContractedSystem | None = None,
           grid: HostGrid | None = None) -> Embedding:
    """Turn backend variable values into an embedding over original elements.

    Validates integrality of every integer variable and that the
    assignment respects multiplicities and cell exclusivity.
    """
    info = model.info
    if info is None:
        raise ValueError("model carries no assignment metadata")
    contracted = contracted or info.contracted
    grid = grid or info.grid
    for var in model.variables:
        if var.kind == CONTINUOUS:
            continue
        val = values[var.name]
        if abs(val - round(val)) > INTEGRALITY_TOL:
            raise NonIntegralSolution(f"{var.name} = {val!r}")

    def val_of(handle: int) -> int:
        return round(values[model.variables[handle].name])

    rep_cells: dict[str, list[CellId]] = {rep: [] for rep in contracted.groups}
    used: dict[CellId, str] = {}
    for ent in info.entities:
        cells = [v for v in grid.cells if val_of(info.x_vars[(ent.id, v)]) == 1]
        if len(cells) != ent.alpha:
            raise OccupancyViolation(
                f"entity {ent.id!r} occupies {len(cells)} cells, expected {ent.alpha}")
        for cell in cells:
            if cell in used:
                raise OccupancyViolation(
                    f"cell {cell} assigned to both {used[cell]!r} and {ent.id!r}")
            used[cell] = ent.id
        rep_cells[ent.rep].extend(cells)

    assignment = expand_embedding(contracted, rep_cells)
    flows: dict[str, list[tuple[CellId, CellId, int]]] = {}
    for name in info.contiguity_sets:
        edges = []
        for (sname, u, v), handle in info.y_vars.items():
            if sname != name:
                continue
            amt = val_of(handle)
            if amt > 0:
                edges.append((u, v, amt))
        edges.sort()
        flows[name] = edges
    return Embedding(assignment, flows)


def set_cells(contracted: ContractedSystem, embedding: Embedding,
              name: str) -> tuple[CellId, ...]:
    """Occupied cells of one set, via the original elements."""
    cells = set()
    for rep in contracted.system.get_set(name).members:
        for orig in contracted.groups[rep]:
            cells.add(embedding.assignment[orig])
    return tuple(sorted(cells))


def _verify_contiguity(contracted, grid, embedding, contiguity) -> None:
    for name in contiguity:
        if not is_contiguous(grid, set_cells(contracted, embedding, name)):
            raise SolverError(f"backend produced a split region for set {name!r}")


# --- pipelines ----------------------------------------------------------------------

@dataclass
class PipelineOptions:
    max_iterations: int = 5
    epsilon: float = 0.01          # k'-gon radius, in edge lengths
    convergence_tol: float = CONVERGENCE_TOL


@dataclass
class IterationRecord:
    centers: dict[str, tuple[float, float]]
    objective: float
    wall_time: float
    gap: float
    occupied: tuple[CellId, ...]

    def to_json(self) -> dict:
        return {
            "centers": {k: [v[0], v[1]] for k, v in self.centers.items()},
            "objective": self.objective,
            "wall_time": self.wall_time,
            "gap": self.gap,
            "occupied": list(self.occupied),
        }


@dataclass
class SolveReport:
    variant: str
    iterations: list[IterationRecord]
    total_wall_time: float
    final_objective: float
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "iterations": [it.to_json() for it in self.iterations],
            "total_wall_time": self.total_wall_time,
            "final_objective": self.final_objective,
            "notes": list(self.notes),
        }


def _raise_for(outcome: SolveOutcome) -> None:
    if outcome.status == INFEASIBLE:
        raise Infeasible(outcome.message or "model is infeasible")
    if outcome.status == NO_INCUMBENT:
        raise NoIncumbent(outcome.message or "time limit hit with no solution")
    if outcome.status == ERROR:
        raise SolverError(outcome.message or "backend failed")


def _internal_edge_total(contracted, grid, embedding) -> int:
    """True perimeter objective of an embedding: internal edges over all sets."""
    total = 0
    for s in contracted.system.sets:
        cells = set(set_cells(contracted, embedding, s.name))
        for u in cells:
            for v in grid.adjacency[u]:
                if u < v and v in cells:
                    total += 1
    return total


def _perimeter_upper_bound(contracted, grid) -> int:
    """Valid bound on the perimeter objective: each set packed ideally."""
    return sum(max_internal_edges(grid.kind, contracted.set_multiplicity(s.name))
               for s in contracted.system.sets)


def run_msp(contracted: ContractedSystem, grid: HostGrid, backend,
            options: PipelineOptions | None = None):
    """Single solve, maximizing internal edges of every set.

    On a time limit the backend's incumbent is decoded and its gap
    kept.  The backend cannot be warm-started, and on larger instances
    it sometimes exhausts a time limit without any integral solution;
    in that case a quick eccentricity-cost solve over the same feasible
    region supplies a genuine incumbent, scored against the lattice
    packing bound.  Exact small-instance solves are unaffected: without
    a time limit the single direct solve runs to the requested gap.
    """
    t0 = time.perf_counter()
    model = build_assignment_model(
        contracted, grid, None, ModelOptions(objective_kind=PERIMETER_BONUS))

    limit = getattr(getattr(backend, "config", None), "time_limit", None)
    fallback = None
    main_backend = backend
    if limit is not None:
        # reserve a slice of the budget to construct an incumbent
        reserve = min(60.0, 0.15 * limit)
        cfg = backend.config
        main_backend = type(backend)(SolverConfig(
            relative_gap=cfg.relative_gap, time_limit=limit - reserve,
            seed=cfg.seed))
        system = contracted.system
        centers = initial_centers(
            grid, [s.name for s in system.base_sets()],
            [s.name for s in system.overlay_sets()])
        aux_model = build_assignment_model(
            contracted, grid, eccentricity_costs(contracted, grid, centers),
            ModelOptions())
        aux_backend = type(backend)(SolverConfig(
            relative_gap=0.25, time_limit=reserve, seed=cfg.seed))
        aux = aux_backend.solve(aux_model)
        if aux.status in (OPTIMAL, FEASIBLE):
            emb = decode(aux_model, aux.values)
            fallback = (emb, _internal_edge_total(contracted, grid, emb))

    outcome = main_backend.solve(model)
    if outcome.status == INFEASIBLE or (outcome.status == NO_INCUMBENT
                                        and fallback is None):
        _raise_for(outcome)
    notes = []
    if outcome.status in (OPTIMAL, FEASIBLE):
        embedding = decode(model, outcome.values)
        objective = outcome.objective
        gap = outcome.gap or 0.0
        if fallback is not None and fallback[1] > objective:
            embedding, objective = fallback
            bound = _perimeter_upper_bound(contracted, grid)
            gap = (bound - objective) / max(1.0, abs(objective))
            notes.append("kept auxiliary incumbent; gap vs lattice packing bound")
    else:  # time limit with nothing from the backend: use the auxiliary incumbent
        embedding, objective = fallback
        bound = _perimeter_upper_bound(contracted, grid)
        gap = (bound - objective) / max(1.0, abs(objective))
        notes.append("backend found no incumbent in time; "
                     "kept auxiliary incumbent, gap vs lattice packing bound")
    _verify_contiguity(contracted, grid, embedding, model.info.contiguity_sets)
    rec = IterationRecord({}, float(objective), outcome.wall_time,
                          gap, embedding.occupied_cells())
    report = SolveReport("msp", [rec], time.perf_counter() - t0,
                         float(objective), notes)
    return embedding, report


def run_mse(contracted, grid, backend, options=None):
    """Iterated eccentricity embedding on the full grid, all sets contiguous."""
    return _eccentricity_pipeline("mse", contracted, grid, backend,
                                  options or PipelineOptions(),
                                  restrict_after_first=False, contiguity=None)


def run_msea(contracted, grid, backend, options=None):
    """Like MSE, but after the first iteration the grid shrinks to the
    cells that iteration occupied, pinning the overall silhouette."""
    return _eccentricity_pipeline("msea", contracted, grid, backend,
                                  options or PipelineOptions(),
                                  restrict_after_first=True, contiguity=None)


def run_relaxed(contracted, grid, backend, options=None):
    """Eccentricity pipeline with contiguity enforced for base sets only."""
    base = tuple(s.name for s in contracted.system.base_sets())
    return _eccentricity_pipeline("relaxed", contracted, grid, backend,
                                  options or PipelineOptions(),
                                  restrict_after_first=False, contiguity=base)


def _region_centroids(contracted, grid, embedding) -> dict[str, tuple[float, float]]:
    centers = {}
    for s in contracted.system.sets:
        cells = set_cells(contracted, embedding, s.name)
        xs = [grid.center[c][0] for c in cells]
        ys = [grid.center[c][1] for c in cells]
        centers[s.name] = (sum(xs) / len(xs), sum(ys) / len(ys))
    return centers


def _eccentricity_pipeline(variant, contracted, grid, backend, options,
                           restrict_after_first, contiguity):
    t0 = time.perf_counter()
    system = contracted.system
    base_names = [s.name for s in system.base_sets()]
    overlay_names = [s.name for s in system.overlay_sets()]
    centers = initial_centers(grid, base_names, overlay_names, options.epsilon)
    host = grid
    records: list[IterationRecord] = []
    embedding = None
    for _ in range(options.max_iterations):
        costs = eccentricity_costs(contracted, host, centers)
        model = build_assignment_model(
            contracted, host, costs, ModelOptions(contiguity_sets=contiguity))
        outcome = backend.solve(model)
        _raise_for(outcome)
        embedding = decode(model, outcome.values)
        _verify_contiguity(contracted, host, embedding, model.info.contiguity_sets)
        records.append(IterationRecord(
            dict(centers), outcome.objective, outcome.wall_time,
            outcome.gap or 0.0, embedding.occupied_cells()))
        if restrict_after_first and host is grid:
            host = restrict(grid, embedding.occupied_cells())
        new_centers = _region_centroids(contracted, grid, embedding)
        moved = max(
            ((new_centers[k][0] - centers[k][0]) ** 2
             + (new_centers[k][1] - centers[k][1]) ** 2) ** 0.5
            for k in new_centers)
        if moved < options.convergence_tol:
            break
        centers = new_centers
    report = SolveReport(variant, records, time.perf_counter() - t0,
                         records[-1].objective)
    return embedding, report


# --- exhaustive oracle ---------------------------------------------------------------

ORACLE_MAX_ELEMENTS = 8
ORACLE_MAX_CELLS = 9


def brute_force_embed(contracted: ContractedSystem, grid: HostGrid,
                      costs: CostTable, contiguity_sets=None):
    """Reference optimum by full enumeration.  Guarded to tiny instances.

    Enumerates every multiplicity-respecting assignment of cells to
    representatives, keeps those whose contiguity sets induce connected
    regions, and returns the first minimum-cost survivor in
    enumeration order (representatives in declaration order, cell
    combinations ascending).  Raises TooLarge outside the guard and
    Infeasible when nothing survives.
    """
    system = contracted.system
    n_total = contracted.total_multiplicity()
    if n_total > ORACLE_MAX_ELEMENTS or grid.n_cells > ORACLE_MAX_CELLS:
        raise TooLarge(
            f"oracle guard: {n_total} elements on {grid.n_cells} cells "
            f"(limit {ORACLE_MAX_ELEMENTS} on {ORACLE_MAX_CELLS})")
    if contiguity_sets is None:
        contiguity_sets = tuple(s.name for s in system.sets)

    reps = [e.id for e in system.elements]
    alpha = [contracted.alpha[r] for r in reps]
    cells = list(grid.cells)
    bit = {c: 1 << i for i, c in enumerate(cells)}
    nbr_mask = [0] * len(cells)
    for i, c in enumerate(cells):
        m = 0
        for w in grid.adjacency[c]:
            m |= bit[w]
        nbr_mask[i] = m

    def connected(mask: int) -> bool:
        if mask == 0:
            return True
        reached = mask & -mask
        while True:
            grow = reached
            m = reached
            while m:
                b = m & -m
                grow |= nbr_mask[b.bit_length() - 1]
                m ^= b
            grow &= mask
            if grow == reached:
                return reached == mask
            reached = grow

    member_bits = []  # per contiguity set: indices into reps
    for name in contiguity_sets:
        member_bits.append([reps.index(r) for r in system.get_set(name).members])

    cidx = {c: i for i, c in enumerate(cells)}
    cost_row = [[float(costs.cost(r, c)) for c in cells] for r in reps]
    if grid.n_cells < n_total:
        raise Infeasible("grid smaller than element count")

    best_cost = None
    best_choice = None
    choice = [()] * len(reps)

    def rec(idx: int, free: tuple[CellId, ...], acc: float):
        nonlocal best_cost, best_choice
        if best_cost is not None and acc >= best_cost:
            return
        if idx == len(reps):
            for members in member_bits:
                mask = 0
                for mi in members:
                    for c in choice[mi]:
                        mask |= bit[c]
                if not connected(mask):
                    return
            best_cost = acc
            best_choice = list(choice)
            return
        row = cost_row[idx]
        for combo in itertools.combinations(free, alpha[idx]):
            choice[idx] = combo
            rest = tuple(c for c in free if c not in combo)
            rec(idx + 1, rest, acc + sum(row[cidx[c]] for c in combo))
        choice[idx] = ()

    rec(0, tuple(cells), 0.0)
    if best_choice is None:
        raise Infeasible("no contiguous assignment exists")
    rep_cells = {r: list(best_choice[i]) for i, r in enumerate(reps)}
    assignment = expand_embedding(contracted, rep_cells)
    return Embedding(assignment, {}), best_cost
