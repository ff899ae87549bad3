"""Integer-program construction for contiguous set-system embeddings.

The model places one binary x per (entity, cell).  Entities are the
contracted representatives, except that when a set's flow anchor is a
representative with multiplicity > 1 we peel a one-unit *center entity*
off it at build time: single-commodity flow needs a sink that absorbs
exactly n_i - 1 units at one cell, which a multi-cell representative
cannot provide.  The peel is invisible outside this module; decode
merges the pieces back before expansion.

Contiguity follows the flow formulation: per contiguity set an integer
flow y on directed grid edges, every occupied cell injects one unit,
the center cell drains all of them, and inflow caps keep flow off
unoccupied cells.  The perimeter variant swaps the cost objective for
maximizing shared-boundary indicators z.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import GridTooSmall, MissingCenter
from .grid import CellId, HostGrid, grid_centroid
from .setsystem import ContractedSystem

BINARY = "binary"
INTEGER = "integer"
CONTINUOUS = "continuous"

ASSIGNMENT_COST = "assignment_cost"
PERIMETER_BONUS = "perimeter_bonus"


@dataclass
class Variable:
    name: str
    kind: str
    lower: float
    upper: float


@dataclass
class Constraint:
    terms: list[tuple[int, float]]  # (variable handle, coefficient)
    sense: str  # "<=", ">=", "="
    rhs: float
    name: str = ""


@dataclass
class Objective:
    sense: str  # "min" | "max"
    terms: list[tuple[int, float]]


@dataclass
class EntityRec:
    id: str
    rep: str        # representative this entity carries costs of
    alpha: int      # cells this entity occupies


@dataclass
class AssignmentInfo:
    """Decode metadata attached to a built model."""
    contracted: ContractedSystem
    grid: HostGrid
    entities: list[EntityRec]
    x_vars: dict[tuple[str, CellId], int]
    y_vars: dict[tuple[str, CellId, CellId], int]
    z_vars: dict[tuple[str, CellId, CellId], int]
    contiguity_sets: tuple[str, ...]
    set_entities: dict[str, tuple[str, ...]]
    set_center_entity: dict[str, str]
    set_multiplicity: dict[str, int]


class MilpModel:
    """Order-preserving container for variables and linear constraints."""

    def __init__(self):
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective = Objective("min", [])
        self.var_index: dict[str, int] = {}
        self.info: AssignmentInfo | None = None

    def add_var(self, name: str, kind: str, lower: float = 0.0, upper: float = 1.0) -> int:
        name = _lp_token(name)
        if name in self.var_index:
            k = 2
            while f"{name}_{k}" in self.var_index:
                k += 1
            name = f"{name}_{k}"
        handle = len(self.variables)
        self.variables.append(Variable(name, kind, lower, upper))
        self.var_index[name] = handle
        return handle

    def add_constraint(self, terms, sense: str, rhs: float, name: str = "") -> int:
        if sense not in ("<=", ">=", "="):
            raise ValueError(f"bad sense {sense!r}")
        self.constraints.append(Constraint(list(terms), sense, rhs, name))
        return len(self.constraints) - 1

    def set_objective(self, sense: str, terms) -> None:
        if sense not in ("min", "max"):
            raise ValueError(f"bad objective sense {sense!r}")
        self.objective = Objective(sense, list(terms))

    # --- LP-format serialization ------------------------------------------

    def to_lp(self) -> str:
        lines = ["Maximize" if self.objective.sense == "max" else "Minimize"]
        lines.append(" obj: " + _term_string(self.objective.terms, self.variables))
        lines.append("Subject To")
        for i, con in enumerate(self.constraints):
            label = con.name or f"c{i + 1}"
            op = {"<=": "<=", ">=": ">=", "=": "="}[con.sense]
            lines.append(
                f" {label}: {_term_string(con.terms, self.variables)} {op} {_num(con.rhs)}")
        bounded = [v for v in self.variables
                   if v.kind != BINARY and not (v.lower == 0 and v.upper == 1)]
        if bounded:
            lines.append("Bounds")
            for v in bounded:
                lines.append(f" {_num(v.lower)} <= {v.name} <= {_num(v.upper)}")
        binaries = [v.name for v in self.variables if v.kind == BINARY]
        if binaries:
            lines.append("Binaries")
            lines.extend(f" {n}" for n in binaries)
        generals = [v.name for v in self.variables if v.kind == INTEGER]
        if generals:
            lines.append("Generals")
            lines.extend(f" {n}" for n in generals)
        lines.append("End")
        return "\n".join(lines) + "\n"


_TOKEN_RE = re.compile(r"[^A-Za-z0-9_.]")


def _lp_token(name: str) -> str:
    name = _TOKEN_RE.sub(".", name)
    if not name or name[0].isdigit() or name[0] == ".":
        name = "v" + name
    return name


def _num(v: float) -> str:
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def _term_string(terms, variables) -> str:
    if not terms:
        return "0 " + variables[0].name if variables else "0"
    parts = []
    for i, (h, coef) in enumerate(terms):
        mag = _num(abs(coef))
        tok = f"{mag} {variables[h].name}"
        if i == 0:
            parts.append(tok if coef >= 0 else f"- {tok}")
        else:
            parts.append(f"+ {tok}" if coef >= 0 else f"- {tok}")
    return " ".join(parts)


# --- cost tables ---------------------------------------------------------------

class CostTable:
    """Assignment cost w(s, v), either per element or shared across them."""

    def __init__(self, rows: Mapping[str, Mapping[CellId, float]] | None = None,
                 shared: Mapping[CellId, float] | None = None):
        if rows is None and shared is None:
            raise ValueError("cost table needs rows or a shared column")
        self.rows = dict(rows) if rows is not None else None
        self.shared = dict(shared) if shared is not None else None

    def cost(self, element_id: str, cell: CellId) -> float:
        if self.rows is not None and element_id in self.rows:
            return self.rows[element_id][cell]
        if self.shared is not None:
            return self.shared[cell]
        raise KeyError(f"no cost row for element {element_id!r}")


def _sq_dist(p: tuple[float, float], q: tuple[float, float]) -> float:
    dx = p[0] - q[0]
    dy = p[1] - q[1]
    return dx * dx + dy * dy


def eccentricity_costs(contracted: ContractedSystem, grid: HostGrid,
                       centers: Mapping[str, tuple[float, float]]) -> CostTable:
    """w(s, v) = sum of squared distances from v to the center of every
    set containing s.  Every set with members needs a center."""
    system = contracted.system
    for s in system.sets:
        if s.name not in centers:
            raise MissingCenter(f"no center supplied for set {s.name!r}")
    rows: dict[str, dict[CellId, float]] = {}
    for e in system.elements:
        sets_of_e = system.sets_containing(e.id)
        row = {}
        for v in grid.cells:
            p = grid.center[v]
            row[v] = sum(_sq_dist(p, centers[name]) for name in sets_of_e)
        rows[e.id] = row
    return CostTable(rows=rows)


def global_costs(grid: HostGrid) -> CostTable:
    """Element-independent pull toward the grid centroid."""
    mu = grid_centroid(grid)
    return CostTable(shared={v: _sq_dist(grid.center[v], mu) for v in grid.cells})


def initial_centers(grid: HostGrid, base_names: Sequence[str],
                    overlay_names: Sequence[str] = (),
                    epsilon: float = 0.01) -> dict[str, tuple[float, float]]:
    """Cold-start centers: base sets on a tiny k'-gon around the grid
    centroid (k' = number of base sets), overlays exactly at it."""
    mu = grid_centroid(grid)
    eps = epsilon * grid.cell_metrics.edge_length
    k = len(base_names)
    if k == 0:
        raise ValueError("need at least one base set")
    centers = {}
    for j, name in enumerate(base_names):
        ang = 2.0 * math.pi * j / k
        centers[name] = (mu[0] + eps * math.cos(ang), mu[1] + eps * math.sin(ang))
    for name in overlay_names:
        centers[name] = mu
    return centers


# --- model construction -----------------------------------------------------------

@dataclass
class ModelOptions:
    contiguity_sets: tuple[str, ...] | None = None  # None = every set
    objective_kind: str = ASSIGNMENT_COST


def build_assignment_model(contracted: ContractedSystem, grid: HostGrid,
                           costs: CostTable | None,
                           options: ModelOptions | None = None) -> MilpModel:
    """Assemble the assignment + contiguity program.

    Raises GridTooSmall when the grid cannot hold every original
    element, MissingCenter when a contiguity set has no recorded
    anchor.  Base sets must always be in the contiguity list.
    """
    options = options or ModelOptions()
    system = contracted.system
    all_names = [s.name for s in system.sets]
    if options.contiguity_sets is None:
        contiguity = tuple(all_names)
    else:
        contiguity = tuple(options.contiguity_sets)
        unknown = [n for n in contiguity if n not in all_names]
        if unknown:
            raise ValueError(f"contiguity sets not in system: {unknown}")
        missing_bases = [s.name for s in system.base_sets() if s.name not in contiguity]
        if missing_bases:
            raise ValueError(f"base sets must stay contiguous: {missing_bases}")
    if options.objective_kind == ASSIGNMENT_COST and costs is None:
        raise ValueError("assignment-cost objective needs a cost table")

    n_total = contracted.total_multiplicity()
    if grid.n_cells < n_total:
        raise GridTooSmall(
            f"{n_total} elements need at least {n_total} cells, grid has {grid.n_cells}")

    # entities: one per representative, plus peeled centers where needed
    entities: list[EntityRec] = [
        EntityRec(e.id, e.id, contracted.alpha[e.id]) for e in system.elements
    ]
    by_id = {ent.id: ent for ent in entities}
    member_entities: dict[str, list[str]] = {
        s.name: list(s.members) for s in system.sets
    }
    peeled: dict[str, str] = {}  # rep -> center entity id
    set_center_entity: dict[str, str] = {}
    for name in contiguity:
        rep = contracted.center_safe.get(name)
        if rep is None or rep not in by_id:
            raise MissingCenter(f"contiguity set {name!r} has no usable center")
        if by_id[rep].alpha == 1 and rep not in peeled:
            set_center_entity[name] = rep
            continue
        if rep not in peeled:
            ctr_id = rep + "__ctr"
            while ctr_id in by_id:
                ctr_id += "_"
            by_id[rep].alpha -= 1
            ctr = EntityRec(ctr_id, rep, 1)
            entities.append(ctr)
            by_id[ctr_id] = ctr
            peeled[rep] = ctr_id
            for s in system.sets_containing(rep):
                member_entities[s].append(ctr_id)
        set_center_entity[name] = peeled[rep]

    model = MilpModel()
    x_vars: dict[tuple[str, CellId], int] = {}
    for ent in entities:
        for v in grid.cells:
            x_vars[(ent.id, v)] = model.add_var(f"x_{ent.id}_{v}", BINARY)

    # each entity occupies exactly alpha cells
    for ent in entities:
        model.add_constraint(
            [(x_vars[(ent.id, v)], 1.0) for v in grid.cells], "=", float(ent.alpha),
            name=f"inject_{_lp_token(ent.id)}")
    # each cell hosts at most one entity
    for v in grid.cells:
        model.add_constraint(
            [(x_vars[(ent.id, v)], 1.0) for ent in entities], "<=", 1.0,
            name=f"occupy_{v}")

    undirected = grid.edges()
    set_multiplicity = {}
    y_vars: dict[tuple[str, CellId, CellId], int] = {}
    for name in contiguity:
        n_i = sum(by_id[e].alpha for e in member_entities[name])
        set_multiplicity[name] = n_i
        cap = float(n_i - 1)
        for u, v in undirected:
            y_vars[(name, u, v)] = model.add_var(f"y_{name}_{u}_{v}", INTEGER, 0.0, cap)
            y_vars[(name, v, u)] = model.add_var(f"y_{name}_{v}_{u}", INTEGER, 0.0, cap)
        members = member_entities[name]
        center = set_center_entity[name]
        for v in grid.cells:
            # outflow - inflow = occupancy, except the center drains everything
            coef: dict[int, float] = {}
            for w in grid.adjacency[v]:
                coef[y_vars[(name, v, w)]] = coef.get(y_vars[(name, v, w)], 0.0) + 1.0
                coef[y_vars[(name, w, v)]] = coef.get(y_vars[(name, w, v)], 0.0) - 1.0
            for e in members:
                h = x_vars[(e, v)]
                coef[h] = coef.get(h, 0.0) - 1.0
            hc = x_vars[(center, v)]
            coef[hc] = coef.get(hc, 0.0) + float(n_i)
            model.add_constraint(sorted(coef.items()), "=", 0.0,
                                 name=f"flow_{_lp_token(name)}_{v}")
        for v in grid.cells:
            terms = [(y_vars[(name, w, v)], 1.0) for w in grid.adjacency[v]]
            terms += [(x_vars[(e, v)], -cap) for e in members]
            model.add_constraint(terms, "<=", 0.0,
                                 name=f"cap_{_lp_token(name)}_{v}")

    model.info = AssignmentInfo(
        contracted=contracted, grid=grid, entities=entities,
        x_vars=x_vars, y_vars=y_vars, z_vars={},
        contiguity_sets=contiguity,
        set_entities={k: tuple(v) for k, v in member_entities.items()},
        set_center_entity=set_center_entity,
        set_multiplicity=set_multiplicity,
    )

    if options.objective_kind == PERIMETER_BONUS:
        add_perimeter_objective(model, grid)
    else:
        terms = []
        for ent in entities:
            for v in grid.cells:
                w = costs.cost(ent.rep, v)
                if w < 0:
                    raise ValueError(f"negative cost for ({ent.rep}, {v})")
                terms.append((x_vars[(ent.id, v)], float(w)))
        model.set_objective("min", terms)
    return model


def add_perimeter_objective(model: MilpModel, grid: HostGrid) -> MilpModel:
    """Replace the objective: maximize internal edges over every set.

    One binary z per (set, undirected edge), forced to 0 unless the set
    occupies both endpoints.  Maximizing total z minimizes total
    boundary length, since each internal edge removes two edge lengths
    of perimeter.
    """
    info = model.info
    if info is None:
        raise ValueError("model carries no assignment metadata")
    undirected = grid.edges()
    terms = []
    for s in info.contracted.system.sets:
        members = info.set_entities[s.name]
        for u, v in undirected:
            zh = model.add_var(f"z_{s.name}_{u}_{v}", BINARY)
            info.z_vars[(s.name, u, v)] = zh
            model.add_constraint(
                [(zh, 1.0)] + [(info.x_vars[(e, u)], -1.0) for e in members],
                "<=", 0.0, name=f"zu_{_lp_token(s.name)}_{u}_{v}")
            model.add_constraint(
                [(zh, 1.0)] + [(info.x_vars[(e, v)], -1.0) for e in members],
                "<=", 0.0, name=f"zv_{_lp_token(s.name)}_{u}_{v}")
            terms.append((zh, 1.0))
    model.set_objective("max", terms)
    return model
