"""Command-line pipeline: synth, embed, metrics, render, compare.

Exit codes: 0 success, 2 bad input (files, flags, unknown sets), 3
infeasible model, 4 solver failure.  All outputs are UTF-8 JSON, CSV,
SVG, or HTML files under --out.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from .errors import (
    CardinalityMismatch,
    DuplicateId,
    Infeasible,
    MalformedInput,
    MissingFlows,
    MosaicError,
    NoIncumbent,
    NonIntegralSolution,
    OccupancyViolation,
    PaletteExhausted,
    PartitionViolation,
    SolverError,
    UnknownElement,
    UnknownSet,
)
from .grid import build_grid, grid_size_for
from .metrics import is_contiguous, metrics_report
from .render import StyleSheet, export_gallery, render_map
from .setsystem import (
    SetSystem,
    contract_indistinguishable,
    parse_set_system,
    parse_set_system_json,
)
from .solver import (
    Embedding,
    PipelineOptions,
    SolverConfig,
    get_backend,
    run_mse,
    run_msea,
    run_msp,
    run_relaxed,
)
from .synth import PROFILES, synth_documents, synth_system

EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4

INPUT_ERRORS = (MalformedInput, DuplicateId, UnknownElement, PartitionViolation,
                UnknownSet, CardinalityMismatch, MissingFlows, PaletteExhausted,
                ValueError, OSError, json.JSONDecodeError)
SOLVER_ERRORS = (SolverError, NoIncumbent, NonIntegralSolution, OccupancyViolation)

PIPELINES = {"msp": run_msp, "mse": run_mse, "msea": run_msea, "relaxed": run_relaxed}


@dataclass
class RunConfig:
    grid_kind: str = "hex"
    variant: str = "mse"
    max_iterations: int = 5
    gap: float = 0.005
    time_limit: float | None = None
    seed: int = 0
    epsilon: float = 0.01
    grid_size: tuple[int, int] | None = None
    out: str = "."

    def validate(self):
        if not 0 <= self.gap < 1:
            raise ValueError(f"gap must lie in [0, 1), got {self.gap}")
        if self.max_iterations < 1:
            raise ValueError("iterations must be >= 1")


def _die(code: int, exc: BaseException):
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _read_system(elements_file: str, overlays_file: str | None) -> SetSystem:
    text = Path(elements_file).read_text(encoding="utf-8")
    if elements_file.endswith(".json"):
        return parse_set_system_json(text)
    overlays = ""
    if overlays_file:
        overlays = Path(overlays_file).read_text(encoding="utf-8")
    return parse_set_system(text, overlays)


def _parse_grid_size(text: str) -> tuple[int, int]:
    try:
        rows, cols = text.lower().split("x")
        return int(rows), int(cols)
    except ValueError:
        raise ValueError(f"--grid-size wants ROWSxCOLS, got {text!r}") from None


def _solve(system: SetSystem, config: RunConfig):
    contracted = contract_indistinguishable(system)
    if config.grid_size:
        rows, cols = config.grid_size
    else:
        rows, cols = grid_size_for(len(system.elements))
    grid = build_grid(config.grid_kind, rows, cols)
    backend = get_backend(SolverConfig(
        relative_gap=config.gap, time_limit=config.time_limit, seed=config.seed))
    options = PipelineOptions(max_iterations=config.max_iterations,
                              epsilon=config.epsilon)
    embedding, report = PIPELINES[config.variant](contracted, grid, backend, options)
    return grid, embedding, report


def _embedding_payload(system: SetSystem, grid, embedding: Embedding,
                       config: RunConfig) -> dict:
    base_of = {}
    for s in system.base_sets():
        for m in s.members:
            base_of[m] = s.name
    return {
        "grid": {"kind": grid.kind, "rows": grid.rows, "cols": grid.cols},
        "elements": [
            {"id": e.id, "label": e.label, "base": base_of[e.id]}
            for e in system.elements
        ],
        "overlays": {s.name: list(s.members) for s in system.overlay_sets()},
        "assignment": dict(embedding.assignment),
        "flows": {k: [list(t) for t in v] for k, v in embedding.flows.items()},
        "contiguity": sorted(embedding.flows),
        "variant": config.variant,
        "seed": config.seed,
    }


def load_embedding(path: str):
    """Read an embedding file back into (system, grid, Embedding, meta)."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("grid", "elements", "assignment"):
        if key not in data:
            raise MalformedInput(f"embedding file lacks {key!r}")
    system = parse_set_system_json(json.dumps(
        {"elements": data["elements"], "overlays": data.get("overlays", {})}))
    gspec = data["grid"]
    grid = build_grid(gspec["kind"], int(gspec["rows"]), int(gspec["cols"]))
    raw = data["assignment"]
    ids = set(system.element_ids())
    if set(raw) != ids:
        raise MalformedInput("assignment does not cover the elements exactly")
    assignment = {}
    seen = {}
    for eid, cell in raw.items():
        cell = int(cell)
        if not grid.contains(cell):
            raise MalformedInput(f"assignment sends {eid!r} to unknown cell {cell}")
        if cell in seen:
            raise MalformedInput(
                f"cell {cell} assigned to both {seen[cell]!r} and {eid!r}")
        seen[cell] = eid
        assignment[eid] = cell
    flows = {
        name: [(int(u), int(v), int(a)) for u, v, a in edges]
        for name, edges in data.get("flows", {}).items()
    }
    meta = {"variant": data.get("variant", ""), "seed": data.get("seed", 0),
            "contiguity": list(data.get("contiguity", []))}
    return system, grid, Embedding(assignment, flows), meta


@click.group()
def main():
    """Embed set systems into grids and draw them."""


@main.command()
@click.argument("elements_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("overlays_file", required=False,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--grid", "grid_kind", type=click.Choice(["hex", "square"]),
              default="hex", show_default=True)
@click.option("--variant", type=click.Choice(sorted(PIPELINES)), default="mse",
              show_default=True)
@click.option("--gap", type=float, default=0.005, show_default=True,
              help="relative MIP gap")
@click.option("--iterations", type=int, default=5, show_default=True)
@click.option("--time-limit", type=float, default=None, help="seconds per solve")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--grid-size", default=None, help="ROWSxCOLS override")
@click.option("--epsilon", type=float, default=0.01, show_default=True,
              help="initial-center polygon radius, in edge lengths")
@click.option("--out", default=".", type=click.Path(file_okay=False))
def embed(elements_file, overlays_file, grid_kind, variant, gap, iterations,
          time_limit, seed, grid_size, epsilon, out):
    """Solve an embedding for ELEMENTS_FILE (+ optional OVERLAYS_FILE)."""
    try:
        config = RunConfig(grid_kind=grid_kind, variant=variant,
                           max_iterations=iterations, gap=gap,
                           time_limit=time_limit, seed=seed, epsilon=epsilon,
                           grid_size=_parse_grid_size(grid_size) if grid_size else None,
                           out=out)
        config.validate()
        system = _read_system(elements_file, overlays_file)
    except INPUT_ERRORS as exc:
        _die(EXIT_INPUT, exc)
    try:
        grid, embedding, report = _solve(system, config)
    except Infeasible as exc:
        _die(EXIT_INFEASIBLE, exc)
    except SOLVER_ERRORS as exc:
        _die(EXIT_SOLVER, exc)
    except INPUT_ERRORS as exc:
        _die(EXIT_INPUT, exc)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    emb_path = out_dir / "embedding.json"
    emb_path.write_text(
        json.dumps(_embedding_payload(system, grid, embedding, config), indent=2),
        encoding="utf-8")
    rep_path = out_dir / "report.json"
    payload = report.to_json()
    payload.update({"seed": seed, "gap": gap,
                    "grid": {"kind": grid.kind, "rows": grid.rows, "cols": grid.cols}})
    rep_path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    click.echo(f"wrote {emb_path} and {rep_path} "
               f"(objective {report.final_objective:.6f}, "
               f"{len(report.iterations)} iteration(s))")


@main.command()
@click.argument("embedding_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--style", type=click.Choice(["boundary", "kelp"]),
              default="boundary", show_default=True)
@click.option("--select", default=None, help="comma-separated overlay names")
@click.option("--gallery", is_flag=True)
@click.option("--cell-spacing", type=float, default=None)
@click.option("--boundary-thickness", type=float, default=None)
@click.option("--scale", type=float, default=None, help="pixels per layout unit")
@click.option("--out", default=".", type=click.Path(file_okay=False))
def render(embedding_file, style, select, gallery, cell_spacing,
           boundary_thickness, scale, out):
    """Draw an embedding produced by `embed`."""
    try:
        system, grid, embedding, _meta = load_embedding(embedding_file)
        overrides = {}
        if cell_spacing is not None:
            overrides["cell_spacing"] = cell_spacing
        if boundary_thickness is not None:
            overrides["boundary_thickness"] = boundary_thickness
        if scale is not None:
            overrides["scale"] = scale
        sheet = StyleSheet(**overrides)
        selected = [s.strip() for s in select.split(",")] if select else None
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if gallery:
            files = export_gallery(embedding, system, grid, sheet, out_dir,
                                   selected=selected, kelp=style == "kelp")
            click.echo("wrote " + ", ".join(str(p) for p in files))
            return
        doc = render_map(embedding, system, grid, sheet, selected=selected,
                         kelp=style == "kelp")
        path = out_dir / "map.svg"
        path.write_text(doc.to_svg(), encoding="utf-8")
        for w in doc.warnings:
            click.echo(f"warning: {w}", err=True)
        click.echo(f"wrote {path}")
    except INPUT_ERRORS as exc:
        _die(EXIT_INPUT, exc)


@main.command()
@click.argument("embedding_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]),
              default="json", show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="write here instead of stdout")
def metrics(embedding_file, fmt, out):
    """Compactness scores and per-set geometry for an embedding."""
    try:
        system, grid, embedding, meta = load_embedding(embedding_file)
        broken = [name for name in meta["contiguity"]
                  if not is_contiguous(
                      grid, {embedding.assignment[m]
                             for m in system.get_set(name).members})]
        if broken:
            raise MalformedInput(
                f"embedding violates contiguity for: {', '.join(broken)}")
        report = metrics_report(embedding.assignment, system, grid)
        report["variant"] = meta["variant"]
        sibling = Path(embedding_file).with_name("report.json")
        if sibling.exists():
            solve = json.loads(sibling.read_text(encoding="utf-8"))
            report["total_wall_time"] = solve.get("total_wall_time")
            report["iterations"] = len(solve.get("iterations", []))
    except INPUT_ERRORS as exc:
        _die(EXIT_INPUT, exc)
    if fmt == "json":
        text = json.dumps(report, indent=2)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["set", "kind", "cells", "area", "perimeter", "components",
                    "polsby_popper"])
        for row in report["sets"]:
            w.writerow([row["set"], row["kind"], row["cells"], f"{row['area']:.6f}",
                        f"{row['perimeter']:.6f}", row["components"],
                        f"{row['polsby_popper']:.6f}"])
        for key in ("pp_c1", "pp_c2", "pp_c3"):
            w.writerow([key, "aggregate", "", "", "", "", f"{report[key]:.6f}"])
        text = buf.getvalue()
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text)


@main.command()
@click.argument("profile", type=click.Choice(sorted(PROFILES) + ["random"]))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--elements", "n_elements", type=int, default=None)
@click.option("--base-sets", "n_base", type=int, default=None)
@click.option("--overlays", "n_overlays", type=int, default=None)
@click.option("--out", default=".", type=click.Path(file_okay=False))
def synth(profile, seed, n_elements, n_base, n_overlays, out):
    """Generate a synthetic instance with a profile's dimensions."""
    try:
        system = synth_system(profile, seed, n_elements=n_elements,
                              n_base=n_base, n_overlays=n_overlays)
    except INPUT_ERRORS as exc:
        _die(EXIT_INPUT, exc)
    elements_doc, overlays_doc = synth_documents(system)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    epath = out_dir / "elements.csv"
    opath = out_dir / "overlays.csv"
    epath.write_text(elements_doc, encoding="utf-8")
    opath.write_text(overlays_doc, encoding="utf-8")
    click.echo(f"wrote {epath} and {opath} "
               f"({len(system.elements)} elements, "
               f"{len(system.base_sets())} base sets, "
               f"{len(system.overlay_sets())} overlays)")


@main.command()
@click.argument("elements_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("overlays_file", required=False,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--gap", type=float, default=0.005, show_default=True)
@click.option("--iterations", type=int, default=5, show_default=True)
@click.option("--time-limit", type=float, default=600.0, show_default=True,
              help="cap for each variant's solves")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--grid-size", default=None, help="ROWSxCOLS override")
@click.option("--out", default=".", type=click.Path(file_okay=False))
def compare(elements_file, overlays_file, gap, iterations, time_limit, seed,
            grid_size, out):
    """Run MSP, MSE and MSEA on both grid kinds; tabulate compactness."""
    try:
        system = _read_system(elements_file, overlays_file)
        size = _parse_grid_size(grid_size) if grid_size else None
    except INPUT_ERRORS as exc:
        _die(EXIT_INPUT, exc)
    from .metrics import pp_scores  # local import keeps the header tidy

    rows = []
    for variant in ("msp", "mse", "msea"):
        for kind in ("hex", "square"):
            config = RunConfig(grid_kind=kind, variant=variant,
                               max_iterations=iterations, gap=gap,
                               time_limit=time_limit, seed=seed, grid_size=size)
            row = {"variant": variant, "grid": kind, "pp_c1": "", "pp_c2": "",
                   "pp_c3": "", "wall_time": "", "gap": "", "note": ""}
            try:
                grid, embedding, report = _solve(system, config)
                scores = pp_scores(embedding.assignment, system, grid)
                row.update({k: f"{v:.6f}" for k, v in scores.items()})
                row["wall_time"] = f"{report.total_wall_time:.3f}"
                row["gap"] = f"{report.iterations[-1].gap:.6f}"
            except MosaicError as exc:
                row["note"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
            click.echo("  ".join(str(row[k]) for k in
                                 ("variant", "grid", "pp_c1", "pp_c2", "pp_c3",
                                  "wall_time", "gap", "note")).rstrip())
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "compare.csv"
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["variant", "grid", "pp_c1", "pp_c2",
                                           "pp_c3", "wall_time", "gap", "note"],
                           lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
