"""Acceptance gates: one test per shipping criterion.

Each test prints exactly one `ACCEPTANCE nn PASS|FAIL` line on the
original stdout so the verdicts survive pytest's capture and land in
teed logs.  The two ten-minute-budget scale checks carry the `slow`
marker; everything else runs in seconds.
"""

import itertools
import math
import random
import time
from contextlib import contextmanager

import pytest

from mosaic.errors import GridTooSmall, Infeasible, NoIncumbent
from mosaic.grid import HEX, SQUARE, build_grid, grid_centroid, grid_size_for
from mosaic.metrics import is_contiguous, polsby_popper, region_geometry
from mosaic.milp import (
    CostTable,
    ModelOptions,
    build_assignment_model,
    eccentricity_costs,
    initial_centers,
)
from mosaic.render import export_gallery, render_map
from mosaic.setsystem import contract_indistinguishable, identity_contraction
from mosaic.solver import (
    INFEASIBLE,
    OPTIMAL,
    PipelineOptions,
    ScipyMilpBackend,
    SolverConfig,
    brute_force_embed,
    decode,
    run_mse,
    run_msea,
    run_msp,
    run_relaxed,
)
from mosaic.synth import synth_system

from conftest import (
    assert_connected_sets,
    connected_cells,
    make_system,
    region_cells,
    seven_star,
)


def _say(capsys, num: int, verdict: str, text: str) -> None:
    with capsys.disabled():  # verdicts must reach the terminal, not the capture
        print(f"\nACCEPTANCE {num:02d} {verdict}: {text}", flush=True)


@contextmanager
def gate(capsys, num: int, text: str):
    """Print the one-line verdict for a criterion, pass or fail."""
    try:
        yield
    except BaseException:
        _say(capsys, num, "FAIL", text)
        raise
    _say(capsys, num, "PASS", text)


def exact_backend():
    return ScipyMilpBackend(SolverConfig(relative_gap=0.0))


def component_count(grid, cells) -> int:
    left = set(cells)
    count = 0
    while left:
        count += 1
        queue = [min(left)]
        left.discard(queue[0])
        while queue:
            c = queue.pop()
            for w in grid.adjacency[c]:
                if w in left:
                    left.discard(w)
                    queue.append(w)
    return count


# --- shared scale fixtures (71 elements, 4 bases, 3 overlays) --------------------

@pytest.fixture(scope="module")
def vienna():
    system = synth_system("vienna", seed=0)
    grid = build_grid(HEX, *grid_size_for(len(system.elements)))
    return system, contract_indistinguishable(system), grid


@pytest.fixture(scope="module")
def vienna_mse(vienna):
    _system, contracted, grid = vienna
    backend = ScipyMilpBackend(SolverConfig(relative_gap=0.005))
    t0 = time.perf_counter()
    embedding, report = run_mse(contracted, grid, backend)
    return embedding, report, time.perf_counter() - t0


# --- criterion 1 -----------------------------------------------------------------

def _random_instance(rng: random.Random):
    n = rng.randint(2, 7)
    ids = [f"e{i}" for i in range(n)]
    n_base = rng.randint(1, 2)
    bases = {f"B{j}": [ids[j]] for j in range(n_base)}
    for eid in ids[n_base:]:
        bases[f"B{rng.randrange(n_base)}"].append(eid)
    overlays = {}
    if rng.random() < 0.6:
        overlays["P"] = sorted(rng.sample(ids, rng.randint(1, n)))
    system = make_system(bases, overlays)

    if rng.random() < 0.8:  # mostly grids large enough to be feasible
        options = [(r, c) for r, c in ((2, 2), (2, 3), (3, 3)) if r * c >= n]
        rows, cols = rng.choice(options or [(3, 3)])
    else:
        rows, cols = rng.choice([(1, 2), (2, 2), (1, 3)])
    kind = HEX if rng.random() < 0.5 else SQUARE
    grid = build_grid(kind, rows, cols)
    return system, grid


def test_criterion_01_oracle_equivalence(capsys):
    text = ("100 seeded random instances: exact MILP solve matches the "
            "exhaustive oracle's objective within 1e-6 and agrees on "
            "feasibility, in under 2 minutes")
    with gate(capsys, 1, text):
        rng = random.Random(20260815)
        backend = exact_backend()
        t0 = time.perf_counter()
        feasible = infeasible = 0
        for _ in range(100):
            system, grid = _random_instance(rng)
            contracted = contract_indistinguishable(system)
            assert len(contracted.system.elements) <= 6
            costs = CostTable(rows={
                e.id: {v: rng.randint(0, 12) / 4 for v in grid.cells}
                for e in contracted.system.elements})
            try:
                _, oracle_cost = brute_force_embed(contracted, grid, costs)
            except Infeasible:
                oracle_cost = None

            try:
                model = build_assignment_model(contracted, grid, costs,
                                               ModelOptions())
            except GridTooSmall:
                # the builder refuses undersized grids outright; the oracle
                # reports the same situation as infeasible
                assert oracle_cost is None
                infeasible += 1
                continue
            outcome = backend.solve(model)
            if oracle_cost is None:
                assert outcome.status == INFEASIBLE, outcome.status
                infeasible += 1
            else:
                assert outcome.status == OPTIMAL, outcome.status
                assert outcome.objective == pytest.approx(oracle_cost, abs=1e-6)
                embedding = decode(model, outcome.values)
                assert_connected_sets(system, grid, embedding,
                                      [s.name for s in system.sets])
                feasible += 1
        assert feasible >= 50 and infeasible >= 5, (feasible, infeasible)
        assert time.perf_counter() - t0 < 120.0


# --- criterion 2 -----------------------------------------------------------------

def test_criterion_02_contiguity_invariant(capsys):
    text = ("every pipeline embedding has BFS-connected regions: all sets "
            "under MSP/MSE/MSEA, base sets under relaxation")
    with gate(capsys, 2, text):
        sys_ = make_system({"B1": ["a", "b", "c"], "B2": ["d", "e", "f"]},
                           {"P": ["c", "d"]})
        contracted = contract_indistinguishable(sys_)
        all_names = [s.name for s in sys_.sets]
        base_names = [s.name for s in sys_.base_sets()]
        for kind in (SQUARE, HEX):
            grid = build_grid(kind, 3, 3)
            for runner in (run_msp, run_mse, run_msea):
                embedding, _ = runner(contracted, grid, exact_backend())
                assert_connected_sets(sys_, grid, embedding, all_names)
            embedding, _ = run_relaxed(contracted, grid, exact_backend())
            assert_connected_sets(sys_, grid, embedding, base_names)


# --- criterion 3 -----------------------------------------------------------------

def test_criterion_03_seven_star_infeasibility(capsys):
    text = ("the seven-star instance is infeasible under full contiguity on "
            "every oracle-sized grid (solver and oracle agree) yet solvable "
            "under relaxation")
    with gate(capsys, 3, text):
        system = seven_star()
        contracted = contract_indistinguishable(system)
        for kind, rows, cols in ((SQUARE, 3, 3), (HEX, 3, 3), (SQUARE, 2, 4)):
            grid = build_grid(kind, rows, cols)
            with pytest.raises(Infeasible):
                run_mse(contracted, grid, exact_backend())
            costs = CostTable(shared={v: 0.0 for v in grid.cells})
            with pytest.raises(Infeasible):
                brute_force_embed(contracted, grid, costs)
            embedding, _ = run_relaxed(contracted, grid, exact_backend())
            assert_connected_sets(system, grid, embedding, ["core"])
            assert set(embedding.flows) == {"core"}


# --- criterion 4 -----------------------------------------------------------------

def test_criterion_04_compactness_formulas(capsys):
    text = ("Polsby-Popper equals pi/4 for a unit square, pi*sqrt(3)/6 for a "
            "unit hexagon, pi/4 for a 2x2 square block (1e-12)")
    with gate(capsys, 4, text):
        square = build_grid(SQUARE, 1, 1)
        assert polsby_popper(region_geometry(square, [0])) == \
            pytest.approx(math.pi / 4, abs=1e-12)
        hexa = build_grid(HEX, 1, 1)
        assert polsby_popper(region_geometry(hexa, [0])) == \
            pytest.approx(math.pi * math.sqrt(3) / 6, abs=1e-12)
        block = build_grid(SQUARE, 2, 2)
        assert polsby_popper(region_geometry(block, [0, 1, 2, 3])) == \
            pytest.approx(math.pi / 4, abs=1e-12)


# --- criterion 5 -----------------------------------------------------------------

def _max_internal_edges_by_enumeration(grid, sizes):
    """Best total of within-region edges over all disjoint contiguous
    placements of regions with the given cardinalities."""
    def internal(cellset):
        return sum(1 for u in cellset for w in grid.adjacency[u]
                   if w in cellset) // 2

    best = -1

    def rec(idx, free, acc):
        nonlocal best
        if idx == len(sizes):
            best = max(best, acc)
            return
        for combo in itertools.combinations(sorted(free), sizes[idx]):
            chosen = set(combo)
            if not is_contiguous(grid, chosen):
                continue
            rec(idx + 1, free - chosen, acc + internal(chosen))

    rec(0, set(grid.cells), 0)
    return best


def test_criterion_05_perimeter_objective(capsys):
    text = ("MSP's optimum equals the exhaustively enumerated maximum of "
            "internal edges, and total region perimeter equals "
            "cells*cell_perimeter - 2*internal_edges")
    with gate(capsys, 5, text):
        cases = [
            (SQUARE, 3, 3, [4], 4),
            (SQUARE, 2, 2, [3], 2),
            (HEX, 2, 2, [3], 3),
            (SQUARE, 3, 3, [2, 3], None),
        ]
        for kind, rows, cols, sizes, frozen in cases:
            grid = build_grid(kind, rows, cols)
            expected = _max_internal_edges_by_enumeration(grid, sizes)
            if frozen is not None:
                assert expected == frozen
            names = [f"B{j}" for j in range(len(sizes))]
            counter = itertools.count()
            system = make_system({
                name: [f"e{next(counter)}" for _ in range(size)]
                for name, size in zip(names, sizes)})
            contracted = contract_indistinguishable(system)
            embedding, report = run_msp(contracted, grid, exact_backend())
            assert report.final_objective == pytest.approx(expected, abs=1e-9)

            cp = grid.cell_metrics.cell_perimeter
            el = grid.cell_metrics.edge_length
            total = sum(
                region_geometry(grid, region_cells(system, embedding, n)).perimeter
                for n in names)
            assert total == pytest.approx(
                sum(sizes) * cp - 2.0 * report.final_objective * el, abs=1e-9)


# --- criterion 6 -----------------------------------------------------------------

def _duplicate_prone_instance(rng: random.Random):
    n = rng.randint(4, 7)
    ids = [f"e{i}" for i in range(n)]
    n_base = rng.randint(1, 2)
    bases = {f"B{j}": [ids[j]] for j in range(n_base)}
    for eid in ids[n_base:]:
        bases[f"B{rng.randrange(n_base)}"].append(eid)
    overlays = {}
    if rng.random() < 0.5:
        overlays["P"] = sorted(rng.sample(ids, rng.randint(1, 2)))
    return make_system(bases, overlays)


def test_criterion_06_contraction_equivalence(capsys):
    text = ("50 duplicate-heavy instances: contracted and uncontracted "
            "models reach equal optima within 1e-6 under identical "
            "signature-invariant costs")
    with gate(capsys, 6, text):
        rng = random.Random(6)
        backend = exact_backend()
        shrunk = 0
        for i in range(50):
            system = _duplicate_prone_instance(rng)
            grid = build_grid(HEX if i % 2 else SQUARE, 3, 3)
            contracted = contract_indistinguishable(system)
            identity = identity_contraction(system)
            if len(contracted.system.elements) < len(system.elements):
                shrunk += 1
            centers = initial_centers(
                grid, [s.name for s in system.base_sets()],
                [s.name for s in system.overlay_sets()])
            outcomes = []
            for variant in (contracted, identity):
                model = build_assignment_model(
                    variant, grid, eccentricity_costs(variant, grid, centers),
                    ModelOptions())
                outcomes.append(backend.solve(model))
            assert outcomes[0].status == outcomes[1].status
            assert outcomes[0].status == OPTIMAL
            assert outcomes[0].objective == \
                pytest.approx(outcomes[1].objective, abs=1e-6)
        assert shrunk >= 15, shrunk


# --- criterion 7 -----------------------------------------------------------------

@pytest.mark.slow
def test_criterion_07_scale_behavior(capsys, vienna, vienna_mse):
    text = ("71-element profile: MSE at 0.5% gap within 10 minutes; MSEA's "
            "occupied cells frozen across iterations; MSP capped at 10 "
            "minutes keeps an incumbent with a positive gap")
    with gate(capsys, 7, text):
        system, contracted, grid = vienna
        all_names = [s.name for s in system.sets]

        embedding, report, wall = vienna_mse
        assert wall <= 600.0
        assert len(embedding.assignment) == len(system.elements)
        assert_connected_sets(system, grid, embedding, all_names)
        assert all(rec.gap <= 0.005 + 1e-9 for rec in report.iterations)

        backend = ScipyMilpBackend(SolverConfig(relative_gap=0.005))
        t0 = time.perf_counter()
        emb_a, rep_a = run_msea(contracted, grid, backend)
        assert time.perf_counter() - t0 <= 600.0
        occupied = {tuple(rec.occupied) for rec in rep_a.iterations}
        assert len(occupied) == 1
        assert set(emb_a.assignment.values()) == set(next(iter(occupied)))
        assert_connected_sets(system, grid, emb_a, all_names)

        capped = ScipyMilpBackend(SolverConfig(relative_gap=0.005,
                                               time_limit=600.0))
        t0 = time.perf_counter()
        emb_p, rep_p = run_msp(contracted, grid, capped)
        msp_wall = time.perf_counter() - t0
        assert msp_wall <= 700.0, msp_wall
        assert len(emb_p.assignment) == len(system.elements)
        assert_connected_sets(system, grid, emb_p, all_names)
        assert rep_p.iterations[-1].gap > 0.0
        assert rep_p.final_objective > 0.0


# --- criterion 8 -----------------------------------------------------------------

@pytest.mark.slow
def test_criterion_08_relaxation_scaling(capsys):
    text = ("178-element profile with 8 overlays: relaxed variant solves "
            "within 10 minutes; the fully constrained variant may exhaust "
            "its cap without an incumbent but must not claim infeasibility")
    with gate(capsys, 8, text):
        system = synth_system("parliament", seed=0, n_overlays=8)
        contracted = contract_indistinguishable(system)
        grid = build_grid(HEX, *grid_size_for(len(system.elements)))
        base_names = [s.name for s in system.base_sets()]

        backend = ScipyMilpBackend(SolverConfig(relative_gap=0.005,
                                                time_limit=600.0))
        t0 = time.perf_counter()
        embedding, _report = run_relaxed(contracted, grid, backend)
        assert time.perf_counter() - t0 <= 600.0
        assert set(embedding.flows) == set(base_names)
        assert len(embedding.assignment) == len(system.elements)
        assert_connected_sets(system, grid, embedding, base_names)

        t0 = time.perf_counter()
        try:
            full, _ = run_mse(contracted, grid, backend,
                              PipelineOptions(max_iterations=1))
        except NoIncumbent:
            pass  # ran out of budget with nothing integral: acceptable
        except Infeasible as exc:  # a wrong infeasibility claim must fail
            raise AssertionError(f"full variant claimed infeasible: {exc}")
        else:
            assert_connected_sets(system, grid, full,
                                  [s.name for s in system.sets])
        assert time.perf_counter() - t0 <= 900.0


# --- criterion 9 -----------------------------------------------------------------

def test_criterion_09_iteration_protocol(capsys, vienna, vienna_mse):
    text = ("MSE runs exactly 5 iterations unless centers converge earlier, "
            "starting from k'-gon base centers with overlays at the grid "
            "centroid")
    with gate(capsys, 9, text):
        system, _contracted, grid = vienna
        embedding, report, _wall = vienna_mse
        opts = PipelineOptions()

        if len(report.iterations) < opts.max_iterations:
            # early stop is only legal once centers stopped moving: the
            # final regions' centroids must match the centers last used
            last = report.iterations[-1].centers
            for s in system.sets:
                cells = region_cells(system, embedding, s.name)
                cx = sum(grid.center[c][0] for c in cells) / len(cells)
                cy = sum(grid.center[c][1] for c in cells) / len(cells)
                assert math.dist(last[s.name], (cx, cy)) < opts.convergence_tol
        else:
            assert len(report.iterations) == 5

        base_names = [s.name for s in system.base_sets()]
        over_names = [s.name for s in system.overlay_sets()]
        expect = initial_centers(grid, base_names, over_names, opts.epsilon)
        first = report.iterations[0].centers
        assert set(first) == set(expect)
        for name, point in expect.items():
            assert first[name] == pytest.approx(point, abs=0.0)
        mu = grid_centroid(grid)
        for name in over_names:
            assert first[name] == pytest.approx(mu, abs=0.0)


# --- criterion 10 ----------------------------------------------------------------

def test_criterion_10_rendering_fidelity(capsys, tmp_path):
    text = ("rendered SVGs carry one polygon per element, one boundary path "
            "per region component, one kelp circle per occupied cell, and "
            "repeated runs are byte-identical")
    with gate(capsys, 10, text):
        system = synth_system("random", seed=7, n_elements=10, n_base=2,
                              n_overlays=2)
        contracted = contract_indistinguishable(system)
        grid = build_grid(HEX, *grid_size_for(len(system.elements)))
        backend = ScipyMilpBackend(SolverConfig())
        over_names = [s.name for s in system.overlay_sets()]

        embedding, _ = run_mse(contracted, grid, backend)
        doc = render_map(embedding, system, grid)
        svg = doc.to_svg()
        assert svg.count('<polygon id="cell_') == len(system.elements)
        for name in over_names:
            cells = region_cells(system, embedding, name)
            assert len(doc.overlay_layers[name]) == component_count(grid, cells)

        kelp = render_map(embedding, system, grid, kelp=True)
        for name in over_names:
            circles = sum(1 for f in kelp.overlay_layers[name] if "<circle" in f)
            assert circles == len(region_cells(system, embedding, name))

        # relaxed embeddings may split overlays; path counts must follow
        relaxed, _ = run_relaxed(contracted, grid, backend)
        rdoc = render_map(relaxed, system, grid)
        for name in over_names:
            cells = region_cells(system, relaxed, name)
            assert len(rdoc.overlay_layers[name]) == component_count(grid, cells)

        assert render_map(embedding, system, grid).to_svg() == svg
        assert render_map(embedding, system, grid, kelp=True).to_svg() == \
            kelp.to_svg()
        export_gallery(embedding, system, grid, out_dir=tmp_path / "a")
        files = export_gallery(embedding, system, grid, out_dir=tmp_path / "b")
        for path in files:
            twin = tmp_path / "a" / path.name
            assert path.read_bytes() == twin.read_bytes()
