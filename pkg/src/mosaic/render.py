"""SVG rendering: tessellation base map, overlay styles, labels, gallery.

Two overlay styles.  *Boundary* traces each set's cell union and draws
a closed path just inside it; where several sets run along the same
segment, later sets (in overlay order) step further inward by one
boundary thickness each, and their color darkens one gradient step per
position.  *Kelp* draws filled circles on the set's cells and thick
segments along its positive flow edges, shrinking both where sets
share a node or edge so everything stays visible.

All geometry is computed in layout units and scaled to pixels at the
end; rendering is purely functional, so identical inputs give
byte-identical documents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .errors import IoError, MissingFlows, PaletteExhausted, UnknownSet
from .grid import HEX, SQRT3, CellId, HostGrid, cell_polygon
from .setsystem import SetSystem

Point = tuple[float, float]

# 8 light fills for base sets, 8 saturated strokes for overlays
BASE_PALETTE = (
    "#f5c8c2", "#c7e0f4", "#d6e9b8", "#fae3ac",
    "#e4d3f2", "#c4ecdf", "#f6d4e4", "#e4e0cb",
)
OVERLAY_PALETTE = (
    "#d62748", "#2860d8", "#1e9641", "#f07800",
    "#8522cc", "#00999e", "#b8a000", "#d42ba2",
)


@dataclass(frozen=True)
class StyleSheet:
    cell_spacing: float = 0.06          # gap between cells, in edge lengths
    boundary_thickness: float = 0.05    # boundary stroke width, in edge lengths
    base_palette: tuple[str, ...] = BASE_PALETTE
    overlay_palette: tuple[str, ...] = OVERLAY_PALETTE
    font_max: float = 13.0              # px
    font_min: float = 6.0
    font_family: str = "Helvetica, Arial, sans-serif"
    overlay_order: tuple[str, ...] | None = None  # None = declaration order
    gradient_steps: int = 3
    scale: float = 42.0                 # px per layout unit
    margin: float = 1.0                 # layout units around the lattice
    kelp_radius: float = 0.30           # circle radius, in edge lengths
    kelp_thickness: float = 0.42        # segment width, in edge lengths
    delimiters: str = "-/"

    def __post_init__(self):
        if not 0 <= self.cell_spacing < 1:
            raise ValueError("cell_spacing must lie in [0, 1) edge lengths")
        if self.boundary_thickness <= 0:
            raise ValueError("boundary_thickness must be positive")
        if not self.font_max >= self.font_min > 0:
            raise ValueError("need font_max >= font_min > 0")
        if self.gradient_steps < 0:
            raise ValueError("gradient_steps must be nonnegative")


def _fmt(v: float) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def _darken(color: str, level: int) -> str:
    """Reduce brightness by 12% per level."""
    f = max(0.0, 1.0 - 0.12 * level)
    r = round(int(color[1:3], 16) * f)
    g = round(int(color[3:5], 16) * f)
    b = round(int(color[5:7], 16) * f)
    return f"#{r:02x}{g:02x}{b:02x}"


class SvgDocument:
    """Layered SVG under construction; to_svg() assembles the file."""

    def __init__(self, system: SetSystem, grid: HostGrid, style: StyleSheet,
                 assignment: dict[str, CellId], flows: dict):
        self.system = system
        self.grid = grid
        self.style = style
        self.assignment = dict(assignment)
        self.flows = {k: list(v) for k, v in flows.items()}
        self.base_layer: list[str] = []
        self.overlay_layers: dict[str, list[str]] = {}
        self.label_layer: list[str] = []
        self.defs: list[str] = []
        self.warnings: list[str] = []
        self.has_kelp = False
        self.segment_uses: dict[tuple, int] = {}
        self.node_uses: dict[CellId, int] = {}
        self.edge_uses: dict[tuple[CellId, CellId], int] = {}
        # pixel frame spans the full lattice so documents of one embedding align
        xs, ys = [], []
        for c in grid.cells:
            for x, y in cell_polygon(grid, c):
                xs.append(x)
                ys.append(y)
        self._x0 = min(xs) - style.margin
        self._y0 = min(ys) - style.margin
        self.width = (max(xs) - min(xs) + 2 * style.margin) * style.scale
        self.height = (max(ys) - min(ys) + 2 * style.margin) * style.scale

    def px(self, p: Point) -> Point:
        return ((p[0] - self._x0) * self.style.scale,
                (p[1] - self._y0) * self.style.scale)

    def overlay_draw_order(self, selected=None) -> list[str]:
        return _draw_order(self.system, self.style, selected)

    def to_svg(self, selected: list[str] | None = None) -> str:
        """Assemble the document; `selected` filters overlay layers."""
        w, h = _fmt(self.width), _fmt(self.height)
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
            f'viewBox="0 0 {w} {h}">',
            f'<rect width="{w}" height="{h}" fill="#ffffff"/>',
        ]
        if self.defs:
            parts.append("<defs>")
            parts.extend(self.defs)
            parts.append("</defs>")
        parts.append('<g id="base">')
        parts.extend(self.base_layer)
        parts.append("</g>")
        names = selected if selected is not None else list(self.overlay_layers)
        for name in names:
            if name not in self.overlay_layers:
                raise UnknownSet(f"no rendered layer for set {name!r}")
            parts.append(f'<g id="overlay_{_slug(name)}" class="overlay">')
            parts.extend(self.overlay_layers[name])
            parts.append("</g>")
        parts.append('<g id="labels">')
        parts.extend(self.label_layer)
        parts.append("</g>")
        parts.append("</svg>")
        return "\n".join(parts) + "\n"


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "_-" else "-" for ch in name)


def _draw_order(system: SetSystem, style: StyleSheet, selected=None) -> list[str]:
    """Overlay names in drawing order, filtered to `selected` if given."""
    order = style.overlay_order
    if order is None:
        order = tuple(s.name for s in system.overlay_sets())
    if selected is None:
        return list(order)
    for n in selected:
        if n not in order:
            raise UnknownSet(f"{n!r} is not a drawable overlay")
    chosen = set(selected)
    return [n for n in order if n in chosen]


def _shrink_factor(grid: HostGrid, spacing: float) -> float:
    # a gap of `spacing` between two cells means each pulls back spacing/2,
    # which scales the polygon by 1 - spacing/(2*apothem)
    if grid.kind == HEX:
        return 1.0 - spacing / SQRT3
    return 1.0 - spacing


def base_color(system: SetSystem, style: StyleSheet, base_name: str) -> str:
    names = [s.name for s in system.base_sets()]
    idx = names.index(base_name)
    if idx >= len(style.base_palette):
        raise PaletteExhausted(
            f"{len(names)} base sets, palette has {len(style.base_palette)}")
    return style.base_palette[idx]


def overlay_color(system: SetSystem, style: StyleSheet, name: str) -> str:
    names = [s.name for s in system.overlay_sets()]
    if name not in names:
        raise UnknownSet(f"{name!r} is not an overlay set")
    idx = names.index(name)
    if idx >= len(style.overlay_palette):
        raise PaletteExhausted(
            f"{len(names)} overlays, palette has {len(style.overlay_palette)}")
    return style.overlay_palette[idx]


def render_base_map(embedding, system: SetSystem, grid: HostGrid,
                    style: StyleSheet | None = None) -> SvgDocument:
    """One shrunken polygon per occupied cell, tinted by base set."""
    style = style or StyleSheet()
    doc = SvgDocument(system, grid, style, embedding.assignment,
                      getattr(embedding, "flows", {}) or {})
    shrink = _shrink_factor(grid, style.cell_spacing)
    base_of = {}
    for s in system.base_sets():
        for m in s.members:
            base_of[m] = s.name
    for e in system.elements:
        cell = doc.assignment[e.id]
        fill = base_color(system, style, base_of[e.id])
        pts = " ".join(
            f"{_fmt(px)},{_fmt(py)}"
            for px, py in (doc.px(p) for p in cell_polygon(grid, cell, shrink)))
        doc.base_layer.append(
            f'<polygon id="cell_{cell}" points="{pts}" fill="{fill}"/>')
    return doc


# --- boundary overlays ---------------------------------------------------------

def _edge_neighbor_map(grid: HostGrid, cell: CellId) -> list[CellId | None]:
    """For each polygon edge of `cell`, the cell on the other side."""
    poly = cell_polygon(grid, cell)
    cx, cy = grid.center[cell]
    n = len(poly)
    out: list[CellId | None] = [None] * n
    for nb in grid.adjacency[cell]:
        nx, ny = grid.center[nb]
        dx, dy = nx - cx, ny - cy
        best, best_dot = None, -math.inf
        for j in range(n):
            mx = (poly[j][0] + poly[(j + 1) % n][0]) / 2 - cx
            my = (poly[j][1] + poly[(j + 1) % n][1]) / 2 - cy
            d = mx * dx + my * dy
            if d > best_dot:
                best, best_dot = j, d
        out[best] = nb
    return out


def _key(p: Point) -> tuple[int, int]:
    return (round(p[0] * 1e6), round(p[1] * 1e6))


def _seg_key(a: Point, b: Point) -> tuple:
    ka, kb = _key(a), _key(b)
    return (ka, kb) if ka <= kb else (kb, ka)


def trace_boundary(grid: HostGrid, cells) -> list[list[tuple[Point, Point]]]:
    """Closed loops of the region's boundary, interior kept on the left.

    Returns one loop per boundary cycle (outer outlines and holes
    alike), each a list of directed segments.  At pinch vertices, where
    two region corners touch, the walk takes the sharpest left turn,
    which keeps every loop simple.
    """
    cellset = set(cells)
    segments = []  # (p0, p1) with interior on the left
    for c in sorted(cellset):
        poly = cell_polygon(grid, c)
        nbrs = _edge_neighbor_map(grid, c)
        cx, cy = grid.center[c]
        n = len(poly)
        for j in range(n):
            if nbrs[j] is not None and nbrs[j] in cellset:
                continue
            p0, p1 = poly[j], poly[(j + 1) % n]
            dx, dy = p1[0] - p0[0], p1[1] - p0[1]
            # orient so the owner cell's center sits on the left
            side = (-dy) * (cx - p0[0]) + dx * (cy - p0[1])
            if side < 0:
                p0, p1 = p1, p0
            segments.append((p0, p1))

    by_start: dict[tuple, list[int]] = {}
    for i, (p0, _) in enumerate(segments):
        by_start.setdefault(_key(p0), []).append(i)
    used = [False] * len(segments)
    loops = []
    for start in range(len(segments)):
        if used[start]:
            continue
        loop = [segments[start]]
        used[start] = True
        while True:
            cur = loop[-1]
            endk = _key(cur[1])
            if endk == _key(loop[0][0]):
                break
            candidates = [i for i in by_start.get(endk, ()) if not used[i]]
            if not candidates:
                raise RuntimeError("boundary walk broke; geometry inconsistent")
            if len(candidates) == 1:
                nxt = candidates[0]
            else:
                dx, dy = cur[1][0] - cur[0][0], cur[1][1] - cur[0][1]

                def turn(i):
                    q0, q1 = segments[i]
                    ex, ey = q1[0] - q0[0], q1[1] - q0[1]
                    return math.atan2(dx * ey - dy * ex, dx * ex + dy * ey)

                nxt = max(candidates, key=turn)
            loop.append(segments[nxt])
            used[nxt] = True
        loops.append(loop)
    return loops


def _offset_loop(loop, offsets) -> list[Point]:
    """Shift each segment inward by its own offset and re-join corners."""
    shifted = []
    for (p0, p1), off in zip(loop, offsets):
        dx, dy = p1[0] - p0[0], p1[1] - p0[1]
        ln = math.hypot(dx, dy)
        nx, ny = -dy / ln, dx / ln  # unit left normal = inward
        shifted.append(((p0[0] + nx * off, p0[1] + ny * off),
                        (p1[0] + nx * off, p1[1] + ny * off)))
    pts: list[Point] = []
    n = len(shifted)
    for i in range(n):
        a0, a1 = shifted[i]
        b0, b1 = shifted[(i + 1) % n]
        da = (a1[0] - a0[0], a1[1] - a0[1])
        db = (b1[0] - b0[0], b1[1] - b0[1])
        cross = da[0] * db[1] - da[1] * db[0]
        if abs(cross) < 1e-12:
            # collinear or parallel: keep both endpoints (tiny jog when
            # neighboring offsets differ)
            if _key(a1) != _key(b0):
                pts.append(a1)
                pts.append(b0)
            else:
                pts.append(a1)
        else:
            # miter: intersect the two offset lines
            t = ((b0[0] - a0[0]) * db[1] - (b0[1] - a0[1]) * db[0]) / cross
            pts.append((a0[0] + t * da[0], a0[1] + t * da[1]))
    return pts


def render_boundary_overlays(doc: SvgDocument, embedding, system: SetSystem,
                             grid: HostGrid, style: StyleSheet | None = None,
                             selected=None) -> SvgDocument:
    """Inward-offset closed paths around each selected set's cell union.

    Sets are processed in overlay order; each finished set bumps the
    use count of its boundary segments so the next one steps inside it
    where they coincide.  One path element per connected component,
    holes included as extra subpaths.
    """
    style = style or doc.style
    names = doc.overlay_draw_order(selected)
    for name in names:
        system.get_set(name)  # raises UnknownSet for unknown names
    th = style.boundary_thickness * grid.cell_metrics.edge_length
    for pos, name in enumerate(names):
        color = _darken(overlay_color(system, style, name),
                        min(pos, style.gradient_steps))
        members = system.get_set(name).members
        cells = sorted({doc.assignment[m] for m in members})
        loops = trace_boundary(grid, cells)
        # group loops by connected component of the region
        comp_of = _component_index(grid, cells)
        comp_loops: dict[int, list] = {}
        for loop in loops:
            owner = _loop_component(loop, grid, cells, comp_of)
            comp_loops.setdefault(owner, []).append(loop)
        fragments = []
        for comp in sorted(comp_loops):
            subpaths = []
            for loop in comp_loops[comp]:
                offs = [(doc.segment_uses.get(_seg_key(*seg), 0) + 0.5) * th
                        for seg in loop]
                pts = [doc.px(p) for p in _offset_loop(loop, offs)]
                d = "M " + " L ".join(f"{_fmt(x)} {_fmt(y)}" for x, y in pts) + " Z"
                subpaths.append(d)
            fragments.append(
                f'<path d="{" ".join(subpaths)}" fill="none" stroke="{color}" '
                f'stroke-width="{_fmt(th * style.scale)}" '
                f'stroke-linejoin="miter"/>')
        for loop in loops:
            for seg in loop:
                k = _seg_key(*seg)
                doc.segment_uses[k] = doc.segment_uses.get(k, 0) + 1
        doc.overlay_layers.setdefault(name, []).extend(fragments)
    return doc


def _component_index(grid: HostGrid, cells) -> dict[CellId, int]:
    comp = {}
    nxt = 0
    left = set(cells)
    for seed in sorted(cells):
        if seed not in left:
            continue
        stack = [seed]
        left.discard(seed)
        while stack:
            c = stack.pop()
            comp[c] = nxt
            for w in grid.adjacency[c]:
                if w in left:
                    left.discard(w)
                    stack.append(w)
        nxt += 1
    return comp


def _loop_component(loop, grid: HostGrid, cells, comp_of) -> int:
    # a loop belongs to whichever region cell sits closest to it
    mx = sum((s[0][0] + s[1][0]) / 2 for s in loop) / len(loop)
    my = sum((s[0][1] + s[1][1]) / 2 for s in loop) / len(loop)
    best, best_d = None, math.inf
    for c in cells:
        x, y = grid.center[c]
        d = (x - mx) ** 2 + (y - my) ** 2
        if d < best_d:
            best, best_d = comp_of[c], d
    return best


# --- kelp overlays ----------------------------------------------------------------

def render_kelp_overlays(doc: SvgDocument, embedding, grid: HostGrid,
                         style: StyleSheet | None = None,
                         selected=None) -> SvgDocument:
    """Circles on the set's cells plus thick segments on its flow edges.

    Needs recorded flows, so only contiguity-constrained sets qualify.
    Shared nodes and edges shrink with every additional set using them.
    """
    style = style or doc.style
    names = doc.overlay_draw_order(selected)
    system = doc.system
    elen = grid.cell_metrics.edge_length
    for name in names:
        members = system.get_set(name).members
        if name not in doc.flows:
            raise MissingFlows(
                f"set {name!r} has no flow record (solved under relaxation?)")
        color = overlay_color(system, style, name)
        cells = sorted({doc.assignment[m] for m in members})
        edges = sorted({tuple(sorted((u, v))) for u, v, amt in doc.flows[name] if amt > 0})
        fragments = []
        for u, v in edges:
            w = style.kelp_thickness * elen / (1 + doc.edge_uses.get((u, v), 0))
            (x1, y1), (x2, y2) = doc.px(grid.center[u]), doc.px(grid.center[v])
            fragments.append(
                f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
                f'stroke="{color}" stroke-width="{_fmt(w * style.scale)}" '
                f'stroke-linecap="round"/>')
            doc.edge_uses[(u, v)] = doc.edge_uses.get((u, v), 0) + 1
        for c in cells:
            r = style.kelp_radius * elen / (1 + doc.node_uses.get(c, 0))
            x, y = doc.px(grid.center[c])
            fragments.append(
                f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r * style.scale)}" '
                f'fill="{color}"/>')
            doc.node_uses[c] = doc.node_uses.get(c, 0) + 1
        doc.overlay_layers.setdefault(name, []).extend(fragments)
        doc.has_kelp = True
    return doc


# --- labels ------------------------------------------------------------------------

CHAR_WIDTH = 0.60   # advance width per character, in font sizes
LINE_HEIGHT = 1.15


def _wrap(label: str, max_chars: int, delimiters: str) -> list[str]:
    """Break at whitespace or just after delimiter characters."""
    if len(label) <= max_chars:
        return [label]
    chunks: list[str] = []
    cur = ""
    for ch in label:
        cur += ch
        if ch.isspace() or ch in delimiters:
            chunks.append(cur)
            cur = ""
    if cur:
        chunks.append(cur)
    lines: list[str] = []
    line = ""
    for chunk in chunks:
        if line and len(line) + len(chunk) > max_chars:
            lines.append(line.rstrip())
            line = chunk
        else:
            line += chunk
    if line.rstrip():
        lines.append(line.rstrip())
    return lines or [label]


def _label_box(grid: HostGrid, style: StyleSheet) -> tuple[float, float]:
    """Largest axis-aligned rectangle we allow text to occupy, px."""
    t = _shrink_factor(grid, style.cell_spacing)
    if grid.kind == HEX:
        w, h = SQRT3 * t, 1.0 * t
    else:
        w, h = 1.0 * t, 1.0 * t
    return w * style.scale * 0.94, h * style.scale * 0.94


def _fits(label: str, font: float, box_w: float, box_h: float,
          delimiters: str) -> bool:
    max_chars = max(1, int(box_w / (CHAR_WIDTH * font)))
    lines = _wrap(label, max_chars, delimiters)
    if any(len(ln) > max_chars for ln in lines):
        return False
    return len(lines) * LINE_HEIGHT * font <= box_h


def place_labels(doc: SvgDocument, embedding, style: StyleSheet | None = None) -> SvgDocument:
    """Element labels at cell centers, one global font size for the map.

    The size starts at font_max and steps down by 0.5 until every label
    fits its cell or font_min is reached; leftover overflows render
    clipped to their cell and are listed in doc.warnings.
    """
    style = style or doc.style
    grid = doc.grid
    box_w, box_h = _label_box(grid, style)
    labels = {e.id: e.label for e in doc.system.elements}
    font = style.font_max
    while font > style.font_min and not all(
            _fits(lb, font, box_w, box_h, style.delimiters) for lb in labels.values()):
        font = round(font - 0.5, 4)
    font = max(font, style.font_min)
    max_chars = max(1, int(box_w / (CHAR_WIDTH * font)))
    for e in doc.system.elements:
        cell = doc.assignment[e.id]
        x, y = doc.px(grid.center[cell])
        if doc.has_kelp:
            y += box_h * 0.30  # sit below kelp circles
        lines = _wrap(e.label, max_chars, style.delimiters)
        overflow = not _fits(e.label, font, box_w, box_h, style.delimiters)
        clip = ""
        if overflow:
            doc.warnings.append(
                f"label for {e.id!r} does not fit at font {font}; clipped")
            shrink = _shrink_factor(grid, style.cell_spacing)
            pts = " ".join(
                f"{_fmt(px)},{_fmt(py)}"
                for px, py in (doc.px(p) for p in cell_polygon(grid, cell, shrink)))
            doc.defs.append(
                f'<clipPath id="clip_{cell}"><polygon points="{pts}"/></clipPath>')
            clip = f' clip-path="url(#clip_{cell})"'
        y0 = y - (len(lines) - 1) * LINE_HEIGHT * font / 2
        spans = "".join(
            f'<tspan x="{_fmt(x)}" y="{_fmt(y0 + i * LINE_HEIGHT * font)}">{_esc(ln)}</tspan>'
            for i, ln in enumerate(lines))
        doc.label_layer.append(
            f'<text text-anchor="middle" dominant-baseline="middle" '
            f'font-family="{style.font_family}" font-size="{_fmt(font)}" '
            f'fill="#1a1a1a"{clip}>{spans}</text>')
    return doc


def _esc(s: str) -> str:
    return (s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


# --- gallery --------------------------------------------------------------------------

def render_map(embedding, system, grid, style=None, selected=None,
               kelp=False) -> SvgDocument:
    """Base map + overlays + labels in one document."""
    style = style or StyleSheet()
    doc = render_base_map(embedding, system, grid, style)
    if kelp:
        render_kelp_overlays(doc, embedding, grid, style, selected)
    else:
        render_boundary_overlays(doc, embedding, system, grid, style, selected)
    place_labels(doc, embedding, style)
    return doc


def export_gallery(embedding, system: SetSystem, grid: HostGrid,
                   style: StyleSheet | None = None, out_dir="gallery",
                   selected=None, kelp=False) -> list[Path]:
    """Write basemap.svg, one overlay_<name>.svg per overlay, and a
    self-contained gallery.html whose checkboxes toggle overlay layers."""
    style = style or StyleSheet()
    out = Path(out_dir)
    names = _draw_order(system, style, selected)
    written: list[Path] = []
    try:
        out.mkdir(parents=True, exist_ok=True)

        base_doc = render_base_map(embedding, system, grid, style)
        place_labels(base_doc, embedding, style)
        written.append(_write(out / "basemap.svg", base_doc.to_svg()))

        for name in names:
            doc = render_map(embedding, system, grid, style, selected=[name], kelp=kelp)
            written.append(_write(out / f"overlay_{_slug(name)}.svg",
                                  doc.to_svg(selected=[name])))

        full = render_map(embedding, system, grid, style, selected=names, kelp=kelp)
        checkboxes = "\n".join(
            f'<label><input type="checkbox" checked data-layer="overlay_{_slug(n)}"> '
            f'{_esc(n)}</label>' for n in names)
        html = _GALLERY_TEMPLATE.format(
            checkboxes=checkboxes, svg=full.to_svg(selected=names))
        written.append(_write(out / "gallery.html", html))
    except OSError as exc:
        raise IoError(f"gallery export failed: {exc}") from exc
    return written


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


_GALLERY_TEMPLATE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>Set map gallery</title>
<style>
body {{ font-family: Helvetica, Arial, sans-serif; margin: 1.5rem; }}
.controls {{ margin-bottom: 1rem; }}
.controls label {{ margin-right: 1rem; user-select: none; }}
svg {{ border: 1px solid #ddd; max-width: 100%; height: auto; }}
</style>
</head>
<body>
<h1>Set map</h1>
<div class="controls">
{checkboxes}
</div>
<div class="map">
{svg}
</div>
<script>
document.querySelectorAll('.controls input').forEach(function (box) {{
  box.addEventListener('change', function () {{
    var layer = document.getElementById(box.dataset.layer);
    if (layer) layer.style.display = box.checked ? '' : 'none';
  }});
}});
</script>
</body>
</html>
"""
