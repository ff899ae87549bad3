"""Synthetic set systems with the dimensions of the evaluation datasets.

Real membership data is not redistributable, so profiles only pin the
counts: elements, base sets, overlays.  Overlap structure imitates
cross-departmental projects: every overlay takes a contiguous slice of
members from each of 2-3 adjacent base sets, which also leaves plenty
of indistinguishable elements for contraction to fold.
"""

from __future__ import annotations

import csv
import io
import random

from .setsystem import BASE, OVERLAY, Element, NamedSet, SetSystem

# profile -> (elements, base sets, overlays)
PROFILES = {
    "bonn": (51, 6, 3),
    "vienna": (71, 4, 3),
    "parliament": (178, 5, 3),
}

_LEFT = ("Applied", "Urban", "Quantum", "Coastal", "Digital", "Molecular",
         "Ancient", "Neural", "Fiscal", "Polar")
_RIGHT = ("Systems", "Methods", "Analysis", "Dynamics", "Networks", "Policy",
          "Imaging", "Logic", "Markets", "Ecology")


def synth_system(profile: str, seed: int = 0, n_elements: int | None = None,
                 n_base: int | None = None, n_overlays: int | None = None) -> SetSystem:
    """Generate a system for a named profile, or `random` with explicit
    dimensions.  All randomness comes from the one seeded generator."""
    if profile in PROFILES:
        d_elements, d_base, d_overlays = PROFILES[profile]
        n_elements = n_elements or d_elements
        n_base = n_base or d_base
        n_overlays = d_overlays if n_overlays is None else n_overlays
    elif profile == "random":
        if not (n_elements and n_base) or n_overlays is None:
            raise ValueError("random profile needs n_elements, n_base, n_overlays")
    else:
        raise ValueError(f"unknown profile {profile!r}; "
                         f"choose from {sorted(PROFILES)} or 'random'")
    if n_base > n_elements:
        raise ValueError("more base sets than elements")

    rng = random.Random(seed)
    width = len(str(n_elements))
    ids = [f"e{i + 1:0{width}d}" for i in range(n_elements)]
    labels = []
    for i in range(n_elements):
        a = rng.choice(_LEFT)
        b = rng.choice(_RIGHT)
        sep = rng.choice((" ", " ", "-"))
        labels.append(f"{a}{sep}{b} {i + 1}")
    elements = tuple(Element(i, lb) for i, lb in zip(ids, labels))

    # base sizes: one guaranteed member each, the rest spread uniformly
    sizes = [1] * n_base
    for _ in range(n_elements - n_base):
        sizes[rng.randrange(n_base)] += 1
    bounds = [0]
    for s in sizes:
        bounds.append(bounds[-1] + s)
    base_sets = [
        NamedSet(f"B{j + 1}", tuple(ids[bounds[j]:bounds[j + 1]]), BASE)
        for j in range(n_base)
    ]

    overlays = []
    for j in range(n_overlays):
        span = min(n_base, rng.choice((2, 3)))
        start = rng.randrange(n_base - span + 1)
        members: list[str] = []
        for b in range(start, start + span):
            size = sizes[b]
            take = max(1, round(size * rng.uniform(0.15, 0.4)))
            lo = bounds[b] + rng.randrange(size - take + 1)
            members.extend(ids[lo:lo + take])
        overlays.append(NamedSet(f"P{j + 1}", tuple(members), OVERLAY))

    return SetSystem(elements, tuple(base_sets + overlays))


def synth_documents(system: SetSystem) -> tuple[str, str]:
    """Render a system back to the two CSV documents parse_set_system reads."""
    base_of = {}
    for s in system.base_sets():
        for m in s.members:
            base_of[m] = s.name
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "label", "base_set"])
    for e in system.elements:
        w.writerow([e.id, e.label, base_of[e.id]])
    elements_doc = buf.getvalue()

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["set", "element_id"])
    for s in system.overlay_sets():
        for m in s.members:
            w.writerow([s.name, m])
    return elements_doc, buf.getvalue()
