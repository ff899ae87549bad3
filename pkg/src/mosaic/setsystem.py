"""Set-system model: elements, base partition, overlays, contraction.

A set system is a universe of elements carved into disjoint *base* sets
(every element in exactly one) plus any number of *overlay* sets that may
cut across the bases.  Elements that belong to exactly the same sets are
interchangeable for embedding purposes, so `contract_indistinguishable`
folds each such class into one representative with a multiplicity; the
inverse direction is `expand_embedding`.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import (
    CardinalityMismatch,
    DuplicateId,
    MalformedInput,
    PartitionViolation,
    UnknownElement,
    UnknownSet,
)

BASE = "base"
OVERLAY = "overlay"


@dataclass(frozen=True)
class Element:
    id: str
    label: str


@dataclass(frozen=True)
class NamedSet:
    name: str
    members: tuple[str, ...]
    kind: str  # BASE or OVERLAY

    def __post_init__(self):
        if self.kind not in (BASE, OVERLAY):
            raise MalformedInput(f"unknown set kind {self.kind!r}")
        if not self.members:
            raise MalformedInput(f"set {self.name!r} has no members")
        seen = set()
        for m in self.members:
            if m in seen:
                raise DuplicateId(f"element {m!r} listed twice in set {self.name!r}")
            seen.add(m)


@dataclass(frozen=True)
class SetSystem:
    """Validated collection of elements and named sets.

    Invariants: ids and set names unique, base sets partition the
    elements, every set member is a declared element.  Declaration
    order of elements and sets is preserved and meaningful (base set
    order drives initial center placement downstream).
    """

    elements: tuple[Element, ...]
    sets: tuple[NamedSet, ...]

    def __post_init__(self):
        if not self.elements:
            raise MalformedInput("set system has no elements")
        ids = [e.id for e in self.elements]
        dup = _first_duplicate(ids)
        if dup is not None:
            raise DuplicateId(f"duplicate element id {dup!r}")
        names = [s.name for s in self.sets]
        dup = _first_duplicate(names)
        if dup is not None:
            raise DuplicateId(f"duplicate set name {dup!r}")
        known = set(ids)
        for s in self.sets:
            for m in s.members:
                if m not in known:
                    raise UnknownElement(f"set {s.name!r} references unknown element {m!r}")
        # base sets must partition the universe
        owner: dict[str, str] = {}
        for s in self.base_sets():
            for m in s.members:
                if m in owner:
                    raise PartitionViolation(
                        f"element {m!r} in base sets {owner[m]!r} and {s.name!r}")
                owner[m] = s.name
        if not owner and self.sets:
            raise PartitionViolation("no base sets declared")
        missing = known - set(owner)
        if missing:
            raise PartitionViolation(
                f"elements missing from every base set: {sorted(missing)}")

    # --- lookups ---------------------------------------------------------

    def element_ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.elements)

    def base_sets(self) -> tuple[NamedSet, ...]:
        return tuple(s for s in self.sets if s.kind == BASE)

    def overlay_sets(self) -> tuple[NamedSet, ...]:
        return tuple(s for s in self.sets if s.kind == OVERLAY)

    def get_set(self, name: str) -> NamedSet:
        for s in self.sets:
            if s.name == name:
                return s
        raise UnknownSet(f"no set named {name!r}")

    def get_element(self, eid: str) -> Element:
        for e in self.elements:
            if e.id == eid:
                return e
        raise UnknownElement(f"no element {eid!r}")

    def sets_containing(self, eid: str) -> tuple[str, ...]:
        return tuple(s.name for s in self.sets if eid in s.members)

    def signature(self, eid: str) -> tuple[str, ...]:
        """Membership fingerprint over all sets, in declaration order."""
        return self.sets_containing(eid)


def _first_duplicate(items: Iterable[str]):
    seen = set()
    for x in items:
        if x in seen:
            return x
        seen.add(x)
    return None


# --- parsing ------------------------------------------------------------------

ELEMENTS_HEADER = ["id", "label", "base_set"]
OVERLAYS_HEADER = ["set", "element_id"]


def parse_set_system(elements_doc: str, overlays_doc: str = "") -> SetSystem:
    """Build a SetSystem from two CSV documents.

    `elements_doc` has header id,label,base_set; one row per element.
    `overlays_doc` has header set,element_id; one row per membership.
    Overlay declaration order is the order of first appearance.
    """
    rows = _read_csv(elements_doc, ELEMENTS_HEADER, "elements")
    elements: list[Element] = []
    base_members: dict[str, list[str]] = {}
    for lineno, row in rows:
        eid, label, base = row
        if not eid:
            raise MalformedInput(f"elements line {lineno}: empty id")
        if not base:
            raise MalformedInput(f"elements line {lineno}: empty base_set")
        elements.append(Element(eid, label or eid))
        base_members.setdefault(base, []).append(eid)

    overlay_members: dict[str, list[str]] = {}
    if overlays_doc.strip():
        for lineno, row in _read_csv(overlays_doc, OVERLAYS_HEADER, "overlays"):
            name, eid = row
            if not name or not eid:
                raise MalformedInput(f"overlays line {lineno}: empty field")
            bucket = overlay_members.setdefault(name, [])
            if eid in bucket:
                raise DuplicateId(f"overlays line {lineno}: {eid!r} repeated in {name!r}")
            bucket.append(eid)

    sets = [NamedSet(n, tuple(ms), BASE) for n, ms in base_members.items()]
    for n, ms in overlay_members.items():
        if n in base_members:
            raise DuplicateId(f"overlay name {n!r} collides with a base set")
        sets.append(NamedSet(n, tuple(ms), OVERLAY))
    return SetSystem(tuple(elements), tuple(sets))


def _read_csv(doc: str, header: list[str], what: str):
    reader = csv.reader(io.StringIO(doc))
    try:
        first = next(reader)
    except StopIteration:
        raise MalformedInput(f"{what} document is empty") from None
    if [h.strip() for h in first] != header:
        raise MalformedInput(
            f"{what} header must be {','.join(header)!r}, got {','.join(first)!r}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue  # blank line
        if len(row) != len(header):
            raise MalformedInput(
                f"{what} line {lineno}: expected {len(header)} fields, got {len(row)}")
        out.append((lineno, [f.strip() for f in row]))
    return out


def parse_set_system_json(doc: str) -> SetSystem:
    """JSON alternative: {"elements": [{id,label,base}...], "overlays": {name: [ids]}}."""
    try:
        data = json.loads(doc)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict) or "elements" not in data:
        raise MalformedInput("JSON document must be an object with an 'elements' list")
    elements: list[Element] = []
    base_members: dict[str, list[str]] = {}
    for i, rec in enumerate(data["elements"]):
        if not isinstance(rec, dict) or "id" not in rec or "base" not in rec:
            raise MalformedInput(f"elements[{i}] needs 'id' and 'base' fields")
        eid = str(rec["id"])
        elements.append(Element(eid, str(rec.get("label", "")) or eid))
        base_members.setdefault(str(rec["base"]), []).append(eid)
    sets = [NamedSet(n, tuple(ms), BASE) for n, ms in base_members.items()]
    overlays = data.get("overlays", {})
    if not isinstance(overlays, dict):
        raise MalformedInput("'overlays' must map set names to id lists")
    for n, ms in overlays.items():
        if not isinstance(ms, list):
            raise MalformedInput(f"overlay {n!r} must be a list of element ids")
        if n in base_members:
            raise DuplicateId(f"overlay name {n!r} collides with a base set")
        sets.append(NamedSet(str(n), tuple(str(m) for m in ms), OVERLAY))
    return SetSystem(tuple(elements), tuple(sets))


# --- contraction -----------------------------------------------------------------

@dataclass(frozen=True)
class ContractedSystem:
    """A SetSystem over representatives plus the bookkeeping to undo it.

    alpha[rep] is the number of original elements the representative
    stands for; groups[rep] lists them; center_safe[set] is the
    lexicographically smallest representative inside each set, the
    anchor the contiguity model sinks flow at.
    """

    system: SetSystem
    alpha: dict[str, int] = field(compare=False)
    groups: dict[str, tuple[str, ...]] = field(compare=False)
    center_safe: dict[str, str] = field(compare=False)

    def total_multiplicity(self) -> int:
        return sum(self.alpha.values())

    def set_multiplicity(self, name: str) -> int:
        """Number of original elements inside one contracted set."""
        return sum(self.alpha[m] for m in self.system.get_set(name).members)


def contract_indistinguishable(system: SetSystem) -> ContractedSystem:
    """Fold elements with identical membership signatures into representatives.

    Two elements are indistinguishable iff they belong to exactly the
    same sets (bases and overlays alike).  The representative of each
    class is its lexicographically smallest id; it keeps that element's
    label.  Representatives appear in original declaration order.
    """
    by_sig: dict[tuple[str, ...], list[str]] = {}
    for e in system.elements:
        by_sig.setdefault(system.signature(e.id), []).append(e.id)

    rep_of: dict[str, str] = {}
    groups: dict[str, tuple[str, ...]] = {}
    alpha: dict[str, int] = {}
    for members in by_sig.values():
        rep = min(members)
        groups[rep] = tuple(sorted(members))
        alpha[rep] = len(members)
        for m in members:
            rep_of[m] = rep

    kept = tuple(e for e in system.elements if rep_of[e.id] == e.id)
    new_sets = []
    for s in system.sets:
        seen: list[str] = []
        for m in s.members:
            r = rep_of[m]
            if r not in seen:
                seen.append(r)
        new_sets.append(NamedSet(s.name, tuple(seen), s.kind))
    reduced = SetSystem(kept, tuple(new_sets))
    centers = {s.name: min(s.members) for s in reduced.sets}
    return ContractedSystem(reduced, alpha, groups, centers)


def identity_contraction(system: SetSystem) -> ContractedSystem:
    """Wrap a system as its own contraction (every class a singleton)."""
    alpha = {e.id: 1 for e in system.elements}
    groups = {e.id: (e.id,) for e in system.elements}
    centers = {s.name: min(s.members) for s in system.sets}
    return ContractedSystem(system, alpha, groups, centers)


def expand_embedding(
    contracted: ContractedSystem,
    cells_by_rep: Mapping[str, Sequence[int]],
) -> dict[str, int]:
    """Distribute each representative's cells over its original elements.

    Pairing is deterministic: group ids sorted, cells sorted, matched in
    order.  Raises CardinalityMismatch when the cell count for a
    representative disagrees with its multiplicity.
    """
    for rep in cells_by_rep:
        if rep not in contracted.groups:
            raise UnknownElement(f"{rep!r} is not a representative")
    out: dict[str, int] = {}
    for rep, group in contracted.groups.items():
        if rep not in cells_by_rep:
            raise CardinalityMismatch(f"no cells supplied for representative {rep!r}")
        cells = sorted(cells_by_rep[rep])
        if len(cells) != contracted.alpha[rep]:
            raise CardinalityMismatch(
                f"representative {rep!r} expects {contracted.alpha[rep]} cells, got {len(cells)}")
        for eid, cell in zip(sorted(group), cells):
            out[eid] = cell
    return out
