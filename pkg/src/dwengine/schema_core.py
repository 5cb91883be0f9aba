"""Object-oriented schema graphs and their instance extensions.

The same graph structure carries all three levels of the pipeline: the
source schema, the warehouse schema derived from it, and the star schemas of
the marts. A graph is a set of classes (named, typed attributes plus inert
operation signatures) and a set of directed links between them. Three link
kinds exist:

- ``association``: plain semantic link, cardinality on both ends,
- ``composition``: the source class is the composite, the target class the
  component (the arrow points at the part the whole needs),
- ``inheritance``: the source class is the subclass, the target its
  superclass; no cardinality.

Cardinality is read UML-style: ``cardinality["target"]`` bounds how many
target objects each source object links to, ``cardinality["source"]`` how
many source objects each target object is linked from.

Instances arrive as snapshots: plain id/values/links records stamped with an
extraction date. Snapshots are type-checked against the class definition but
the engine never invents object identity; ids are opaque strings owned by
the source.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Any, Iterable, Optional

from .errors import (
    CardinalityViolationError,
    DanglingEndpointError,
    DuplicateNameError,
    InheritanceCycleError,
    SchemaParseError,
    TypeMismatchError,
    UnknownClassError,
    UnresolvedReferenceError,
)
from . import jsonutil

SIMPLE_KINDS = ("string", "integer", "decimal", "boolean", "date")
COMPLEX_KINDS = ("tuple", "set", "list")
LINK_KINDS = ("association", "composition", "inheritance")

MANY = None  # max-cardinality sentinel: unbounded


@dataclass(frozen=True)
class AttributeType:
    """A simple scalar type or a tuple/set/list constructor over types."""

    kind: str
    components: tuple[tuple[str, "AttributeType"], ...] = ()  # tuple only
    element: Optional["AttributeType"] = None  # set/list only

    def __post_init__(self):
        if self.kind in SIMPLE_KINDS:
            if self.components or self.element:
                raise SchemaParseError(f"simple type {self.kind!r} takes no arguments")
        elif self.kind == "tuple":
            if not self.components:
                raise SchemaParseError("tuple type needs at least one component")
            names = [n for n, _ in self.components]
            if len(names) != len(set(names)):
                raise DuplicateNameError("duplicate component name in tuple type",
                                         components=names)
        elif self.kind in ("set", "list"):
            if self.element is None:
                raise SchemaParseError(f"{self.kind} type needs an element type")
        else:
            raise SchemaParseError(f"unknown type kind {self.kind!r}")

    @property
    def is_simple(self) -> bool:
        return self.kind in SIMPLE_KINDS

    def to_json(self) -> Any:
        if self.is_simple:
            return self.kind
        if self.kind == "tuple":
            return {"tuple": [{"name": n, "type": t.to_json()} for n, t in self.components]}
        return {self.kind: self.element.to_json()}

    @classmethod
    def from_json(cls, data: Any) -> "AttributeType":
        if isinstance(data, str):
            if data not in SIMPLE_KINDS:
                raise SchemaParseError(f"unknown simple type {data!r}")
            return cls(data)
        if isinstance(data, dict) and len(data) == 1:
            (kind, inner), = data.items()
            if kind == "tuple":
                comps = tuple((c["name"], cls.from_json(c["type"])) for c in inner)
                return cls("tuple", components=comps)
            if kind in ("set", "list"):
                return cls(kind, element=cls.from_json(inner))
        raise SchemaParseError(f"malformed type declaration: {data!r}")


def simple(kind: str) -> AttributeType:
    return AttributeType(kind)


@dataclass(frozen=True)
class Attribute:
    name: str
    type: AttributeType
    semantic: str | None = None  # "date" / "address" tags for dimension triggers

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "type": self.type.to_json()}
        if self.semantic:
            out["semantic"] = self.semantic
        return out


@dataclass(frozen=True)
class ClassDef:
    name: str
    attributes: tuple[Attribute, ...] = ()
    operations: tuple[str, ...] = ()

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(names) != len(set(names)):
            raise DuplicateNameError(
                f"duplicate attribute name in class {self.name!r}",
                class_name=self.name, attributes=names)

    def attribute(self, name: str) -> Attribute | None:
        for a in self.attributes:
            if a.name == name:
                return a
        return None

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "attributes": [a.to_json() for a in self.attributes],
            "operations": list(self.operations),
        }


@dataclass(frozen=True)
class Cardinality:
    min: int = 0
    max: int | None = MANY  # None means unbounded ("many")

    def to_json(self) -> list[Any]:
        return [self.min, "many" if self.max is None else self.max]

    @classmethod
    def from_json(cls, data: Any) -> "Cardinality":
        if not isinstance(data, list) or len(data) != 2:
            raise SchemaParseError(f"malformed cardinality {data!r}")
        lo, hi = data
        if hi == "many" or hi == "n":
            hi = None
        return cls(int(lo), hi if hi is None else int(hi))


@dataclass(frozen=True)
class Link:
    name: str
    kind: str
    source: str
    target: str
    cardinality: dict[str, Cardinality] | None = None

    def __post_init__(self):
        if self.kind not in LINK_KINDS:
            raise SchemaParseError(f"unknown link kind {self.kind!r}", link=self.name)
        if self.kind == "inheritance" and self.cardinality is not None:
            raise SchemaParseError(
                f"inheritance link {self.name!r} must not carry cardinality")
        if self.kind != "inheritance" and self.cardinality is None:
            # Composition defaults: a part belongs to exactly one whole.
            if self.kind == "composition":
                card = {"source": Cardinality(1, 1), "target": Cardinality(0, MANY)}
            else:
                card = {"source": Cardinality(0, MANY), "target": Cardinality(0, MANY)}
            object.__setattr__(self, "cardinality", card)

    def other_end(self, class_name: str) -> str:
        return self.target if self.source == class_name else self.source

    def card(self, end: str) -> Cardinality:
        assert self.cardinality is not None
        return self.cardinality[end]

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "name": self.name, "kind": self.kind,
            "source": self.source, "target": self.target,
        }
        if self.cardinality is not None:
            out["cardinality"] = {
                "source": self.cardinality["source"].to_json(),
                "target": self.cardinality["target"].to_json(),
            }
        return out


@dataclass
class SchemaGraph:
    classes: dict[str, ClassDef] = field(default_factory=dict)
    links: dict[str, Link] = field(default_factory=dict)

    # -- construction and validation ---------------------------------------

    def validate(self) -> None:
        for link in self.links.values():
            for end in (link.source, link.target):
                if end not in self.classes:
                    raise DanglingEndpointError(
                        f"link {link.name!r} references unknown class {end!r}",
                        link=link.name, class_name=end)
        self._check_inheritance_acyclic()

    def _check_inheritance_acyclic(self) -> None:
        # Iterative three-color DFS over inheritance edges (subclass -> superclass).
        edges: dict[str, list[str]] = {}
        for link in self.links.values():
            if link.kind == "inheritance":
                edges.setdefault(link.source, []).append(link.target)
        state: dict[str, int] = {}
        for start in self.classes:
            if state.get(start):
                continue
            stack: list[tuple[str, int]] = [(start, 0)]
            state[start] = 1
            while stack:
                node, idx = stack[-1]
                succ = edges.get(node, [])
                if idx < len(succ):
                    stack[-1] = (node, idx + 1)
                    nxt = succ[idx]
                    if state.get(nxt) == 1:
                        raise InheritanceCycleError(
                            f"class {nxt!r} inherits from itself",
                            class_name=nxt)
                    if not state.get(nxt):
                        state[nxt] = 1
                        stack.append((nxt, 0))
                else:
                    state[node] = 2
                    stack.pop()

    # -- lookups -------------------------------------------------------------

    def get_class(self, name: str) -> ClassDef:
        try:
            return self.classes[name]
        except KeyError:
            raise UnknownClassError(f"unknown class {name!r}", class_name=name) from None

    def neighbors(self, class_name: str, kind: str | None = None) -> list[tuple[Link, ClassDef]]:
        """Links incident to a class with the opposite endpoint, name-ordered."""
        self.get_class(class_name)
        out = []
        for link in sorted(self.links.values(), key=lambda l: l.name):
            if kind is not None and link.kind != kind:
                continue
            if link.source == class_name or link.target == class_name:
                out.append((link, self.classes[link.other_end(class_name)]))
        return out

    def parents(self, class_name: str) -> list[str]:
        return [l.target for l in sorted(self.links.values(), key=lambda l: l.name)
                if l.kind == "inheritance" and l.source == class_name]

    def ancestors(self, class_name: str) -> list[str]:
        """Transitive superclasses, nearest first, without duplicates."""
        seen: list[str] = []
        queue = list(self.parents(class_name))
        while queue:
            cur = queue.pop(0)
            if cur not in seen:
                seen.append(cur)
                queue.extend(self.parents(cur))
        return seen

    def descendants(self, class_name: str) -> list[str]:
        children: dict[str, list[str]] = {}
        for l in sorted(self.links.values(), key=lambda l: l.name):
            if l.kind == "inheritance":
                children.setdefault(l.target, []).append(l.source)
        seen: list[str] = []
        queue = list(children.get(class_name, []))
        while queue:
            cur = queue.pop(0)
            if cur not in seen:
                seen.append(cur)
                queue.extend(children.get(cur, []))
        return seen

    def components(self, class_name: str) -> list[str]:
        """Component classes of a composite (targets of composition links)."""
        return [l.target for l in sorted(self.links.values(), key=lambda l: l.name)
                if l.kind == "composition" and l.source == class_name]

    def effective_attributes(self, class_name: str) -> dict[str, Attribute]:
        """Own plus inherited attributes; the subclass shadows on a name clash."""
        merged: dict[str, Attribute] = {}
        for anc in reversed(self.ancestors(class_name)):
            for a in self.classes[anc].attributes:
                merged[a.name] = a
        for a in self.get_class(class_name).attributes:
            merged[a.name] = a
        return merged

    def class_links(self, class_name: str) -> list[Link]:
        """Non-inheritance links whose source is the class or an ancestor."""
        sources = {class_name, *self.ancestors(class_name)}
        return [l for l in sorted(self.links.values(), key=lambda l: l.name)
                if l.kind != "inheritance" and l.source in sources]

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        return {
            "classes": [c.to_json() for c in self.classes.values()],
            "links": [l.to_json() for l in self.links.values()],
        }

    @classmethod
    def from_json(cls, data: Any) -> "SchemaGraph":
        if not isinstance(data, dict):
            raise SchemaParseError("schema document must be a JSON object")
        graph = cls()
        for cdata in data.get("classes", []):
            try:
                attrs = tuple(
                    Attribute(a["name"], AttributeType.from_json(a["type"]),
                              a.get("semantic"))
                    for a in cdata.get("attributes", []))
                cdef = ClassDef(cdata["name"], attrs,
                                tuple(cdata.get("operations", [])))
            except (KeyError, TypeError) as exc:
                raise SchemaParseError(f"malformed class entry: {exc}") from exc
            if cdef.name in graph.classes:
                raise DuplicateNameError(f"duplicate class name {cdef.name!r}",
                                         class_name=cdef.name)
            graph.classes[cdef.name] = cdef
        for ldata in data.get("links", []):
            try:
                card = None
                if "cardinality" in ldata:
                    card = {
                        "source": Cardinality.from_json(ldata["cardinality"]["source"]),
                        "target": Cardinality.from_json(ldata["cardinality"]["target"]),
                    }
                link = Link(ldata["name"], ldata["kind"], ldata["source"],
                            ldata["target"], card)
            except (KeyError, TypeError) as exc:
                raise SchemaParseError(f"malformed link entry: {exc}") from exc
            if link.name in graph.links:
                raise DuplicateNameError(f"duplicate link name {link.name!r}",
                                         link=link.name)
            graph.links[link.name] = link
        graph.validate()
        return graph


def load_schema(text: str) -> SchemaGraph:
    """Parse and validate a schema document (see SchemaGraph.from_json)."""
    try:
        data = jsonutil.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaParseError(f"schema document is not valid JSON: {exc}") from exc
    return SchemaGraph.from_json(data)


def serialize_schema(graph: SchemaGraph) -> str:
    return jsonutil.dumps(graph.to_json(), indent=2) + "\n"


# -- values and snapshots ----------------------------------------------------

def parse_date(value: Any) -> _dt.date:
    if isinstance(value, _dt.date) and not isinstance(value, _dt.datetime):
        return value
    if isinstance(value, str):
        try:
            return _dt.date.fromisoformat(value)
        except ValueError:
            pass
    raise TypeMismatchError(f"not an ISO-8601 date: {value!r}", value=str(value))


def check_value(attr_type: AttributeType, value: Any, where: str) -> Any:
    """Type-check and normalize one value against a declared type.

    Numbers normalize to int/Decimal, dates to datetime.date; tuple values
    must supply exactly the declared components.
    """
    kind = attr_type.kind
    if kind == "string":
        if not isinstance(value, str):
            raise TypeMismatchError(f"{where}: expected string, got {value!r}", where=where)
        return value
    if kind == "integer":
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeMismatchError(f"{where}: expected integer, got {value!r}", where=where)
        return value
    if kind == "decimal":
        if isinstance(value, bool):
            raise TypeMismatchError(f"{where}: expected decimal, got {value!r}", where=where)
        if isinstance(value, int):
            return Decimal(value)
        if isinstance(value, Decimal):
            return value
        if isinstance(value, str):
            try:
                return Decimal(value)
            except InvalidOperation:
                pass
        raise TypeMismatchError(f"{where}: expected decimal, got {value!r}", where=where)
    if kind == "boolean":
        if not isinstance(value, bool):
            raise TypeMismatchError(f"{where}: expected boolean, got {value!r}", where=where)
        return value
    if kind == "date":
        try:
            return parse_date(value)
        except TypeMismatchError:
            raise TypeMismatchError(f"{where}: expected date, got {value!r}", where=where) from None
    if kind == "tuple":
        if not isinstance(value, dict):
            raise TypeMismatchError(f"{where}: expected tuple value, got {value!r}", where=where)
        declared = dict(attr_type.components)
        extra = set(value) - set(declared)
        missing = set(declared) - set(value)
        if extra or missing:
            raise TypeMismatchError(
                f"{where}: tuple components mismatch (extra={sorted(extra)}, missing={sorted(missing)})",
                where=where)
        return {name: check_value(declared[name], value[name], f"{where}.{name}")
                for name, _ in attr_type.components}
    if kind in ("set", "list"):
        if not isinstance(value, list):
            raise TypeMismatchError(f"{where}: expected array, got {value!r}", where=where)
        return [check_value(attr_type.element, v, f"{where}[{i}]")
                for i, v in enumerate(value)]
    raise TypeMismatchError(f"{where}: unsupported type kind {kind!r}", where=where)


@dataclass
class ObjectSnapshot:
    """One source object as seen at one extraction.

    ``links`` maps link name to the ordered list of referenced target ids
    (a single id is normalized to a one-element list on load).
    """

    id: str
    class_name: str
    values: dict[str, Any]
    links: dict[str, list[str]] = field(default_factory=dict)
    extracted_at: _dt.date | None = None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id, "class": self.class_name, "values": dict(self.values),
            "links": {k: list(v) for k, v in self.links.items()},
        }
        if self.extracted_at is not None:
            out["extracted_at"] = self.extracted_at.isoformat()
        return out


def _check_snapshot(graph: SchemaGraph, raw: dict[str, Any],
                    extraction_date: _dt.date) -> ObjectSnapshot:
    try:
        obj_id = raw["id"]
        class_name = raw["class"]
    except KeyError as exc:
        raise SchemaParseError(f"snapshot missing field {exc}") from exc
    cdef = graph.get_class(class_name)
    attrs = graph.effective_attributes(class_name)
    values: dict[str, Any] = {}
    for name, value in raw.get("values", {}).items():
        if name not in attrs:
            raise TypeMismatchError(
                f"object {obj_id!r}: class {class_name!r} has no attribute {name!r}",
                object_id=obj_id, attribute=name)
        values[name] = check_value(attrs[name].type, value, f"{class_name}.{name}")
    link_defs = {l.name: l for l in graph.class_links(class_name)}
    links: dict[str, list[str]] = {}
    for name, targets in raw.get("links", {}).items():
        if name not in link_defs:
            raise UnresolvedReferenceError(
                f"object {obj_id!r}: no link {name!r} leaves class {class_name!r}",
                object_id=obj_id, link=name)
        if isinstance(targets, str):
            targets = [targets]
        if not isinstance(targets, list) or not all(isinstance(t, str) for t in targets):
            raise TypeMismatchError(
                f"object {obj_id!r}: link {name!r} targets must be ids",
                object_id=obj_id, link=name)
        max_card = link_defs[name].card("target").max
        if max_card is not MANY and len(targets) > max_card:
            raise CardinalityViolationError(
                f"object {obj_id!r}: link {name!r} allows at most {max_card} target(s)",
                object_id=obj_id, link=name)
        links[name] = list(targets)
    when = raw.get("extracted_at")
    extracted = parse_date(when) if when is not None else extraction_date
    return ObjectSnapshot(obj_id, class_name, values, links, extracted)


def load_instances(graph: SchemaGraph, text: str, extraction_date: _dt.date,
                   known_ids: dict[str, set[str]] | None = None) -> list[ObjectSnapshot]:
    """Parse an instance document and type-check every snapshot.

    Link targets must resolve within the batch or within ``known_ids``
    (class name -> ids already loaded by earlier batches). Resolution is
    polymorphic: an id counts for a class if it belongs to it or to one of
    its subclasses.
    """
    try:
        data = jsonutil.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaParseError(f"instance document is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("objects", []), list):
        raise SchemaParseError("instance document must contain an \"objects\" array")
    snapshots = [_check_snapshot(graph, raw, extraction_date)
                 for raw in data.get("objects", [])]

    ids: dict[str, set[str]] = {name: set() for name in graph.classes}
    for cname, known in (known_ids or {}).items():
        ids.setdefault(cname, set()).update(known)
    for snap in snapshots:
        ids.setdefault(snap.class_name, set()).add(snap.id)
    link_index = {l.name: l for l in graph.links.values()}
    for snap in snapshots:
        for lname, targets in snap.links.items():
            link = link_index[lname]
            acceptable = {link.target, *graph.descendants(link.target)}
            for tid in targets:
                if not any(tid in ids.get(cls, ()) for cls in acceptable):
                    raise UnresolvedReferenceError(
                        f"object {snap.id!r}: link {lname!r} references unknown "
                        f"{link.target!r} id {tid!r}",
                        object_id=snap.id, link=lname, target_id=tid)
    return snapshots


def validate_snapshot(graph: SchemaGraph, snap: ObjectSnapshot) -> ObjectSnapshot:
    """Re-run the per-snapshot checks; returns the normalized snapshot
    (ISO date strings become dates, decimal attributes become Decimal)."""
    return _check_snapshot(graph, snap.to_json(),
                           snap.extracted_at or _dt.date.today())


class ObjectGraph:
    """Navigable index over one batch of snapshots.

    Supports forward navigation (follow a link stored on the source object),
    reverse navigation (who links to me), and identity across inheritance
    (a subclass object is the same entity as its superclass view).
    """

    def __init__(self, graph: SchemaGraph, snapshots: Iterable[ObjectSnapshot]):
        self.schema = graph
        self.by_class: dict[str, dict[str, ObjectSnapshot]] = {}
        for snap in snapshots:
            self.by_class.setdefault(snap.class_name, {})[snap.id] = snap
        # reverse index: (link name, target id) -> source ids
        self._reverse: dict[tuple[str, str], list[str]] = {}
        for snap in snapshots:
            for lname, targets in snap.links.items():
                for tid in targets:
                    self._reverse.setdefault((lname, tid), []).append(snap.id)

    def get(self, class_name: str, obj_id: str) -> ObjectSnapshot | None:
        # Identity is shared along the inheritance chain: look in the class
        # itself, then in descendants (a Praticien answers for Personnes).
        snap = self.by_class.get(class_name, {}).get(obj_id)
        if snap is not None:
            return snap
        for sub in self.schema.descendants(class_name):
            snap = self.by_class.get(sub, {}).get(obj_id)
            if snap is not None:
                return snap
        return None

    def follow(self, obj: ObjectSnapshot, link: Link, forward: bool) -> list[str]:
        """Ids reached over one link hop from an object."""
        if forward:
            return list(obj.links.get(link.name, []))
        return list(self._reverse.get((link.name, obj.id), []))

    def value(self, class_name: str, obj_id: str, attribute: str) -> Any:
        snap = self.get(class_name, obj_id)
        if snap is None:
            return None
        return snap.values.get(attribute)
