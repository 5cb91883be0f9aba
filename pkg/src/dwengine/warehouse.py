"""Warehouse definitions: a materialized view over the source schema.

A warehouse is built incrementally. Projecting a source class derives a
warehouse class carrying the source attributes (renamed with the ``D_``
prefix, original names kept as metadata); the projection automatically pulls
every transitive superclass and composition component so the view's types
stay closed, and copies every source link once both endpoints are present.

Each derived class may carry a selection predicate (applied per snapshot at
extraction), extra calculated attributes (``C_``, computed from source
attributes at each extraction) and specific attributes (``S_``, written by
warehouse users and never touched by a refresh).

Definitions are plain values: every operation returns a new definition and
never mutates its input, which is what makes the project operation log
replayable.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Any, Iterable

from .errors import (
    ClosureViolationError,
    DuplicateNameError,
    InvalidRestructureError,
    NameCollisionError,
    NonBooleanPredicateError,
    NotProjectedError,
    TypeMismatchError,
    UnknownAttributeError,
    UnknownClassError,
    ValidationDiagnosticsError,
)
from .expressions import (
    Binding,
    EvaluationContext,
    ExpressionTree,
    evaluate,
    parse_formula,
    validate,
)
from .schema_core import (
    Attribute,
    AttributeType,
    ClassDef,
    Link,
    ObjectGraph,
    ObjectSnapshot,
    SchemaGraph,
    check_value,
)

KIND_PREFIX = {"derived": "D_", "calculated": "C_", "specific": "S_"}


@dataclass
class WarehouseAttribute:
    """One attribute of a derived class.

    ``kind`` decides the refresh behaviour: derived values are copied from
    the source (``source_path`` points into the snapshot, possibly inside a
    tuple), calculated values are recomputed from ``formula``, specific
    values belong to the users. ``grouped`` holds the original attributes a
    ``group`` restructuring packed together, so ``split`` can undo it.
    """

    name: str
    kind: str
    type: AttributeType
    source_path: tuple[str, ...] = ()
    formula: str | None = None
    default: Any = None
    semantic: str | None = None
    grouped: tuple["WarehouseAttribute", ...] = ()

    def __post_init__(self):
        prefix = KIND_PREFIX.get(self.kind)
        if prefix is None:
            raise TypeMismatchError(f"unknown attribute kind {self.kind!r}")
        if not self.name.startswith(prefix):
            raise TypeMismatchError(
                f"attribute {self.name!r} must carry the {prefix!r} prefix",
                attribute=self.name, kind=self.kind)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "kind": self.kind,
                               "type": self.type.to_json()}
        if self.source_path:
            out["source_path"] = list(self.source_path)
        if self.formula is not None:
            out["formula"] = self.formula
        if self.default is not None:
            out["default"] = self.default
        if self.semantic:
            out["semantic"] = self.semantic
        if self.grouped:
            out["grouped"] = [a.to_json() for a in self.grouped]
        return out

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "WarehouseAttribute":
        return cls(
            name=data["name"], kind=data["kind"],
            type=AttributeType.from_json(data["type"]),
            source_path=tuple(data.get("source_path", ())),
            formula=data.get("formula"),
            default=data.get("default"),
            semantic=data.get("semantic"),
            grouped=tuple(cls.from_json(g) for g in data.get("grouped", ())),
        )


@dataclass
class DerivedClass:
    name: str
    source_class: str
    attributes: list[WarehouseAttribute] = field(default_factory=list)
    operations: tuple[str, ...] = ()
    selection: str | None = None  # canonical selection text
    auto_projected: bool = False

    def attribute(self, name: str) -> WarehouseAttribute | None:
        for a in self.attributes:
            if a.name == name:
                return a
        return None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "name": self.name,
            "source": self.source_class,
            "attributes": [a.to_json() for a in self.attributes],
            "operations": list(self.operations),
            "auto_projected": self.auto_projected,
        }
        if self.selection is not None:
            out["selection"] = self.selection
        return out


@dataclass
class EnvironmentDef:
    """A named sub-schema historized as a unit; environments never overlap."""

    name: str
    classes: list[str]
    links: list[str]

    def to_json(self) -> dict[str, Any]:
        return {"name": self.name, "classes": list(self.classes),
                "links": list(self.links)}


@dataclass
class WarehouseDef:
    source: SchemaGraph
    classes: dict[str, DerivedClass] = field(default_factory=dict)
    links: dict[str, Link] = field(default_factory=dict)
    granularity: str = "day"
    refresh_period: int = 1
    historized_attributes: list[tuple[str, str]] = field(default_factory=list)
    historized_classes: list[str] = field(default_factory=list)
    environments: dict[str, EnvironmentDef] = field(default_factory=dict)

    def clone(self) -> "WarehouseDef":
        return WarehouseDef(
            source=self.source,
            classes=copy.deepcopy(self.classes),
            links=dict(self.links),
            granularity=self.granularity,
            refresh_period=self.refresh_period,
            historized_attributes=list(self.historized_attributes),
            historized_classes=list(self.historized_classes),
            environments=copy.deepcopy(self.environments),
        )

    def class_level_historized(self, class_name: str) -> bool:
        if class_name in self.historized_classes:
            return True
        return any(class_name in env.classes for env in self.environments.values())

    # -- lookups ------------------------------------------------------------

    def get(self, name: str) -> DerivedClass:
        cls = self.classes.get(name)
        if cls is None:
            raise NotProjectedError(f"class {name!r} is not in the warehouse",
                                    class_name=name)
        return cls

    def by_source(self, source_name: str) -> DerivedClass | None:
        for cls in self.classes.values():
            if cls.source_class == source_name:
                return cls
        return None

    def schema(self) -> SchemaGraph:
        """The warehouse as a plain schema graph (for navigation and codegen)."""
        graph = SchemaGraph()
        for cls in self.classes.values():
            attrs = tuple(Attribute(a.name, a.type, a.semantic) for a in cls.attributes)
            graph.classes[cls.name] = ClassDef(cls.name, attrs, cls.operations)
        graph.links = dict(self.links)
        graph.validate()
        return graph

    def aliases(self) -> dict[str, dict[str, str]]:
        """Per class: exposed (source) attribute name -> stored warehouse name."""
        out: dict[str, dict[str, str]] = {}
        for cls in self.classes.values():
            table: dict[str, str] = {}
            for attr in cls.attributes:
                if attr.kind == "derived" and len(attr.source_path) == 1:
                    table[attr.source_path[0]] = attr.name
            out[cls.name] = table
        return out

    def to_json(self) -> dict[str, Any]:
        return {
            "granularity": self.granularity,
            "refresh_period": self.refresh_period,
            "classes": [c.to_json() for c in self.classes.values()],
            "links": [l.to_json() for l in self.links.values()],
            "historized_attributes": [list(p) for p in self.historized_attributes],
            "historized_classes": list(self.historized_classes),
            "environments": [e.to_json() for e in self.environments.values()],
        }

    # -- validation ----------------------------------------------------------

    def check_closure(self) -> None:
        """Type closure plus link well-formedness, by full scan."""
        projected_sources = {c.source_class for c in self.classes.values()}
        for cls in self.classes.values():
            for anc in self.source.ancestors(cls.source_class):
                if anc not in projected_sources:
                    raise ClosureViolationError(
                        f"superclass {anc!r} of {cls.source_class!r} is not projected",
                        class_name=cls.name, missing=anc)
            for comp in _transitive_components(self.source, cls.source_class):
                if comp not in projected_sources:
                    raise ClosureViolationError(
                        f"component {comp!r} of {cls.source_class!r} is not projected",
                        class_name=cls.name, missing=comp)
        for link in self.links.values():
            if link.source not in self.classes or link.target not in self.classes:
                raise ClosureViolationError(
                    f"link {link.name!r} has an endpoint outside the warehouse",
                    link=link.name)


def _transitive_components(source: SchemaGraph, class_name: str) -> list[str]:
    seen: list[str] = []
    queue = list(source.components(class_name))
    while queue:
        cur = queue.pop(0)
        if cur not in seen:
            seen.append(cur)
            queue.extend(source.components(cur))
            queue.extend(source.ancestors(cur))
    return seen


def new_warehouse(source: SchemaGraph) -> WarehouseDef:
    source.validate()
    return WarehouseDef(source=source)


# -- projection ---------------------------------------------------------------

def _derive_class(source: SchemaGraph, class_name: str, auto: bool) -> DerivedClass:
    cdef = source.get_class(class_name)
    attrs = [
        WarehouseAttribute(
            name="D_" + a.name, kind="derived", type=a.type,
            source_path=(a.name,), semantic=a.semantic or
            ("date" if a.type.kind == "date" else None))
        for a in cdef.attributes
    ]
    return DerivedClass(name=class_name, source_class=class_name,
                        attributes=attrs, operations=cdef.operations,
                        auto_projected=auto)


def project_class(warehouse: WarehouseDef, class_name: str) -> WarehouseDef:
    """Project a source class and its type closure into the warehouse.

    Pulls every transitive superclass and composition component, then copies
    each source link whose two endpoints are now projected. Projecting an
    already-projected class is a no-op.
    """
    source = warehouse.source
    source.get_class(class_name)
    if warehouse.by_source(class_name) is not None:
        return warehouse

    out = warehouse.clone()
    needed = [class_name]
    closure: list[str] = []
    while needed:
        cur = needed.pop(0)
        if cur in closure or out.by_source(cur) is not None:
            continue
        closure.append(cur)
        needed.extend(source.ancestors(cur))
        needed.extend(source.components(cur))

    for name in closure:
        if name in out.classes:
            # A warehouse class already carries this name for a different
            # source class (it was renamed onto it).
            raise NameCollisionError(
                f"warehouse already has a class named {name!r}",
                class_name=name)
        out.classes[name] = _derive_class(source, name, auto=name != class_name)

    _copy_closed_links(out)
    out.check_closure()
    return out


def _copy_closed_links(warehouse: WarehouseDef) -> None:
    source_to_wh = {c.source_class: c.name for c in warehouse.classes.values()}
    for link in warehouse.source.links.values():
        if link.name in warehouse.links:
            continue
        if link.source in source_to_wh and link.target in source_to_wh:
            warehouse.links[link.name] = replace(
                link, source=source_to_wh[link.source],
                target=source_to_wh[link.target])


# -- selection ----------------------------------------------------------------

def _own_attribute_context(warehouse: WarehouseDef, cls: DerivedClass) -> EvaluationContext:
    return EvaluationContext(warehouse.source, cls.source_class)


def set_selection(warehouse: WarehouseDef, class_name: str,
                  predicate: ExpressionTree | str) -> WarehouseDef:
    """Attach the per-snapshot filter deciding which source objects derive."""
    cls = warehouse.get(class_name)
    tree = parse_formula(predicate) if isinstance(predicate, str) else predicate
    if tree.kind != "selection":
        raise NonBooleanPredicateError(
            f"selection for {class_name!r} must be a boolean tree",
            class_name=class_name)
    own = warehouse.source.effective_attributes(cls.source_class)
    for node in tree.root.refs():
        rcls, rattr = node.value
        if (rcls not in (None, cls.source_class)) or rattr not in own:
            shown = rattr if rcls is None else f"{rcls}.{rattr}"
            raise UnknownAttributeError(
                f"selection may only reference attributes of {cls.source_class!r}; "
                f"{shown!r} does not qualify",
                class_name=class_name, reference=shown)
    out = warehouse.clone()
    out.classes[class_name].selection = tree.text
    return out


# -- enrichment ---------------------------------------------------------------

def add_specific_attribute(warehouse: WarehouseDef, class_name: str, name: str,
                           attr_type: AttributeType, default: Any = None) -> WarehouseDef:
    cls = warehouse.get(class_name)
    full = "S_" + name
    if cls.attribute(full) is not None:
        raise DuplicateNameError(f"class {class_name!r} already has {full!r}",
                                 class_name=class_name, attribute=full)
    checked_default = None
    if default is not None:
        checked_default = check_value(attr_type, default, f"{class_name}.{full}")
    out = warehouse.clone()
    out.classes[class_name].attributes.append(WarehouseAttribute(
        name=full, kind="specific", type=attr_type, default=checked_default))
    return out


def add_calculated_attribute(warehouse: WarehouseDef, class_name: str, name: str,
                             formula: ExpressionTree | str) -> WarehouseDef:
    cls = warehouse.get(class_name)
    full = "C_" + name
    if cls.attribute(full) is not None:
        raise DuplicateNameError(f"class {class_name!r} already has {full!r}",
                                 class_name=class_name, attribute=full)
    tree = parse_formula(formula) if isinstance(formula, str) else formula
    if tree.kind != "calculation":
        raise TypeMismatchError(f"{full!r} needs a calculation tree, not a predicate")
    context = EvaluationContext(warehouse.source, cls.source_class)
    diags = validate(tree, context)
    if diags:
        raise ValidationDiagnosticsError(
            f"formula for {full!r} does not validate", diagnostics=diags)
    out = warehouse.clone()
    out.classes[class_name].attributes.append(WarehouseAttribute(
        name=full, kind="calculated", type=infer_type(tree, context),
        formula=tree.text))
    return out


def infer_type(tree: ExpressionTree, context: EvaluationContext) -> AttributeType:
    """Static result type of a calculation tree."""

    def walk(node) -> AttributeType:
        if node.op == "lit":
            v = node.value
            if isinstance(v, bool):
                return AttributeType("boolean")
            if isinstance(v, int):
                return AttributeType("integer")
            if isinstance(v, Decimal):
                return AttributeType("decimal")
            if isinstance(v, str):
                return AttributeType("string")
            return AttributeType("date")
        if node.op == "ref":
            resolved = context.resolve(node)
            if resolved is None:
                return AttributeType("string")
            cls, stored, _ = resolved
            return context.attribute_type(cls, stored)
        if node.op in ("add", "subtract", "multiply", "divide", "sum", "average"):
            return AttributeType("decimal")
        if node.op in ("count", "month", "quarter", "year"):
            return AttributeType("integer")
        if node.op in ("min", "max"):
            return AttributeType("decimal")
        if node.op == "day_label":
            return AttributeType("string")
        return AttributeType("boolean")

    return walk(tree.root)


# -- restructuring --------------------------------------------------------------

def restructure(warehouse: WarehouseDef, class_name: str, op: str,
                **args: Any) -> WarehouseDef:
    ops = {
        "rename_class": _rename_class,
        "rename_attribute": _rename_attribute,
        "delete_attribute": _delete_attribute,
        "delete_class": _delete_class,
        "group": _group,
        "split": _split,
    }
    handler = ops.get(op)
    if handler is None:
        raise InvalidRestructureError(f"unknown restructuring operation {op!r}", op=op)
    return handler(warehouse, class_name, **args)


def _rename_class(warehouse: WarehouseDef, class_name: str, new_name: str) -> WarehouseDef:
    warehouse.get(class_name)
    if new_name in warehouse.classes and new_name != class_name:
        raise NameCollisionError(f"class {new_name!r} already exists",
                                 class_name=new_name)
    out = warehouse.clone()
    cls = out.classes.pop(class_name)
    cls.name = new_name
    rebuilt = {}
    for name, c in out.classes.items():
        rebuilt[name] = c
    rebuilt[new_name] = cls
    out.classes = rebuilt
    out.links = {
        name: replace(link,
                      source=new_name if link.source == class_name else link.source,
                      target=new_name if link.target == class_name else link.target)
        for name, link in out.links.items()
    }
    return out


def _find_attr(cls: DerivedClass, name: str) -> int:
    for i, a in enumerate(cls.attributes):
        if a.name == name:
            return i
    raise UnknownAttributeError(
        f"class {cls.name!r} has no attribute {name!r}",
        class_name=cls.name, attribute=name)


def _rename_attribute(warehouse: WarehouseDef, class_name: str, attribute: str,
                      new_name: str) -> WarehouseDef:
    """Rename keeps the kind prefix: the new name is the bare part."""
    cls = warehouse.get(class_name)
    idx = _find_attr(cls, attribute)
    kind = cls.attributes[idx].kind
    full = KIND_PREFIX[kind] + new_name
    if cls.attribute(full) is not None and full != attribute:
        raise DuplicateNameError(f"class {class_name!r} already has {full!r}",
                                 class_name=class_name, attribute=full)
    out = warehouse.clone()
    out.classes[class_name].attributes[idx].name = full
    return out


def _delete_attribute(warehouse: WarehouseDef, class_name: str,
                      attribute: str) -> WarehouseDef:
    cls = warehouse.get(class_name)
    idx = _find_attr(cls, attribute)
    out = warehouse.clone()
    del out.classes[class_name].attributes[idx]
    return out


def _delete_class(warehouse: WarehouseDef, class_name: str) -> WarehouseDef:
    cls = warehouse.get(class_name)
    for other in warehouse.classes.values():
        if other.name == class_name:
            continue
        if cls.source_class in warehouse.source.ancestors(other.source_class):
            raise ClosureViolationError(
                f"cannot delete {class_name!r}: {other.name!r} inherits from it",
                class_name=class_name, dependent=other.name)
        if cls.source_class in _transitive_components(warehouse.source, other.source_class):
            raise ClosureViolationError(
                f"cannot delete {class_name!r}: {other.name!r} is composed of it",
                class_name=class_name, dependent=other.name)
    out = warehouse.clone()
    del out.classes[class_name]
    out.links = {name: link for name, link in out.links.items()
                 if class_name not in (link.source, link.target)}
    return out


def _group(warehouse: WarehouseDef, class_name: str, attributes: list[str],
           new_name: str) -> WarehouseDef:
    """Pack several attributes of one kind into a tuple-typed attribute."""
    cls = warehouse.get(class_name)
    if len(attributes) < 2:
        raise InvalidRestructureError("group needs at least two attributes",
                                      class_name=class_name)
    members = [cls.attributes[_find_attr(cls, a)] for a in attributes]
    kinds = {m.kind for m in members}
    if len(kinds) != 1:
        raise InvalidRestructureError(
            "grouped attributes must share one kind",
            class_name=class_name, kinds=sorted(kinds))
    kind = kinds.pop()
    full = KIND_PREFIX[kind] + new_name
    if cls.attribute(full) is not None:
        raise DuplicateNameError(f"class {class_name!r} already has {full!r}",
                                 class_name=class_name, attribute=full)
    tuple_type = AttributeType(
        "tuple", components=tuple((m.name, m.type) for m in members))
    grouped = WarehouseAttribute(
        name=full, kind=kind, type=tuple_type,
        grouped=tuple(copy.deepcopy(m) for m in members))
    out = warehouse.clone()
    target = out.classes[class_name]
    first = min(_find_attr(target, a) for a in attributes)
    target.attributes = [a for a in target.attributes if a.name not in attributes]
    target.attributes.insert(min(first, len(target.attributes)), grouped)
    return out


def _split(warehouse: WarehouseDef, class_name: str, attribute: str) -> WarehouseDef:
    """Unpack a tuple-typed attribute back into its components."""
    cls = warehouse.get(class_name)
    idx = _find_attr(cls, attribute)
    attr = cls.attributes[idx]
    if attr.type.kind != "tuple":
        raise InvalidRestructureError(
            f"{attribute!r} is not tuple-typed", class_name=class_name,
            attribute=attribute)
    if attr.grouped:
        pieces = [copy.deepcopy(m) for m in attr.grouped]
    else:
        # A projected source tuple: flatten with underscore paths.
        base = attr.name[len(KIND_PREFIX[attr.kind]):]
        pieces = [
            WarehouseAttribute(
                name=f"{KIND_PREFIX[attr.kind]}{base}_{comp_name}",
                kind=attr.kind, type=comp_type,
                source_path=attr.source_path + (comp_name,) if attr.source_path else ())
            for comp_name, comp_type in attr.type.components
        ]
    out = warehouse.clone()
    target = out.classes[class_name]
    for piece in pieces:
        if target.attribute(piece.name) is not None:
            raise DuplicateNameError(
                f"split would collide on {piece.name!r}",
                class_name=class_name, attribute=piece.name)
    target.attributes[idx:idx + 1] = pieces
    return out


# -- historization configuration -------------------------------------------------

def mark_attribute_historized(warehouse: WarehouseDef, class_name: str,
                              attribute: str) -> tuple[WarehouseDef, list[str]]:
    """Keep (value, extraction date) history for one derived or calculated
    attribute. Returns the new definition plus redundancy warnings."""
    from .errors import SpecificAttributeHistorizationError
    cls = warehouse.get(class_name)
    attr = cls.attribute(attribute)
    if attr is None:
        raise UnknownAttributeError(
            f"class {class_name!r} has no attribute {attribute!r}",
            class_name=class_name, attribute=attribute)
    if attr.kind == "specific":
        raise SpecificAttributeHistorizationError(
            f"{attribute!r} is user-owned; refreshes never overwrite it",
            class_name=class_name, attribute=attribute)
    out = warehouse.clone()
    if (class_name, attribute) not in out.historized_attributes:
        out.historized_attributes.append((class_name, attribute))
    warnings = []
    if out.class_level_historized(class_name):
        warnings.append(
            f"class {class_name!r} is already historized as a whole; attribute "
            f"history for {attribute!r} is redundant")
    return out, warnings


def mark_class_historized(warehouse: WarehouseDef, class_name: str) -> WarehouseDef:
    warehouse.get(class_name)
    out = warehouse.clone()
    if class_name not in out.historized_classes:
        out.historized_classes.append(class_name)
    return out


def create_environment(warehouse: WarehouseDef, name: str,
                       classes: Iterable[str], links: Iterable[str]) -> WarehouseDef:
    """Historize a sub-schema as a unit. Endpoints must stay inside the
    environment and no class may belong to two environments."""
    from .errors import (DisjointnessViolationError, EnvironmentEndpointError,
                         UnknownLinkError)
    classes = list(classes)
    links = list(links)
    if name in warehouse.environments:
        raise DuplicateNameError(f"environment {name!r} already exists", name=name)
    for cname in classes:
        if cname not in warehouse.classes:
            raise UnknownClassError(f"unknown warehouse class {cname!r}",
                                    class_name=cname)
    for lname in links:
        link = warehouse.links.get(lname)
        if link is None:
            raise UnknownLinkError(f"unknown warehouse link {lname!r}", link=lname)
        if link.source not in classes or link.target not in classes:
            raise EnvironmentEndpointError(
                f"link {lname!r} has an endpoint outside the environment",
                link=lname, source=link.source, target=link.target)
    for env in warehouse.environments.values():
        overlap = sorted(set(classes) & set(env.classes))
        if overlap:
            raise DisjointnessViolationError(
                f"class {overlap[0]!r} already belongs to environment {env.name!r}",
                class_name=overlap[0], environment=env.name)
    out = warehouse.clone()
    out.environments[name] = EnvironmentDef(name, classes, links)
    return out


def delete_environment(warehouse: WarehouseDef, name: str) -> WarehouseDef:
    if name not in warehouse.environments:
        raise UnknownClassError(f"unknown environment {name!r}", name=name)
    out = warehouse.clone()
    del out.environments[name]
    return out


# -- extraction ----------------------------------------------------------------

@dataclass
class ExtractedRow:
    object_id: str
    values: dict[str, Any]
    links: dict[str, list[str]]
    source_id: str


def _attribute_value(attr: WarehouseAttribute, snapshot: ObjectSnapshot,
                     context: EvaluationContext | None, binding: Binding | None) -> Any:
    if attr.grouped:
        return {m.name: _attribute_value(m, snapshot, context, binding)
                for m in attr.grouped}
    if attr.kind == "derived":
        value: Any = snapshot.values
        for step in attr.source_path:
            if not isinstance(value, dict) or step not in value:
                return None
            value = value[step]
        return value
    if attr.kind == "calculated":
        tree = parse_formula(attr.formula)
        return evaluate(tree, context, binding)
    return None  # specific: owned by users, not extracted


def extract_rows(warehouse: WarehouseDef,
                 snapshots: Iterable[ObjectSnapshot]) -> tuple[dict[str, dict[str, ExtractedRow]], set[str]]:
    """Derive warehouse rows from one batch of source snapshots.

    Returns (class name -> object id -> row, covered class names). A class
    is covered when the batch contains at least one snapshot of its source
    class (or a source subclass); only covered classes take part in deletion
    detection. Snapshots failing the class selection predicate are skipped.
    """
    batch = list(snapshots)
    graph = ObjectGraph(warehouse.source, batch)
    rows: dict[str, dict[str, ExtractedRow]] = {}
    covered: set[str] = set()
    warehouse_link_names = set(warehouse.links)

    for cls in warehouse.classes.values():
        candidates = {cls.source_class, *warehouse.source.descendants(cls.source_class)}
        batch_for_class = [s for s in batch if s.class_name in candidates]
        if not batch_for_class:
            continue
        covered.add(cls.name)
        selection = parse_formula(cls.selection) if cls.selection else None
        context = EvaluationContext(warehouse.source, cls.source_class)
        out: dict[str, ExtractedRow] = {}
        for snap in batch_for_class:
            binding = Binding(graph, snap.id)
            if selection is not None:
                keep = evaluate(selection, context, binding)
                if keep is not True:
                    continue
            values = {
                attr.name: _attribute_value(attr, snap, context, binding)
                for attr in cls.attributes if attr.kind != "specific"
            }
            links = {name: list(targets) for name, targets in snap.links.items()
                     if name in warehouse_link_names}
            out[snap.id] = ExtractedRow(snap.id, values, links, snap.id)
        rows[cls.name] = out
    return rows, covered
