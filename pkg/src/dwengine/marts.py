"""Star-shaped data marts derived from the warehouse.

A mart reorganizes warehouse data around one analysis subject: a single fact
class whose simple-typed attributes are the measures, surrounded by
dimension classes each reachable from the fact through an association link
that is single-valued at the dimension end. Sub-dimensions specialize a
dimension through inheritance and extend its parameter set and hierarchy.

Candidate dimensions come from the class-dependency relation. A class C2
depends on C1 when one of the direct rules applies:

- C1 reaches C2 over an association link whose target end is at most 1,
- C1 and C2 are related by inheritance, in either direction,
- C1 is the composite of component C2, or C1 is a component whose
  composite C2 is unique (max-cardinality 1 at the composite side),
- C1 = C2.

plus transitivity. Every dependency carries a replayable witness chain of
the link hops that produced it; mart loading follows the same chain on
instance data to resolve each fact object's dimension member.

Dimension hierarchies order parameters by hierarchical dependency: an exact
functional dependency whose inverse fails. Inference scans every ordered
parameter pair on an extension sample, keeps the asymmetric dependencies and
prunes transitively implied edges so the displayed chain matches the usual
day => month => quarter => year reading.
"""

from __future__ import annotations

import copy
import datetime as _dt
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any

from .errors import (
    AmbiguousLinkageError,
    DuplicateNameError,
    EmptySampleError,
    FactAlreadyDefinedError,
    HierarchyCycleError,
    HierarchyDependencyError,
    ComplexMeasureError,
    NonBooleanPredicateError,
    NonDateAttributeError,
    NonDependentClassError,
    NotRepresentativeError,
    ParameterCollisionError,
    UnknownAttributeError,
    UnknownClassError,
    UnknownDimensionError,
    ValidationDiagnosticsError,
)
from .expressions import (
    Binding,
    EvaluationContext,
    ExpressionTree,
    Node,
    evaluate,
    parse_formula,
    validate,
)
from .schema_core import AttributeType, ObjectGraph, ObjectSnapshot
from .temporal import WarehouseStore
from .warehouse import WarehouseDef, infer_type
from . import jsonutil


# -- class dependencies --------------------------------------------------------

@dataclass(frozen=True)
class ClassDependency:
    """C2 qualifies as a dimension candidate for C1, with its derivation."""

    source: str
    target: str
    witness: tuple[str, ...]  # "reflexive" or "kind:link:->" / "kind:link:<-" steps

    def to_json(self) -> dict[str, Any]:
        return {"source": self.source, "target": self.target,
                "witness": list(self.witness)}


def direct_dependencies(schema, class_name: str) -> list[ClassDependency]:
    """One application of each direct rule, reflexivity included."""
    schema.get_class(class_name)
    deps: dict[str, ClassDependency] = {
        class_name: ClassDependency(class_name, class_name, ("reflexive",))}
    for link in sorted(schema.links.values(), key=lambda l: l.name):
        if link.kind == "association":
            if (link.source == class_name and link.target not in deps
                    and link.card("target").max == 1):
                deps[link.target] = ClassDependency(
                    class_name, link.target, (f"association:{link.name}:->",))
        elif link.kind == "inheritance":
            if link.source == class_name and link.target not in deps:
                deps[link.target] = ClassDependency(
                    class_name, link.target, (f"inheritance:{link.name}:->",))
            if link.target == class_name and link.source not in deps:
                deps[link.source] = ClassDependency(
                    class_name, link.source, (f"inheritance:{link.name}:<-",))
        elif link.kind == "composition":
            if link.source == class_name and link.target not in deps:
                deps[link.target] = ClassDependency(
                    class_name, link.target, (f"composition:{link.name}:->",))
            if (link.target == class_name and link.source not in deps
                    and link.card("source").max == 1):
                deps[link.source] = ClassDependency(
                    class_name, link.source, (f"composition:{link.name}:<-",))
    return sorted(deps.values(), key=lambda d: d.target)


def transitive_dependencies(schema, class_name: str) -> list[ClassDependency]:
    """Least fixpoint of the direct rules under transitivity (breadth-first,
    so each witness chain is a shortest derivation)."""
    schema.get_class(class_name)
    found: dict[str, ClassDependency] = {
        class_name: ClassDependency(class_name, class_name, ("reflexive",))}
    queue = [class_name]
    while queue:
        current = queue.pop(0)
        base = found[current].witness if current != class_name else ()
        for dep in direct_dependencies(schema, current):
            if dep.target in found or dep.witness == ("reflexive",):
                continue
            found[dep.target] = ClassDependency(
                class_name, dep.target, base + dep.witness)
            queue.append(dep.target)
    return sorted(found.values(), key=lambda d: d.target)


def replay_witness(schema, dep: ClassDependency) -> bool:
    """Check that a witness chain is a valid derivation of the dependency."""
    current = dep.source
    if dep.witness == ("reflexive",):
        return dep.source == dep.target
    for step in dep.witness:
        if step == "reflexive":
            continue
        try:
            kind, link_name, arrow = step.split(":")
        except ValueError:
            return False
        link = schema.links.get(link_name)
        if link is None or link.kind != kind:
            return False
        forward = arrow == "->"
        here, there = (link.source, link.target) if forward else (link.target, link.source)
        if here != current:
            return False
        if kind == "association":
            if not (forward and link.card("target").max == 1):
                return False
        elif kind == "composition":
            if not forward and link.card("source").max != 1:
                return False
        elif kind != "inheritance":
            return False
        current = there
    return current == dep.target


# -- representative classes ------------------------------------------------------

def detect_representative_classes(warehouse: WarehouseDef,
                                  runs: list) -> tuple[list[tuple[str, Decimal]], list[str]]:
    """Rank classes by insertion rate per run; high churn marks the subject."""
    if len(runs) < 2:
        return [], ["need at least two extraction runs to detect update rates"]
    totals: dict[str, int] = {name: 0 for name in warehouse.classes}
    for run in runs:
        for cname, counters in run.classes.items():
            if cname in totals:
                totals[cname] += counters.get("inserted", 0)
    nruns = Decimal(len(runs))
    scored = [(name, Decimal(total) / nruns) for name, total in totals.items()
              if total > 0]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored, []


# -- mart model --------------------------------------------------------------------

@dataclass
class MartAttribute:
    """A measure or parameter: copied from the warehouse or calculated."""

    name: str
    type: AttributeType
    stored: bool
    source_attribute: str | None = None  # warehouse attribute name when stored
    formula: str | None = None           # canonical text when calculated

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "type": self.type.to_json(),
                               "stored": self.stored}
        if self.source_attribute:
            out["source_attribute"] = self.source_attribute
        if self.formula:
            out["formula"] = self.formula
        return out

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "MartAttribute":
        return cls(data["name"], AttributeType.from_json(data["type"]),
                   data["stored"], data.get("source_attribute"), data.get("formula"))


@dataclass
class HierarchyGraph:
    nodes: list[str] = field(default_factory=list)
    edges: list[tuple[str, str]] = field(default_factory=list)

    def successors(self, node: str) -> list[str]:
        return [b for a, b in self.edges if a == node]

    def find_cycle(self) -> list[str] | None:
        for start in self.nodes:
            path: list[str] = []

            def dfs(node: str) -> list[str] | None:
                if node in path:
                    return path[path.index(node):] + [node]
                path.append(node)
                for nxt in self.successors(node):
                    cyc = dfs(nxt)
                    if cyc:
                        return cyc
                path.pop()
                return None

            cycle = dfs(start)
            if cycle:
                return cycle
        return None

    def to_json(self) -> dict[str, Any]:
        return {"nodes": list(self.nodes), "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "HierarchyGraph":
        return cls(list(data.get("nodes", [])),
                   [tuple(e) for e in data.get("edges", [])])


@dataclass
class FactClass:
    name: str
    origin_class: str
    measures: list[MartAttribute] = field(default_factory=list)
    selection: str | None = None

    def measure(self, name: str) -> MartAttribute | None:
        for m in self.measures:
            if m.name == name:
                return m
        return None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "origin": self.origin_class,
                               "measures": [m.to_json() for m in self.measures]}
        if self.selection:
            out["selection"] = self.selection
        return out


@dataclass
class DimensionClass:
    name: str
    origin_class: str | None = None       # warehouse class the members come from
    origin_attribute: tuple[str, str] | None = None  # (class, attribute) origin
    parameters: list[MartAttribute] = field(default_factory=list)
    hierarchy: HierarchyGraph = field(default_factory=HierarchyGraph)
    parent: str | None = None             # super-dimension name
    membership: str | None = None         # selection text for specializations
    selection: str | None = None          # import filter
    witness: tuple[str, ...] = ()         # chain from the fact's origin class

    def parameter(self, name: str) -> MartAttribute | None:
        for p in self.parameters:
            if p.name == name:
                return p
        return None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "name": self.name,
            "parameters": [p.to_json() for p in self.parameters],
            "hierarchy": self.hierarchy.to_json(),
        }
        if self.origin_class:
            out["origin"] = self.origin_class
        if self.origin_attribute:
            out["origin_attribute"] = list(self.origin_attribute)
        if self.parent:
            out["parent"] = self.parent
        if self.membership:
            out["membership"] = self.membership
        if self.selection:
            out["selection"] = self.selection
        if self.witness:
            out["witness"] = list(self.witness)
        return out


@dataclass
class MartDef:
    name: str
    fact: FactClass | None = None
    dimensions: dict[str, DimensionClass] = field(default_factory=dict)

    def clone(self) -> "MartDef":
        return copy.deepcopy(self)

    def get_dimension(self, name: str) -> DimensionClass:
        dim = self.dimensions.get(name)
        if dim is None:
            raise UnknownDimensionError(f"mart {self.name!r} has no dimension {name!r}",
                                        mart=self.name, dimension=name)
        return dim

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "fact": self.fact.to_json() if self.fact else None,
            "dimensions": [d.to_json() for d in self.dimensions.values()],
        }

    def validate_star(self) -> None:
        """Fact present, dimensions fact-adjacent or specializing, no complex measures."""
        if self.fact is None:
            raise ValidationDiagnosticsError(f"mart {self.name!r} has no fact class",
                                             mart=self.name)
        for measure in self.fact.measures:
            if not measure.type.is_simple:
                raise ComplexMeasureError(
                    f"measure {measure.name!r} has a complex type",
                    mart=self.name, measure=measure.name)
        for dim in self.dimensions.values():
            if dim.parent is not None:
                parent = self.dimensions.get(dim.parent)
                if parent is None:
                    raise UnknownDimensionError(
                        f"dimension {dim.name!r} specializes unknown {dim.parent!r}",
                        mart=self.name, dimension=dim.name)
                for p in parent.parameters:
                    if dim.parameter(p.name) is None:
                        raise ParameterCollisionError(
                            f"dimension {dim.name!r} lost inherited parameter {p.name!r}",
                            dimension=dim.name, parameter=p.name)
            else:
                if dim.origin_class is None and dim.origin_attribute is None:
                    raise NonDependentClassError(
                        f"dimension {dim.name!r} has no origin", dimension=dim.name)
            cycle = dim.hierarchy.find_cycle()
            if cycle:
                raise HierarchyCycleError(
                    f"hierarchy of {dim.name!r} has a cycle", dimension=dim.name,
                    cycle=cycle)


def create_mart(name: str) -> MartDef:
    return MartDef(name=name)


# -- fact ----------------------------------------------------------------------------

def project_fact(mart: MartDef, warehouse: WarehouseDef, class_name: str,
                 fact_name: str, runs: list | None = None,
                 force: bool = False) -> tuple[MartDef, list[str]]:
    """Project a representative warehouse class as the mart's fact class.

    Simple-typed attributes become stored measures; complex-typed ones are
    dropped, one diagnostic each. ``force`` is the administrator override
    when no run history backs the choice.
    """
    if mart.fact is not None:
        raise FactAlreadyDefinedError(
            f"mart {mart.name!r} already has fact {mart.fact.name!r}",
            mart=mart.name, fact=mart.fact.name)
    cls = warehouse.get(class_name)
    if not force:
        ranked, notes = detect_representative_classes(warehouse, runs or [])
        names = [name for name, _ in ranked]
        if class_name not in names:
            raise NotRepresentativeError(
                f"class {class_name!r} is not detected as representative"
                + (f" ({notes[0]})" if notes else ""),
                class_name=class_name, ranked=names)
    out = mart.clone()
    diagnostics: list[str] = []
    measures: list[MartAttribute] = []
    for attr in cls.attributes:
        if attr.type.is_simple:
            measures.append(MartAttribute(
                name=attr.name, type=attr.type, stored=True,
                source_attribute=attr.name))
        else:
            diagnostics.append(
                f"attribute {attr.name!r} dropped: complex types cannot be measures")
    out.fact = FactClass(name=fact_name, origin_class=class_name, measures=measures)
    return out, diagnostics


# -- dimensions ------------------------------------------------------------------------

def _dependency_for(warehouse: WarehouseDef, fact: FactClass,
                    class_name: str) -> ClassDependency:
    schema = warehouse.schema()
    for dep in transitive_dependencies(schema, fact.origin_class):
        if dep.target == class_name:
            return dep
    raise NonDependentClassError(
        f"class {class_name!r} does not depend on {fact.origin_class!r}",
        class_name=class_name, fact_origin=fact.origin_class)


def project_dimension(mart: MartDef, warehouse: WarehouseDef, class_name: str,
                      dimension_name: str | None = None) -> MartDef:
    """Project a dependent warehouse class as a dimension (all attributes
    become parameters, simple and complex alike)."""
    if mart.fact is None:
        raise NonDependentClassError("project a fact class first", mart=mart.name)
    dep = _dependency_for(warehouse, mart.fact, class_name)
    cls = warehouse.get(class_name)
    name = dimension_name or class_name
    if name in mart.dimensions:
        raise DuplicateNameError(f"dimension {name!r} already exists",
                                 mart=mart.name, dimension=name)
    out = mart.clone()
    parameters = [
        MartAttribute(name=a.name, type=a.type, stored=True, source_attribute=a.name)
        for a in cls.attributes
    ]
    out.dimensions[name] = DimensionClass(
        name=name, origin_class=class_name, parameters=parameters,
        witness=dep.witness)
    return out


def project_dimension_from_attribute(mart: MartDef, warehouse: WarehouseDef,
                                     class_name: str, attribute: str,
                                     dimension_name: str) -> MartDef:
    """Derive a temporal or geographic dimension from a date- or
    address-tagged attribute of a dependent class."""
    if mart.fact is None:
        raise NonDependentClassError("project a fact class first", mart=mart.name)
    dep = _dependency_for(warehouse, mart.fact, class_name)
    cls = warehouse.get(class_name)
    attr = cls.attribute(attribute)
    if attr is None:
        # Accept the source name too; formulas and the studio use it.
        stored = warehouse.aliases().get(class_name, {}).get(attribute)
        attr = cls.attribute(stored) if stored else None
    if attr is None:
        raise UnknownAttributeError(
            f"class {class_name!r} has no attribute {attribute!r}",
            class_name=class_name, attribute=attribute)
    if dimension_name in mart.dimensions:
        raise DuplicateNameError(f"dimension {dimension_name!r} already exists",
                                 mart=mart.name, dimension=dimension_name)

    out = mart.clone()
    if attr.type.kind == "date":
        schema = warehouse.schema()
        context = EvaluationContext(schema, class_name, warehouse.aliases())
        from .expressions import derive_date_parameters
        trees = derive_date_parameters(class_name, attr.name, context)
        parameters = [
            MartAttribute(name=pname, type=infer_type(tree, context), stored=False,
                          formula=tree.text)
            for pname, tree in trees.items()
        ]
    elif attr.semantic == "address":
        parameters = [MartAttribute(name=attr.name, type=attr.type, stored=True,
                                    source_attribute=attr.name)]
    else:
        raise NonDateAttributeError(
            f"{class_name}.{attribute} is neither date-typed nor address-tagged",
            class_name=class_name, attribute=attribute)
    out.dimensions[dimension_name] = DimensionClass(
        name=dimension_name, origin_class=None,
        origin_attribute=(class_name, attr.name), parameters=parameters,
        witness=dep.witness)
    return out


def project_all_dependencies(mart: MartDef, warehouse: WarehouseDef) -> MartDef:
    """Let the engine project every detected dependent class at once."""
    if mart.fact is None:
        raise NonDependentClassError("project a fact class first", mart=mart.name)
    out = mart
    schema = warehouse.schema()
    for dep in transitive_dependencies(schema, mart.fact.origin_class):
        if dep.target == mart.fact.origin_class:
            continue
        if any(d.origin_class == dep.target for d in out.dimensions.values()):
            continue
        if dep.target in out.dimensions:
            continue
        out = project_dimension(out, warehouse, dep.target)
    return out


def specialize_dimension(mart: MartDef, parent_name: str, new_name: str,
                         extra_parameters: list[MartAttribute] | None = None,
                         membership: ExpressionTree | str | None = None) -> MartDef:
    """Create a sub-dimension: inherits parameters and hierarchy, may extend
    both; the membership predicate decides which members populate it."""
    parent = mart.get_dimension(parent_name)
    if new_name in mart.dimensions:
        raise DuplicateNameError(f"dimension {new_name!r} already exists",
                                 mart=mart.name, dimension=new_name)
    extras = list(extra_parameters or [])
    inherited_names = {p.name for p in parent.parameters}
    for extra in extras:
        if extra.name in inherited_names:
            raise ParameterCollisionError(
                f"parameter {extra.name!r} collides with an inherited parameter",
                dimension=new_name, parameter=extra.name)
    text = None
    if membership is not None:
        tree = parse_formula(membership) if isinstance(membership, str) else membership
        if tree.kind != "selection":
            raise NonBooleanPredicateError("membership predicate must be boolean")
        text = tree.text
    out = mart.clone()
    out.dimensions[new_name] = DimensionClass(
        name=new_name,
        origin_class=parent.origin_class,
        origin_attribute=parent.origin_attribute,
        parameters=[copy.deepcopy(p) for p in parent.parameters] + extras,
        hierarchy=HierarchyGraph(list(parent.hierarchy.nodes),
                                 list(parent.hierarchy.edges)),
        parent=parent_name,
        membership=text,
        witness=parent.witness)
    return out


# -- hierarchies --------------------------------------------------------------------------

def _holds_fd(sample: list[dict[str, Any]], a: str, b: str) -> bool:
    mapping: dict[Any, Any] = {}
    for row in sample:
        key = _freeze(row.get(a))
        val = _freeze(row.get(b))
        if key in mapping:
            if mapping[key] != val:
                return False
        else:
            mapping[key] = val
    return True


def _freeze(value: Any) -> Any:
    if isinstance(value, Decimal):
        return jsonutil.canonical_decimal(value)
    if isinstance(value, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in value.items()))
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def infer_hierarchy(dimension: DimensionClass,
                    sample: list[dict[str, Any]]) -> HierarchyGraph:
    """Mine hierarchical dependencies on an extension sample.

    Edge A => B iff the functional dependency A -> B holds exactly on the
    sample and B -> A fails; mutual dependencies produce no edge, so the
    result is acyclic by construction. Transitively implied edges are pruned.
    Complex-typed parameters are stored but never take part.
    """
    if not sample:
        raise EmptySampleError(f"no sample rows for dimension {dimension.name!r}",
                               dimension=dimension.name)
    params = [p.name for p in dimension.parameters if p.type.is_simple]
    edges: set[tuple[str, str]] = set()
    for a in params:
        for b in params:
            if a == b:
                continue
            if _holds_fd(sample, a, b) and not _holds_fd(sample, b, a):
                edges.add((a, b))
    reduced = [
        (a, b) for (a, b) in sorted(edges)
        if not any((a, w) in edges and (w, b) in edges for w in params
                   if w not in (a, b))
    ]
    nodes = sorted({n for e in reduced for n in e})
    return HierarchyGraph(nodes=nodes, edges=reduced)


def set_hierarchy(mart: MartDef, dimension_name: str,
                  hierarchy: HierarchyGraph) -> MartDef:
    """Install a hierarchy wholesale (the replayable form of inference)."""
    dim = mart.get_dimension(dimension_name)
    for node in hierarchy.nodes:
        if dim.parameter(node) is None:
            raise UnknownAttributeError(
                f"hierarchy node {node!r} is not a parameter of {dimension_name!r}",
                dimension=dimension_name, parameter=node)
    cycle = hierarchy.find_cycle()
    if cycle:
        raise HierarchyCycleError("hierarchy has a cycle", cycle=cycle,
                                  dimension=dimension_name)
    out = mart.clone()
    out.dimensions[dimension_name].hierarchy = HierarchyGraph(
        list(hierarchy.nodes), [tuple(e) for e in hierarchy.edges])
    return out


def add_hierarchy_edge(mart: MartDef, dimension_name: str, from_param: str,
                       to_param: str,
                       sample: list[dict[str, Any]] | None = None) -> MartDef:
    """Manual edge; acyclicity always re-checked, the dependency itself when
    a sample is at hand."""
    dim = mart.get_dimension(dimension_name)
    for p in (from_param, to_param):
        if dim.parameter(p) is None:
            raise UnknownAttributeError(
                f"{p!r} is not a parameter of {dimension_name!r}",
                dimension=dimension_name, parameter=p)
    if sample:
        if not (_holds_fd(sample, from_param, to_param)
                and not _holds_fd(sample, to_param, from_param)):
            raise HierarchyDependencyError(
                f"{from_param!r} => {to_param!r} is not an asymmetric dependency "
                "on the sample", dimension=dimension_name,
                edge=[from_param, to_param])
    out = mart.clone()
    hierarchy = out.dimensions[dimension_name].hierarchy
    if (from_param, to_param) not in hierarchy.edges:
        hierarchy.edges.append((from_param, to_param))
    for p in (from_param, to_param):
        if p not in hierarchy.nodes:
            hierarchy.nodes.append(p)
    cycle = hierarchy.find_cycle()
    if cycle:
        raise HierarchyCycleError(
            f"edge {from_param!r} => {to_param!r} would close a cycle",
            dimension=dimension_name, cycle=cycle)
    return out


def remove_hierarchy_edge(mart: MartDef, dimension_name: str, from_param: str,
                          to_param: str) -> MartDef:
    dim = mart.get_dimension(dimension_name)
    if (from_param, to_param) not in dim.hierarchy.edges:
        raise UnknownAttributeError(
            f"no hierarchy edge {from_param!r} => {to_param!r}",
            dimension=dimension_name, edge=[from_param, to_param])
    out = mart.clone()
    hierarchy = out.dimensions[dimension_name].hierarchy
    hierarchy.edges.remove((from_param, to_param))
    hierarchy.nodes = [n for n in hierarchy.nodes
                       if any(n in e for e in hierarchy.edges)]
    return out


# -- computed measures, parameters, selections ----------------------------------------------

def _mart_context(warehouse: WarehouseDef, anchor: str) -> EvaluationContext:
    return EvaluationContext(warehouse.schema(), anchor, warehouse.aliases())


def add_measure(mart: MartDef, warehouse: WarehouseDef, name: str,
                formula: ExpressionTree | str) -> MartDef:
    """Calculated measure; the query starts at the fact's origin class."""
    if mart.fact is None:
        raise NonDependentClassError("project a fact class first", mart=mart.name)
    if mart.fact.measure(name) is not None:
        raise DuplicateNameError(f"measure {name!r} already exists",
                                 mart=mart.name, measure=name)
    tree = parse_formula(formula) if isinstance(formula, str) else formula
    context = _mart_context(warehouse, mart.fact.origin_class)
    diags = validate(tree, context)
    if diags:
        raise ValidationDiagnosticsError(f"measure {name!r} does not validate",
                                         diagnostics=diags)
    mtype = infer_type(tree, context)
    if not mtype.is_simple:
        raise ComplexMeasureError(f"measure {name!r} would have a complex type",
                                  measure=name)
    out = mart.clone()
    out.fact.measures.append(MartAttribute(
        name=name, type=mtype, stored=False, formula=tree.text))
    return out


def add_parameter(mart: MartDef, warehouse: WarehouseDef, dimension_name: str,
                  name: str, formula: ExpressionTree | str) -> MartDef:
    """Calculated parameter; the query starts at the dimension's origin."""
    dim = mart.get_dimension(dimension_name)
    if dim.parameter(name) is not None:
        raise DuplicateNameError(f"parameter {name!r} already exists",
                                 dimension=dimension_name, parameter=name)
    anchor = dim.origin_class or (dim.origin_attribute and dim.origin_attribute[0])
    if anchor is None:
        raise UnknownDimensionError(f"dimension {dimension_name!r} has no origin",
                                    dimension=dimension_name)
    tree = parse_formula(formula) if isinstance(formula, str) else formula
    context = _mart_context(warehouse, anchor)
    diags = validate(tree, context)
    if diags:
        raise ValidationDiagnosticsError(f"parameter {name!r} does not validate",
                                         diagnostics=diags)
    out = mart.clone()
    out.dimensions[dimension_name].parameters.append(MartAttribute(
        name=name, type=infer_type(tree, context), stored=False, formula=tree.text))
    return out


def select_objects(mart: MartDef, warehouse: WarehouseDef, target: str,
                   predicate: ExpressionTree | str) -> MartDef:
    """Limit which warehouse objects a fact or dimension class imports."""
    tree = parse_formula(predicate) if isinstance(predicate, str) else predicate
    if tree.kind != "selection":
        raise NonBooleanPredicateError("selection must be a boolean tree",
                                       target=target)
    out = mart.clone()
    if out.fact is not None and target in (out.fact.name, None):
        anchor = out.fact.origin_class
        diags = validate(tree, _mart_context(warehouse, anchor))
        if diags:
            raise ValidationDiagnosticsError("selection does not validate",
                                             diagnostics=diags)
        out.fact.selection = tree.text
        return out
    dim = out.get_dimension(target)
    anchor = dim.origin_class or (dim.origin_attribute and dim.origin_attribute[0])
    diags = validate(tree, _mart_context(warehouse, anchor))
    if diags:
        raise ValidationDiagnosticsError("selection does not validate",
                                         diagnostics=diags)
    dim.selection = tree.text
    return out


# -- loading -----------------------------------------------------------------------------------

@dataclass
class MartData:
    fact_rows: list[dict[str, Any]]
    dimension_rows: dict[str, list[dict[str, Any]]]

    def export_fact(self) -> str:
        return jsonutil.dump_lines(self.fact_rows)

    def export_dimension(self, name: str) -> str:
        return jsonutil.dump_lines(self.dimension_rows[name])


def _store_object_graph(warehouse: WarehouseDef, store: WarehouseStore) -> ObjectGraph:
    schema = warehouse.schema()
    snapshots = []
    for cname in warehouse.classes:
        values = store.latest_values(cname)
        links = store.latest_links(cname)
        for oid, vals in values.items():
            snapshots.append(ObjectSnapshot(
                id=oid, class_name=cname, values=vals,
                links=links.get(oid, {})))
    return ObjectGraph(schema, snapshots)


def _follow_witness(graph: ObjectGraph, witness: tuple[str, ...],
                    start_class: str, start_id: str) -> list[tuple[str, str]]:
    current = [(start_class, start_id)]
    for step in witness:
        if step == "reflexive":
            continue
        kind, link_name, arrow = step.split(":")
        link = graph.schema.links[link_name]
        forward = arrow == "->"
        next_class = link.target if forward else link.source
        nxt: list[tuple[str, str]] = []
        seen: set[str] = set()
        for cls, oid in current:
            if link.kind == "inheritance":
                if oid not in seen and graph.get(next_class, oid) is not None:
                    seen.add(oid)
                    nxt.append((next_class, oid))
                continue
            snap = graph.get(cls, oid)
            if snap is None:
                continue
            for tid in graph.follow(snap, link, forward):
                if tid not in seen:
                    seen.add(tid)
                    nxt.append((next_class, tid))
        current = nxt
    return current


def _selection_filter(warehouse: WarehouseDef, anchor: str, text: str | None,
                      graph: ObjectGraph):
    if text is None:
        return lambda oid: True
    tree = parse_formula(text)
    context = _mart_context(warehouse, anchor)

    def keep(oid: str) -> bool:
        return evaluate(tree, context, Binding(graph, oid)) is True

    return keep


def load_mart(mart: MartDef, warehouse: WarehouseDef,
              store: WarehouseStore) -> MartData:
    """Materialize the star over the warehouse's latest states.

    Fact rows carry the measures plus one foreign key per fact-adjacent
    dimension, resolved by walking the dimension's witness chain on instance
    links. A chain that fans out to several members is ambiguous and
    refused; a chain that reaches none leaves a null key.
    """
    mart.validate_star()
    graph = _store_object_graph(warehouse, store)
    fact = mart.fact
    context_cache: dict[str, EvaluationContext] = {}

    def context_for(anchor: str) -> EvaluationContext:
        if anchor not in context_cache:
            context_cache[anchor] = _mart_context(warehouse, anchor)
        return context_cache[anchor]

    dimension_rows: dict[str, list[dict[str, Any]]] = {}
    member_ids: dict[str, list[Any]] = {}
    for dim in mart.dimensions.values():
        rows: list[dict[str, Any]] = []
        ids: list[Any] = []
        if dim.origin_attribute is not None:
            cls_name, attr_name = dim.origin_attribute
            seen: set[Any] = set()
            keep = _selection_filter(warehouse, cls_name, dim.selection, graph)
            for oid in sorted(store.latest_values(cls_name)):
                if not keep(oid):
                    continue
                value = store.latest_values(cls_name)[oid].get(attr_name)
                if value is None or _freeze(value) in seen:
                    continue
                seen.add(_freeze(value))
                row_id = value.isoformat() if isinstance(value, _dt.date) else str(value)
                row = {"id": row_id, "parameters": {}}
                for param in dim.parameters:
                    row["parameters"][param.name] = _parameter_from_value(param, value)
                rows.append(row)
                ids.append(row_id)
        else:
            origin = dim.origin_class
            keep = _selection_filter(warehouse, origin, dim.selection, graph)
            member = None
            if dim.membership is not None:
                member_tree = parse_formula(dim.membership)
                member = lambda oid, t=member_tree, a=origin: evaluate(
                    t, context_for(a), Binding(graph, oid)) is True
            values = store.latest_values(origin)
            for oid in sorted(values):
                if not keep(oid):
                    continue
                if member is not None and not member(oid):
                    continue
                row = {"id": oid, "parameters": {}}
                for param in dim.parameters:
                    if param.stored:
                        row["parameters"][param.name] = values[oid].get(
                            param.source_attribute)
                    else:
                        row["parameters"][param.name] = evaluate(
                            parse_formula(param.formula), context_for(origin),
                            Binding(graph, oid))
                rows.append(row)
                ids.append(oid)
        dimension_rows[dim.name] = rows
        member_ids[dim.name] = ids

    fact_rows: list[dict[str, Any]] = []
    fact_values = store.latest_values(fact.origin_class)
    keep_fact = _selection_filter(warehouse, fact.origin_class, fact.selection, graph)
    root_dims = [d for d in mart.dimensions.values() if d.parent is None]
    for oid in sorted(fact_values):
        if not keep_fact(oid):
            continue
        measures: dict[str, Any] = {}
        for measure in fact.measures:
            if measure.stored:
                measures[measure.name] = fact_values[oid].get(measure.source_attribute)
            else:
                measures[measure.name] = evaluate(
                    parse_formula(measure.formula), context_for(fact.origin_class),
                    Binding(graph, oid))
        keys: dict[str, Any] = {}
        for dim in root_dims:
            keys[dim.name] = _resolve_key(mart, dim, graph, store, fact, oid,
                                          member_ids[dim.name])
        fact_rows.append({"id": oid, "measures": measures, "dimensions": keys})
    return MartData(fact_rows=fact_rows, dimension_rows=dimension_rows)


def _parameter_from_value(param: MartAttribute, value: Any) -> Any:
    """Parameters of attribute-origin dimensions compute from the value itself."""
    if param.stored:
        return value
    tree = parse_formula(param.formula)
    node = tree.root
    if node.op in ("month", "quarter", "year", "day_label") and isinstance(value, _dt.date):
        from .expressions import WEEKDAY_LABELS
        if node.op == "month":
            return value.month
        if node.op == "year":
            return value.year
        if node.op == "quarter":
            return (value.month + 2) // 3
        return WEEKDAY_LABELS[value.weekday()]
    return value


def _resolve_key(mart: MartDef, dim: DimensionClass, graph: ObjectGraph,
                 store: WarehouseStore, fact: FactClass, fact_id: str,
                 member_ids: list[Any]) -> Any:
    if dim.origin_attribute is not None:
        cls_name, attr_name = dim.origin_attribute
        reached = _follow_witness(graph, dim.witness, fact.origin_class, fact_id)
        values = {v for v in (store.latest_values(cls_name).get(oid, {}).get(attr_name)
                              for _, oid in reached) if v is not None}
        if len(values) > 1:
            raise AmbiguousLinkageError(
                f"fact object {fact_id!r} reaches {len(values)} members of "
                f"dimension {dim.name!r}", fact_id=fact_id, dimension=dim.name)
        if not values:
            return None
        value = values.pop()
        key = value.isoformat() if isinstance(value, _dt.date) else str(value)
        return key if key in member_ids else None
    reached = _follow_witness(graph, dim.witness, fact.origin_class, fact_id)
    ids = [oid for _, oid in reached if oid in member_ids]
    if len(ids) > 1:
        raise AmbiguousLinkageError(
            f"fact object {fact_id!r} reaches {len(ids)} members of dimension "
            f"{dim.name!r}", fact_id=fact_id, dimension=dim.name)
    return ids[0] if ids else None
