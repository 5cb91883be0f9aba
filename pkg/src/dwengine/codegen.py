"""Script generation: structure creation, initial load, refresh.

Two targets share one plan model. The neutral target is a JSON step list a
tool can execute mechanically; the SQL target renders the same structure as
portable DDL (quoted identifiers, no vendor extensions). Generation is a
pure function of the definition: identical definitions yield byte-identical
output, and every step names the definition element it came from.

Structure mapping for the SQL target:

- class            -> one table, ``object_id`` primary key
- tuple attribute  -> flattened columns joined with underscores
- set/list         -> one child table (parent id, position, element columns)
- link             -> one two-column link table
- historized attribute -> history table (object id, value, start, end)
- historized class / environment member -> history table
  (object id, state id, start, end, value columns)
- mart             -> dimension tables first, then the fact table with one
  foreign key per fact-adjacent dimension

The refresh plan encodes the load pipeline per class: filter by the
selection predicate, map derived attributes, compute calculated ones,
detect changes, overwrite the current state, append attribute or state
history where marked, and leave specific attributes alone.

A small reference executor interprets neutral refresh plans over snapshot
batches, independently of the temporal store, so generated plans can be
checked against the store's own behaviour.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from typing import Any, Iterable

from . import jsonutil, straightline
from .errors import (
    EngineError,
    PlanExecutionError,
    UnvalidatedDefinitionError,
)
from .expressions import parse_formula
from .marts import MartDef
from .schema_core import AttributeType, ObjectSnapshot, SchemaGraph
from .temporal import TimeModel
from .warehouse import WarehouseDef

SQL_TYPES = {"string": "VARCHAR(255)", "integer": "INTEGER", "decimal": "DECIMAL",
             "boolean": "BOOLEAN", "date": "DATE"}

MAX_IDENT = 63


def safe_ident(name: str) -> str:
    """Identifiers survive as-is up to 63 chars, then truncate + hash suffix."""
    if len(name) <= MAX_IDENT:
        return name
    digest = jsonutil.sha256_hex(name)[:8]
    return name[:MAX_IDENT - 9] + "_" + digest


@dataclass
class PlanStep:
    id: str
    kind: str
    params: dict[str, Any]
    provenance: str

    def to_json(self) -> dict[str, Any]:
        return {"id": self.id, "kind": self.kind, "params": self.params,
                "provenance": self.provenance}


@dataclass
class EmissionPlan:
    target: str
    steps: list[PlanStep] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {"target": self.target, "steps": [s.to_json() for s in self.steps]}

    def text(self) -> str:
        if self.target == "neutral-plan":
            return jsonutil.dumps(self.to_json(), indent=2) + "\n"
        return render_sql(self)


class _Steps:
    def __init__(self):
        self.steps: list[PlanStep] = []

    def add(self, kind: str, params: dict[str, Any], provenance: str) -> None:
        self.steps.append(PlanStep(f"step-{len(self.steps) + 1:04d}", kind,
                                   params, provenance))


def _flatten(name: str, attr_type: AttributeType) -> tuple[list[dict[str, str]], list[tuple[str, AttributeType]]]:
    """(columns, collection attributes needing child tables)."""
    if attr_type.is_simple:
        return [{"name": name, "type": attr_type.kind}], []
    if attr_type.kind == "tuple":
        cols: list[dict[str, str]] = []
        children: list[tuple[str, AttributeType]] = []
        for comp_name, comp_type in attr_type.components:
            sub_cols, sub_children = _flatten(f"{name}_{comp_name}", comp_type)
            cols.extend(sub_cols)
            children.extend(sub_children)
        return cols, children
    return [], [(name, attr_type)]


def _class_tables(steps: _Steps, class_name: str, attrs: list[tuple[str, AttributeType]],
                  provenance: str) -> list[dict[str, str]]:
    columns = [{"name": "object_id", "type": "string"}]
    children: list[tuple[str, AttributeType]] = []
    for name, attr_type in attrs:
        cols, coll = _flatten(name, attr_type)
        columns.extend(cols)
        children.extend(coll)
    steps.add("create_class_table",
              {"table": safe_ident(class_name), "columns": columns,
               "primary_key": "object_id"},
              provenance)
    for name, attr_type in children:
        element_cols, nested = _flatten("value", attr_type.element)
        child_columns = [{"name": "object_id", "type": "string"},
                         {"name": "position", "type": "integer"}, *element_cols]
        steps.add("create_child_table",
                  {"table": safe_ident(f"{class_name}__{name}"),
                   "parent": safe_ident(class_name), "columns": child_columns},
                  f"{provenance}:attribute:{name}")
        # Collections nested inside collections stay out of scope for DDL.
        if nested:
            steps.add("unsupported_nested_collection",
                      {"attribute": name}, f"{provenance}:attribute:{name}")
    return columns


def emit_structure(definition: WarehouseDef | MartDef, target: str) -> EmissionPlan:
    """Structure-creation plan for a warehouse or a mart definition."""
    if isinstance(definition, WarehouseDef):
        return _emit_warehouse_structure(definition, target)
    if isinstance(definition, MartDef):
        return _emit_mart_structure(definition, target)
    raise UnvalidatedDefinitionError(
        f"cannot emit structure for {type(definition).__name__}")


def _validated_warehouse(warehouse: WarehouseDef) -> None:
    try:
        warehouse.check_closure()
        warehouse.schema()
    except EngineError as exc:
        raise UnvalidatedDefinitionError(
            f"warehouse definition does not validate: {exc.message}") from exc


def _emit_warehouse_structure(warehouse: WarehouseDef, target: str) -> EmissionPlan:
    _validated_warehouse(warehouse)
    steps = _Steps()
    for cname in sorted(warehouse.classes):
        cls = warehouse.classes[cname]
        attrs = [(a.name, a.type) for a in cls.attributes]
        columns = _class_tables(steps, cname, attrs, f"class:{cname}")
        for (hc, ha) in sorted(warehouse.historized_attributes):
            if hc != cname:
                continue
            attr = cls.attribute(ha)
            value_cols, _ = _flatten("value", attr.type) if attr else ([], [])
            steps.add("create_attribute_history_table",
                      {"table": safe_ident(f"{cname}__{ha}__history"),
                       "columns": [{"name": "object_id", "type": "string"},
                                   *value_cols,
                                   {"name": "start", "type": "date"},
                                   {"name": "end", "type": "date"}]},
                      f"historize-attribute:{cname}.{ha}")
        if warehouse.class_level_historized(cname):
            origin = f"historize-class:{cname}"
            for env in warehouse.environments.values():
                if cname in env.classes:
                    origin = f"environment:{env.name}:{cname}"
            value_columns = [c for c in columns if c["name"] != "object_id"]
            steps.add("create_state_history_table",
                      {"table": safe_ident(f"{cname}__history"),
                       "columns": [{"name": "object_id", "type": "string"},
                                   {"name": "state_id", "type": "integer"},
                                   {"name": "start", "type": "date"},
                                   {"name": "end", "type": "date"},
                                   *value_columns]},
                      origin)
    for lname in sorted(warehouse.links):
        link = warehouse.links[lname]
        if link.kind == "inheritance":
            continue
        steps.add("create_link_table",
                  {"table": safe_ident(f"link_{lname}"),
                   "columns": [{"name": "source_id", "type": "string"},
                               {"name": "target_id", "type": "string"},
                               {"name": "position", "type": "integer"}],
                   "source": safe_ident(link.source),
                   "target": safe_ident(link.target)},
                  f"link:{lname}")
    return EmissionPlan(target=target, steps=steps.steps)


def _emit_mart_structure(mart: MartDef, target: str) -> EmissionPlan:
    try:
        mart.validate_star()
    except EngineError as exc:
        raise UnvalidatedDefinitionError(
            f"mart definition does not validate: {exc.message}") from exc
    steps = _Steps()
    for dname in sorted(mart.dimensions):
        dim = mart.dimensions[dname]
        columns = [{"name": "id", "type": "string"}]
        for param in dim.parameters:
            cols, children = _flatten(param.name, param.type)
            columns.extend(cols)
            for name, attr_type in children:
                element_cols, _ = _flatten("value", attr_type.element)
                steps.add("create_child_table",
                          {"table": safe_ident(f"{dname}__{name}"),
                           "parent": safe_ident(dname),
                           "columns": [{"name": "id", "type": "string"},
                                       {"name": "position", "type": "integer"},
                                       *element_cols]},
                          f"dimension:{dname}:parameter:{name}")
        params: dict[str, Any] = {"table": safe_ident(dname), "columns": columns,
                                  "primary_key": "id"}
        if dim.parent:
            params["specializes"] = safe_ident(dim.parent)
        steps.add("create_dimension_table", params, f"dimension:{dname}")
    fact = mart.fact
    columns = [{"name": "id", "type": "string"}]
    for measure in fact.measures:
        columns.append({"name": measure.name, "type": measure.type.kind})
    foreign_keys = []
    for dname in sorted(mart.dimensions):
        if mart.dimensions[dname].parent is None:
            columns.append({"name": f"{dname}_id", "type": "string"})
            foreign_keys.append({"column": f"{dname}_id",
                                 "references": safe_ident(dname)})
    steps.add("create_fact_table",
              {"table": safe_ident(fact.name), "columns": columns,
               "primary_key": "id", "foreign_keys": foreign_keys},
              f"fact:{fact.name}")
    return EmissionPlan(target=target, steps=steps.steps)


def emit_refresh(warehouse: WarehouseDef, target: str) -> EmissionPlan:
    """Refresh plan: filter, map, compute, change-detect, append history."""
    _validated_warehouse(warehouse)
    steps = _Steps()
    for cname in sorted(warehouse.classes):
        cls = warehouse.classes[cname]
        prov = f"class:{cname}"
        if cls.selection:
            steps.add("filter_selection", {"class": cname, "predicate": cls.selection},
                      f"{prov}:selection")
        derived = [{"name": a.name, "source_path": list(a.source_path)}
                   for a in cls.attributes if a.kind == "derived" and not a.grouped]
        grouped = [{"name": a.name,
                    "members": [{"name": m.name, "source_path": list(m.source_path)}
                                for m in a.grouped]}
                   for a in cls.attributes if a.grouped and a.kind == "derived"]
        if derived or grouped:
            params: dict[str, Any] = {"class": cname, "attributes": derived}
            if grouped:
                params["grouped"] = grouped
            steps.add("map_derived", params, prov)
        calculated = [{"name": a.name, "formula": a.formula}
                      for a in cls.attributes if a.kind == "calculated"]
        if calculated:
            steps.add("compute_calculated", {"class": cname, "attributes": calculated},
                      prov)
        non_specific = [a.name for a in cls.attributes if a.kind != "specific"]
        steps.add("change_detect",
                  {"class": cname, "source": cls.source_class,
                   "compare": non_specific}, prov)
        steps.add("overwrite_current", {"class": cname, "attributes": non_specific},
                  prov)
        specific = [{"name": a.name, "default": a.default}
                    for a in cls.attributes if a.kind == "specific"]
        if specific:
            steps.add("preserve_specific", {"class": cname, "attributes": specific},
                      prov)
        for (hc, ha) in sorted(warehouse.historized_attributes):
            if hc == cname:
                steps.add("append_attribute_history",
                          {"class": cname, "attribute": ha},
                          f"historize-attribute:{cname}.{ha}")
        if warehouse.class_level_historized(cname):
            origin = f"historize-class:{cname}"
            for env in warehouse.environments.values():
                if cname in env.classes:
                    origin = f"environment:{env.name}:{cname}"
            steps.add("append_state_history",
                      {"class": cname, "values": non_specific}, origin)
    return EmissionPlan(target=target, steps=steps.steps)


# -- SQL rendering --------------------------------------------------------------

def _sql_column(col: dict[str, str]) -> str:
    return f"\"{safe_ident(col['name'])}\" {SQL_TYPES[col['type']]}"


def render_sql(plan: EmissionPlan) -> str:
    """Render a plan as portable SQL, ';\\n'-separated statements."""
    statements: list[str] = []
    for step in plan.steps:
        p = step.params
        if step.kind in ("create_class_table", "create_dimension_table",
                         "create_child_table", "create_attribute_history_table",
                         "create_state_history_table", "create_link_table",
                         "create_fact_table"):
            lines = [_sql_column(c) for c in p["columns"]]
            if "primary_key" in p:
                lines.append(f"PRIMARY KEY (\"{p['primary_key']}\")")
            for fk in p.get("foreign_keys", []):
                lines.append(
                    f"FOREIGN KEY (\"{fk['column']}\") REFERENCES \"{fk['references']}\" (\"id\")")
            body = ",\n  ".join(lines)
            statements.append(f"CREATE TABLE \"{p['table']}\" (\n  {body}\n)")
        elif step.kind == "filter_selection":
            statements.append(
                f"-- refresh {p['class']}: keep rows where {p['predicate']}")
        elif step.kind == "map_derived":
            names = ", ".join(a["name"] for a in p["attributes"])
            statements.append(f"-- refresh {p['class']}: map source columns into {names}")
        elif step.kind == "compute_calculated":
            names = ", ".join(a["name"] for a in p["attributes"])
            statements.append(f"-- refresh {p['class']}: compute {names}")
        elif step.kind == "change_detect":
            statements.append(
                f"-- refresh {p['class']}: compare staged rows on "
                + ", ".join(p["compare"]))
        elif step.kind == "overwrite_current":
            table = safe_ident(p["class"])
            sets = ", ".join(f"\"{a}\" = s.\"{a}\"" for a in p["attributes"])
            statements.append(
                f"UPDATE \"{table}\" SET {sets} FROM \"staging_{table}\" s "
                f"WHERE \"{table}\".\"object_id\" = s.\"object_id\"")
            cols = ", ".join(f"\"{a}\"" for a in ("object_id", *p["attributes"]))
            statements.append(
                f"INSERT INTO \"{table}\" ({cols}) SELECT {cols} FROM "
                f"\"staging_{table}\" s WHERE NOT EXISTS (SELECT 1 FROM \"{table}\" t "
                f"WHERE t.\"object_id\" = s.\"object_id\")")
        elif step.kind == "preserve_specific":
            statements.append(
                f"-- refresh {p['class']}: user-owned columns "
                + ", ".join(a["name"] for a in p["attributes"]) + " are never written")
        elif step.kind == "append_attribute_history":
            table = safe_ident(f"{p['class']}__{p['attribute']}__history")
            statements.append(
                f"INSERT INTO \"{table}\" (\"object_id\", \"value\", \"start\", \"end\") "
                f"SELECT s.\"object_id\", s.\"{p['attribute']}\", CURRENT_DATE, NULL "
                f"FROM \"staging_{safe_ident(p['class'])}\" s")
        elif step.kind == "append_state_history":
            table = safe_ident(f"{p['class']}__history")
            statements.append(
                f"-- refresh {p['class']}: close the open state and append a new one "
                f"into \"{table}\" when any compared column changed")
        else:
            statements.append(f"-- {step.kind}: {jsonutil.dumps(p)}")
    return ";\n".join(statements) + ";\n"


# -- reference executor -----------------------------------------------------------

class PlanExecutor:
    """Interprets a neutral refresh plan over snapshot batches.

    Independent of the temporal store: filtering and formulas run on the
    stack-machine interpreter, change detection and history bookkeeping are
    re-derived from the plan steps alone. Reference navigation supports the
    anchor class and single forward hops, which covers generated plans
    (selections are anchor-local by construction).
    """

    def __init__(self, plan: EmissionPlan, source: SchemaGraph,
                 time_model: TimeModel | None = None):
        if plan.target != "neutral-plan":
            raise PlanExecutionError("only neutral plans are executable")
        self.plan = plan
        self.source = source
        self.time_model = time_model or TimeModel()
        self.current: dict[str, dict[str, dict[str, Any]]] = {}
        self.present: dict[str, set[str]] = {}
        self.attr_history: dict[str, dict[str, dict[str, list]]] = {}
        self.states: dict[str, dict[str, list[dict[str, Any]]]] = {}
        self.runs: list[dict[str, Any]] = []

    def _steps_for(self, class_name: str) -> list[PlanStep]:
        return [s for s in self.plan.steps if s.params.get("class") == class_name]

    def _classes(self) -> list[str]:
        seen: list[str] = []
        for step in self.plan.steps:
            cname = step.params.get("class")
            if cname and cname not in seen:
                seen.append(cname)
        return seen

    def run(self, snapshots: Iterable[ObjectSnapshot], date: Any) -> None:
        when = self.time_model.quantize(date)
        if self.runs and when <= self.runs[-1]["date"]:
            raise PlanExecutionError("refresh dates must increase")
        batch = list(snapshots)
        index: dict[tuple[str, str], ObjectSnapshot] = {
            (s.class_name, s.id): s for s in batch}
        seq = len(self.runs) + 1
        for cname in self._classes():
            self._run_class(cname, batch, index, when, seq)
        self.runs.append({"date": when, "seq": seq})

    def _run_class(self, cname: str, batch: list[ObjectSnapshot],
                   index: dict[tuple[str, str], ObjectSnapshot],
                   when: _dt.datetime, seq: int) -> None:
        steps = self._steps_for(cname)
        source_class = cname
        for step in steps:
            if step.kind == "change_detect":
                source_class = step.params.get("source", cname)
        candidates = [s for s in batch if s.class_name == source_class
                      or source_class in self.source.ancestors(s.class_name)]
        if not candidates:
            return

        def scalar_for(snap: ObjectSnapshot):
            def scalar(cls: str | None, attr: str) -> Any:
                if cls is None or cls == source_class:
                    return snap.values.get(attr)
                for link in sorted(self.source.links.values(), key=lambda l: l.name):
                    if link.source == source_class and link.target == cls:
                        targets = snap.links.get(link.name, [])
                        if len(targets) == 1:
                            other = index.get((cls, targets[0]))
                            return other.values.get(attr) if other else None
                return None

            def collection(cls: str | None, attr: str) -> list:
                if cls is None or cls == source_class:
                    value = snap.values.get(attr)
                    return value if isinstance(value, list) else [value]
                values = []
                for link in sorted(self.source.links.values(), key=lambda l: l.name):
                    if link.source == source_class and link.target == cls:
                        for tid in snap.links.get(link.name, []):
                            other = index.get((cls, tid))
                            if other is not None:
                                values.append(other.values.get(attr))
                return values

            return scalar, collection

        rows: dict[str, dict[str, Any]] = {}
        for snap in candidates:
            scalar, collection = scalar_for(snap)
            keep = True
            for step in steps:
                if step.kind == "filter_selection":
                    program = straightline.compile_formula(
                        parse_formula(step.params["predicate"]).root)
                    keep = straightline.run(program, scalar, collection) is True
                    if not keep:
                        break
            if not keep:
                continue
            values: dict[str, Any] = {}
            for step in steps:
                if step.kind == "map_derived":
                    for spec in step.params["attributes"]:
                        value: Any = snap.values
                        for part in spec["source_path"]:
                            value = value.get(part) if isinstance(value, dict) else None
                        values[spec["name"]] = value
                    for group in step.params.get("grouped", []):
                        packed = {}
                        for member in group["members"]:
                            value = snap.values
                            for part in member["source_path"]:
                                value = value.get(part) if isinstance(value, dict) else None
                            packed[member["name"]] = value
                        values[group["name"]] = packed
                elif step.kind == "compute_calculated":
                    for spec in step.params["attributes"]:
                        program = straightline.compile_formula(
                            parse_formula(spec["formula"]).root)
                        values[spec["name"]] = straightline.run(
                            program, scalar, collection)
            rows[snap.id] = values

        current = self.current.setdefault(cname, {})
        present = self.present.setdefault(cname, set())
        compare: list[str] = []
        for step in steps:
            if step.kind == "change_detect":
                compare = step.params["compare"]

        changed_ids: set[str] = set()
        inserted_ids: set[str] = set()
        for oid, values in sorted(rows.items()):
            old = current.get(oid)
            if old is None:
                inserted_ids.add(oid)
            else:
                if any(not _norm_eq(old.get(k), values.get(k))
                        for k in compare if k in values):
                    changed_ids.add(oid)

        for step in steps:
            if step.kind == "overwrite_current":
                for oid, values in sorted(rows.items()):
                    row = current.setdefault(oid, {})
                    for k in step.params["attributes"]:
                        if k in values:
                            row[k] = values[k]
            elif step.kind == "preserve_specific":
                for oid in sorted(rows):
                    row = current.setdefault(oid, {})
                    for spec in step.params["attributes"]:
                        if oid in inserted_ids or spec["name"] not in row:
                            row[spec["name"]] = spec["default"]
            elif step.kind == "append_attribute_history":
                attr = step.params["attribute"]
                table = self.attr_history.setdefault(cname, {}).setdefault(attr, {})
                for oid, values in sorted(rows.items()):
                    if attr not in values:
                        continue
                    entries = table.setdefault(oid, [])
                    if not entries or not _norm_eq(entries[-1][0], values[attr]):
                        entries.append((values[attr], when, seq))
            elif step.kind == "append_state_history":
                objects = self.states.setdefault(cname, {})
                for oid, values in sorted(rows.items()):
                    tracked = {k: values.get(k) for k in step.params["values"]
                               if k in values}
                    states = objects.setdefault(oid, [])
                    if not states:
                        states.append({"state_id": 1, "values": tracked,
                                       "start": when, "end": None, "run": seq})
                    elif not _norm_eq(states[-1]["values"], tracked):
                        states[-1]["end"] = when
                        states.append({"state_id": states[-1]["state_id"] + 1,
                                       "values": tracked, "start": when,
                                       "end": None, "run": seq})
        present.clear()
        present.update(rows)

    def export_history(self) -> str:
        tm = self.time_model
        records: list[dict[str, Any]] = []
        for cname in sorted(self.states):
            for oid in sorted(self.states[cname]):
                for state in self.states[cname][oid]:
                    records.append({
                        "class": cname, "object_id": oid,
                        "state_id": state["state_id"],
                        "values": state["values"],
                        "interval": {"start": tm.format(state["start"]),
                                     "end": None if state["end"] is None
                                     else tm.format(state["end"])},
                        "run": state["run"],
                    })
        for cname in sorted(self.attr_history):
            for attr in sorted(self.attr_history[cname]):
                per_object = self.attr_history[cname][attr]
                for oid in sorted(per_object):
                    entries = per_object[oid]
                    for i, (value, when, seq) in enumerate(entries):
                        nxt = entries[i + 1][1] if i + 1 < len(entries) else None
                        records.append({
                            "class": cname, "object_id": oid, "state_id": None,
                            "values": {attr: value},
                            "interval": {"start": tm.format(when),
                                         "end": None if nxt is None else tm.format(nxt)},
                            "run": seq,
                        })
        return jsonutil.dump_lines(records)


def _norm_eq(a: Any, b: Any) -> bool:
    return _norm(a) == _norm(b)


def _norm(value: Any) -> Any:
    from decimal import Decimal
    if isinstance(value, Decimal):
        return jsonutil.canonical_decimal(value)
    if isinstance(value, dict):
        return {k: _norm(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_norm(v) for v in value]
    return value
