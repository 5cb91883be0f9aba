"""Historized storage for warehouse extensions.

Evolutions are captured only when a refresh runs, so the refresh period
bounds temporal fidelity: anything that changed twice between two runs is
seen once. Three historization granularities exist and may be combined:

- attribute: the attribute keeps a list of (value, extraction date) pairs,
  appended only when the value differs from the last entry;
- class: each entity becomes a generic object, a set of timestamped states;
  a refresh that changes at least one attribute closes the open state at the
  run date and opens a new one (intervals are half-open, the last one open);
- environment: a named sub-schema whose classes are historized together;
  environments never share a class. Link evolutions are never stored on
  their own, only through the states of the endpoint objects.

Non-historized attributes are overwritten in place; their previous values
are lost by design. Specific (``S_``) attribute values belong to warehouse
users: refreshes never write them. Source deletions never remove anything;
the run records the tombstoned ids and the object's last state stays open.

The store is single-writer: a refresh stages everything, then commits under
a lock. Readers always see the last committed run.
"""

from __future__ import annotations

import datetime as _dt
import threading
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any, Iterable

from . import jsonutil
from . import warehouse as wh
from .errors import (
    NotHistorizedError,
    OutOfOrderRunError,
    SchemaParseError,
    UnknownAttributeError,
    UnknownObjectError,
)
from .schema_core import ObjectSnapshot, validate_snapshot
from .warehouse import ExtractedRow, WarehouseDef, extract_rows

GRANULARITIES = ("day", "hour", "minute")


@dataclass(frozen=True)
class TimeModel:
    """Time as consecutive disjoint granules; all stamps snap to a granule."""

    granularity: str = "day"
    refresh_period: int = 1

    def __post_init__(self):
        if self.granularity not in GRANULARITIES:
            raise SchemaParseError(f"unknown granularity {self.granularity!r}")
        if self.refresh_period < 1:
            raise SchemaParseError("refresh period must be at least one granule")

    def quantize(self, when: Any) -> _dt.datetime:
        if isinstance(when, str):
            try:
                when = _dt.datetime.fromisoformat(when)
            except ValueError:
                raise OutOfOrderRunError(f"unreadable date {when!r}") from None
        if isinstance(when, _dt.date) and not isinstance(when, _dt.datetime):
            when = _dt.datetime(when.year, when.month, when.day)
        if self.granularity == "day":
            return when.replace(hour=0, minute=0, second=0, microsecond=0)
        if self.granularity == "hour":
            return when.replace(minute=0, second=0, microsecond=0)
        return when.replace(second=0, microsecond=0)

    def format(self, when: _dt.datetime) -> str:
        if self.granularity == "day":
            return when.date().isoformat()
        if self.granularity == "hour":
            return when.strftime("%Y-%m-%dT%H:00")
        return when.strftime("%Y-%m-%dT%H:%M")


def _revive(attr_type, value: Any) -> Any:
    from .schema_core import parse_date
    if value is None:
        return None
    kind = attr_type.kind
    if kind == "date" and isinstance(value, str):
        return parse_date(value)
    if kind == "tuple" and isinstance(value, dict):
        declared = dict(attr_type.components)
        return {k: _revive(declared[k], v) if k in declared else v
                for k, v in value.items()}
    if kind in ("set", "list") and isinstance(value, list):
        return [_revive(attr_type.element, v) for v in value]
    return value


def normalize_value(value: Any) -> Any:
    """Canonical form for change detection: representation noise is not change."""
    if isinstance(value, Decimal):
        return jsonutil.canonical_decimal(value)
    if isinstance(value, dict):
        return {k: normalize_value(v) for k, v in value.items()}
    if isinstance(value, list):
        return [normalize_value(v) for v in value]
    return value


def values_equal(a: Any, b: Any) -> bool:
    return normalize_value(a) == normalize_value(b)


@dataclass
class HistorizedValue:
    """(value, extraction date) pairs; appended only on change."""

    entries: list[tuple[Any, _dt.datetime]] = field(default_factory=list)

    def append(self, value: Any, when: _dt.datetime) -> bool:
        if self.entries and values_equal(self.entries[-1][0], value):
            return False
        self.entries.append((value, when))
        return True


@dataclass
class ObjectState:
    state_id: int
    values: dict[str, Any]
    start: _dt.datetime
    end: _dt.datetime | None = None


@dataclass
class GenericObject:
    """One warehouse entity: identity, timestamped states, source objects."""

    id: str
    states: list[ObjectState] = field(default_factory=list)
    source_refs: list[str] = field(default_factory=list)

    def state_at(self, when: _dt.datetime) -> ObjectState | None:
        for state in self.states:
            if state.start <= when and (state.end is None or when < state.end):
                return state
        return None


@dataclass
class Environment:
    name: str
    classes: list[str]
    links: list[str]

    def to_json(self) -> dict[str, Any]:
        return {"name": self.name, "classes": list(self.classes),
                "links": list(self.links)}


@dataclass
class ExtractionRun:
    seq: int
    date: _dt.datetime
    classes: dict[str, dict[str, Any]]  # per class: inserted/changed/unchanged/tombstoned

    def to_json(self, tm: TimeModel) -> dict[str, Any]:
        return {"seq": self.seq, "date": tm.format(self.date),
                "classes": self.classes}


class WarehouseStore:
    """File-backed current-state index plus append-only run log."""

    def __init__(self, warehouse: WarehouseDef, directory: str | Path | None = None,
                 time_model: TimeModel | None = None):
        self.warehouse = warehouse
        self.time_model = time_model or TimeModel(
            warehouse.granularity, warehouse.refresh_period)
        self.directory = Path(directory) if directory else None
        self._lock = threading.Lock()
        self.current: dict[str, dict[str, dict[str, Any]]] = {}
        self.current_links: dict[str, dict[str, dict[str, list[str]]]] = {}
        self.present: dict[str, set[str]] = {}
        self.attr_history: dict[str, dict[str, dict[str, HistorizedValue]]] = {}
        self.generic: dict[str, dict[str, GenericObject]] = {}
        self.runs: list[ExtractionRun] = []
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)

    # -- historization configuration (delegates to the definition) -------------

    def mark_attribute_historized(self, class_name: str, attribute: str) -> list[str]:
        """Returns warnings (marking is legal but may be redundant)."""
        self.warehouse, warnings = wh.mark_attribute_historized(
            self.warehouse, class_name, attribute)
        return warnings

    def mark_class_historized(self, class_name: str) -> None:
        self.warehouse = wh.mark_class_historized(self.warehouse, class_name)

    def _class_level(self, class_name: str) -> bool:
        return self.warehouse.class_level_historized(class_name)

    def create_environment(self, name: str, classes: Iterable[str],
                           links: Iterable[str]) -> Environment:
        self.warehouse = wh.create_environment(self.warehouse, name, classes, links)
        env = self.warehouse.environments[name]
        return Environment(env.name, list(env.classes), list(env.links))

    def delete_environment(self, name: str) -> None:
        self.warehouse = wh.delete_environment(self.warehouse, name)

    @property
    def environments(self) -> dict[str, Environment]:
        return {name: Environment(e.name, list(e.classes), list(e.links))
                for name, e in self.warehouse.environments.items()}

    # -- user-owned values -----------------------------------------------------

    def set_specific_value(self, class_name: str, object_id: str,
                           attribute: str, value: Any) -> None:
        cls = self.warehouse.get(class_name)
        attr = cls.attribute(attribute)
        if attr is None or attr.kind != "specific":
            raise UnknownAttributeError(
                f"{attribute!r} is not a specific attribute of {class_name!r}",
                class_name=class_name, attribute=attribute)
        row = self.current.get(class_name, {}).get(object_id)
        if row is None:
            raise UnknownObjectError(f"unknown object {object_id!r} in {class_name!r}",
                                     class_name=class_name, object_id=object_id)
        from .schema_core import check_value
        row[attribute] = check_value(attr.type, value, f"{class_name}.{attribute}")

    # -- refresh -----------------------------------------------------------------

    def run_refresh(self, snapshots: Iterable[ObjectSnapshot], date: Any) -> ExtractionRun:
        snapshots = list(snapshots)
        when = self.time_model.quantize(date)
        with self._lock:
            if self.runs and when <= self.runs[-1].date:
                raise OutOfOrderRunError(
                    f"refresh date {self.time_model.format(when)} does not follow "
                    f"{self.time_model.format(self.runs[-1].date)}",
                    date=self.time_model.format(when))
            snapshots = [validate_snapshot(self.warehouse.source, snap)
                         for snap in snapshots]
            rows, covered = extract_rows(self.warehouse, snapshots)
            run = self._apply(rows, covered, when)
            self.runs.append(run)
            self._persist()
            return run

    def _apply(self, rows: dict[str, dict[str, ExtractedRow]], covered: set[str],
               when: _dt.datetime) -> ExtractionRun:
        seq = len(self.runs) + 1
        per_class: dict[str, dict[str, Any]] = {}
        for cls in self.warehouse.classes.values():
            name = cls.name
            if name not in covered:
                continue
            new_rows = rows.get(name, {})
            current = self.current.setdefault(name, {})
            links = self.current_links.setdefault(name, {})
            present = self.present.setdefault(name, set())
            inserted = changed = unchanged = 0
            tombstoned = sorted(present - set(new_rows))

            for oid, row in sorted(new_rows.items()):
                old = current.get(oid)
                if old is None:
                    inserted += 1
                    fresh = dict(row.values)
                    for attr in cls.attributes:
                        if attr.kind == "specific":
                            fresh[attr.name] = attr.default
                    current[oid] = fresh
                else:
                    non_specific = {a.name for a in cls.attributes
                                    if a.kind != "specific"}
                    differs = any(
                        not values_equal(old.get(k), v)
                        for k, v in row.values.items() if k in non_specific)
                    if differs:
                        changed += 1
                    else:
                        unchanged += 1
                    for k, v in row.values.items():
                        old[k] = v
                links[oid] = {k: list(v) for k, v in row.links.items()}

            present.clear()
            present.update(new_rows)

            for (cname, attr) in sorted(self.warehouse.historized_attributes):
                if cname != name:
                    continue
                history = self.attr_history.setdefault(name, {}).setdefault(attr, {})
                for oid, row in sorted(new_rows.items()):
                    if attr in row.values:
                        history.setdefault(oid, HistorizedValue()).append(
                            row.values[attr], when)

            if self._class_level(name):
                self._append_states(cls.name, new_rows, when)

            per_class[name] = {"inserted": inserted, "changed": changed,
                               "unchanged": unchanged, "tombstoned": tombstoned}
        return ExtractionRun(seq, when, per_class)

    def _append_states(self, class_name: str,
                       new_rows: dict[str, ExtractedRow], when: _dt.datetime) -> None:
        objects = self.generic.setdefault(class_name, {})
        for oid, row in sorted(new_rows.items()):
            values = {k: v for k, v in row.values.items()}
            obj = objects.get(oid)
            if obj is None:
                obj = GenericObject(id=oid, source_refs=[row.source_id])
                obj.states.append(ObjectState(1, values, when, None))
                objects[oid] = obj
                continue
            last = obj.states[-1]
            if not values_equal(last.values, values):
                last.end = when
                obj.states.append(ObjectState(last.state_id + 1, values, when, None))

    # -- reads ---------------------------------------------------------------------

    def state_at(self, class_name: str, object_id: str, when: Any) -> dict[str, Any] | None:
        self.warehouse.get(class_name)
        if not self._class_level(class_name):
            raise NotHistorizedError(
                f"class {class_name!r} is not historized at class level",
                class_name=class_name)
        obj = self.generic.get(class_name, {}).get(object_id)
        if obj is None:
            raise UnknownObjectError(
                f"no generic object {object_id!r} in {class_name!r}",
                class_name=class_name, object_id=object_id)
        state = obj.state_at(self.time_model.quantize(when))
        return None if state is None else dict(state.values)

    def attribute_history(self, class_name: str, attribute: str,
                          object_id: str) -> list[tuple[Any, _dt.datetime]]:
        history = self.attr_history.get(class_name, {}).get(attribute, {})
        hv = history.get(object_id)
        return list(hv.entries) if hv else []

    def latest_values(self, class_name: str) -> dict[str, dict[str, Any]]:
        return {oid: dict(values)
                for oid, values in self.current.get(class_name, {}).items()}

    def latest_links(self, class_name: str) -> dict[str, dict[str, list[str]]]:
        return {oid: {k: list(v) for k, v in links.items()}
                for oid, links in self.current_links.get(class_name, {}).items()}

    # -- exports ---------------------------------------------------------------------

    def export_history(self) -> str:
        """JSON Lines: one record per object state and per attribute entry."""
        tm = self.time_model
        records: list[dict[str, Any]] = []
        for class_name in sorted(self.generic):
            for oid in sorted(self.generic[class_name]):
                obj = self.generic[class_name][oid]
                for state in obj.states:
                    records.append({
                        "class": class_name, "object_id": oid,
                        "state_id": state.state_id,
                        "values": state.values,
                        "interval": {"start": tm.format(state.start),
                                     "end": None if state.end is None else tm.format(state.end)},
                        "run": self._run_of(state.start),
                    })
        for class_name in sorted(self.attr_history):
            for attr in sorted(self.attr_history[class_name]):
                per_object = self.attr_history[class_name][attr]
                for oid in sorted(per_object):
                    entries = per_object[oid].entries
                    for i, (value, when) in enumerate(entries):
                        nxt = entries[i + 1][1] if i + 1 < len(entries) else None
                        records.append({
                            "class": class_name, "object_id": oid,
                            "state_id": None,
                            "values": {attr: value},
                            "interval": {"start": tm.format(when),
                                         "end": None if nxt is None else tm.format(nxt)},
                            "run": self._run_of(when),
                        })
        return jsonutil.dump_lines(records)

    def _run_of(self, when: _dt.datetime) -> int | None:
        for run in self.runs:
            if run.date == when:
                return run.seq
        return None

    def export_runs(self) -> str:
        return jsonutil.dump_lines([run.to_json(self.time_model) for run in self.runs])

    # -- persistence -------------------------------------------------------------------

    def _revive_values(self, class_name: str, values: dict[str, Any]) -> dict[str, Any]:
        """Serialized dates come back as strings; re-type them from the class."""
        cls = self.warehouse.classes.get(class_name)
        if cls is None:
            return values
        out: dict[str, Any] = {}
        for key, value in values.items():
            attr = cls.attribute(key)
            out[key] = _revive(attr.type, value) if attr is not None else value
        return out

    def load_state(self) -> bool:
        """Restore a persisted store from its directory. True when found."""
        if not self.directory or not (self.directory / "state.json").exists():
            return False
        state = jsonutil.loads((self.directory / "state.json").read_text(encoding="utf-8"))
        self.current = {
            cname: {oid: self._revive_values(cname, values)
                    for oid, values in objects.items()}
            for cname, objects in state.get("current", {}).items()}
        self.current_links = {
            cname: {oid: {k: list(v) for k, v in links.items()}
                    for oid, links in objects.items()}
            for cname, objects in state.get("links", {}).items()}
        self.present = {cname: set(ids)
                        for cname, ids in state.get("present", {}).items()}
        self.runs = [
            ExtractionRun(r["seq"], self.time_model.quantize(r["date"]), r["classes"])
            for r in state.get("runs", [])]
        self.attr_history = {}
        self.generic = {}
        history_path = self.directory / "history.jsonl"
        if history_path.exists():
            for line in history_path.read_text(encoding="utf-8").splitlines():
                record = jsonutil.loads(line)
                cname, oid = record["class"], record["object_id"]
                start = self.time_model.quantize(record["interval"]["start"])
                end = record["interval"]["end"]
                end = None if end is None else self.time_model.quantize(end)
                if record["state_id"] is not None:
                    obj = self.generic.setdefault(cname, {}).setdefault(
                        oid, GenericObject(id=oid, source_refs=[oid]))
                    obj.states.append(ObjectState(
                        record["state_id"],
                        self._revive_values(cname, record["values"]), start, end))
                else:
                    (attr, value), = record["values"].items()
                    cls = self.warehouse.classes.get(cname)
                    adef = cls.attribute(attr) if cls else None
                    if adef is not None:
                        value = _revive(adef.type, value)
                    hv = self.attr_history.setdefault(cname, {}).setdefault(
                        attr, {}).setdefault(oid, HistorizedValue())
                    hv.entries.append((value, start))
        for objects in self.generic.values():
            for obj in objects.values():
                obj.states.sort(key=lambda s: s.state_id)
        return True

    def _persist(self) -> None:
        if not self.directory:
            return
        (self.directory / "runs.jsonl").write_text(self.export_runs(), encoding="utf-8")
        (self.directory / "history.jsonl").write_text(self.export_history(), encoding="utf-8")
        (self.directory / "state.json").write_text(
            jsonutil.dumps(self._state_json(), indent=2) + "\n", encoding="utf-8")

    def _state_json(self) -> dict[str, Any]:
        tm = self.time_model
        return {
            "current": self.current,
            "links": self.current_links,
            "present": {k: sorted(v) for k, v in self.present.items()},
            "historized_attributes": sorted(
                [list(pair) for pair in self.warehouse.historized_attributes]),
            "historized_classes": sorted(self.warehouse.historized_classes),
            "environments": [env.to_json() for env in self.environments.values()],
            "runs": [run.to_json(tm) for run in self.runs],
        }
