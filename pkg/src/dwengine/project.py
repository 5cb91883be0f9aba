"""Project files: the administrator's construction as a replayable log.

A project records the source schema it was built on (path plus content
hash), the ordered list of builder operations, and the resolved definitions
they produce. Loading a project re-reads the source, replays the log and
checks the result against the stored resolution bit for bit; any drift
(edited source, incompatible engine change) is an error, not a silent
re-interpretation.

Every mutation, whether it arrives through the command line or the HTTP
service, funnels through ``Project.apply`` so both surfaces share one log
and one monotonically increasing version used for optimistic concurrency.

The ``Workspace`` couples a project with the warehouse store holding the
extracted data; definitional operations rebind the store to the new
definition, data-plane operations (refresh, exports) hit the store.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Any, Callable

from . import jsonutil
from . import marts as dm
from . import warehouse as wh
from .errors import (
    ProjectFormatError,
    ReplayMismatchError,
    SourceHashMismatchError,
    UnknownMartError,
    VersionConflictError,
)
from .marts import HierarchyGraph, MartAttribute, MartDef
from .schema_core import AttributeType, SchemaGraph, load_schema
from .temporal import TimeModel, WarehouseStore
from .warehouse import WarehouseDef, new_warehouse

FORMAT_VERSION = 1


class Project:
    def __init__(self, source_path: str, source_text: str):
        self.source_path = source_path
        self.source_hash = jsonutil.sha256_hex(source_text)
        self.source: SchemaGraph = load_schema(source_text)
        self.warehouse: WarehouseDef = new_warehouse(self.source)
        self.marts: dict[str, MartDef] = {}
        self.operations: list[dict[str, Any]] = []
        self.version = 0

    # -- the operation log ------------------------------------------------------

    def apply(self, op: str, args: dict[str, Any]) -> None:
        """Apply one builder operation and append it to the log."""
        handler = _OPERATIONS.get(op)
        if handler is None:
            raise ProjectFormatError(f"unknown operation {op!r}", op=op)
        handler(self, args)
        self.operations.append({"op": op, "args": args})
        self.version += 1

    def mart(self, name: str) -> MartDef:
        mart = self.marts.get(name)
        if mart is None:
            raise UnknownMartError(f"unknown mart {name!r}", mart=name)
        return mart

    # -- persistence ---------------------------------------------------------------

    def resolved_json(self) -> dict[str, Any]:
        return {
            "warehouse": self.warehouse.to_json(),
            "marts": [m.to_json() for m in self.marts.values()],
        }

    def to_json(self) -> dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "version": self.version,
            "source": {"path": self.source_path, "sha256": self.source_hash},
            "operations": self.operations,
            "resolved": self.resolved_json(),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(jsonutil.dumps(self.to_json(), indent=2) + "\n",
                              encoding="utf-8")

    @classmethod
    def create(cls, source_path: str | Path) -> "Project":
        text = Path(source_path).read_text(encoding="utf-8")
        return cls(str(source_path), text)

    @classmethod
    def load(cls, path: str | Path, source_text: str | None = None) -> "Project":
        """Reload a project by replaying its log against the hashed source."""
        try:
            data = jsonutil.loads(Path(path).read_text(encoding="utf-8"))
        except Exception as exc:
            raise ProjectFormatError(f"unreadable project file: {exc}") from exc
        if data.get("format_version") != FORMAT_VERSION:
            raise ProjectFormatError(
                f"unsupported project format {data.get('format_version')!r}")
        source_ref = data["source"]
        if source_text is None:
            source_text = Path(source_ref["path"]).read_text(encoding="utf-8")
        if jsonutil.sha256_hex(source_text) != source_ref["sha256"]:
            raise SourceHashMismatchError(
                "source schema changed since the project was saved",
                path=source_ref["path"])
        project = cls(source_ref["path"], source_text)
        for entry in data.get("operations", []):
            project.apply(entry["op"], entry["args"])
        replayed = jsonutil.dumps(project.resolved_json(), sort_keys=True)
        stored = jsonutil.dumps(data.get("resolved", {}), sort_keys=True)
        if replayed != stored:
            raise ReplayMismatchError(
                "replaying the operation log does not reproduce the stored "
                "definitions", path=str(path))
        project.version = int(data.get("version", project.version))
        return project


# -- operation handlers -----------------------------------------------------------

def _op_project_class(p: Project, a: dict[str, Any]) -> None:
    p.warehouse = wh.project_class(p.warehouse, a["class"])


def _op_restructure(op: str) -> Callable[[Project, dict[str, Any]], None]:
    def handler(p: Project, a: dict[str, Any]) -> None:
        args = {k: v for k, v in a.items() if k != "class"}
        if "attributes" in args:
            args["attributes"] = list(args["attributes"])
        p.warehouse = wh.restructure(p.warehouse, a["class"], op, **args)
    return handler


def _op_set_selection(p: Project, a: dict[str, Any]) -> None:
    p.warehouse = wh.set_selection(p.warehouse, a["class"], a["predicate"])


def _op_add_specific(p: Project, a: dict[str, Any]) -> None:
    p.warehouse = wh.add_specific_attribute(
        p.warehouse, a["class"], a["name"],
        AttributeType.from_json(a["type"]), a.get("default"))


def _op_add_calculated(p: Project, a: dict[str, Any]) -> None:
    p.warehouse = wh.add_calculated_attribute(
        p.warehouse, a["class"], a["name"], a["formula"])


def _op_historize_attribute(p: Project, a: dict[str, Any]) -> None:
    p.warehouse, _ = wh.mark_attribute_historized(p.warehouse, a["class"],
                                                  a["attribute"])


def _op_historize_class(p: Project, a: dict[str, Any]) -> None:
    p.warehouse = wh.mark_class_historized(p.warehouse, a["class"])


def _op_create_environment(p: Project, a: dict[str, Any]) -> None:
    p.warehouse = wh.create_environment(p.warehouse, a["name"],
                                        a["classes"], a["links"])


def _op_delete_environment(p: Project, a: dict[str, Any]) -> None:
    p.warehouse = wh.delete_environment(p.warehouse, a["name"])


def _op_set_time_model(p: Project, a: dict[str, Any]) -> None:
    TimeModel(a["granularity"], int(a["refresh_period"]))  # validates
    out = p.warehouse.clone()
    out.granularity = a["granularity"]
    out.refresh_period = int(a["refresh_period"])
    p.warehouse = out


def _op_create_mart(p: Project, a: dict[str, Any]) -> None:
    if a["name"] in p.marts:
        raise ProjectFormatError(f"mart {a['name']!r} already exists",
                                 mart=a["name"])
    p.marts[a["name"]] = dm.create_mart(a["name"])


def _op_project_fact(p: Project, a: dict[str, Any]) -> None:
    mart = p.mart(a["mart"])
    # The log records a decision already made; replay never re-detects.
    p.marts[a["mart"]], _ = dm.project_fact(
        mart, p.warehouse, a["class"], a["fact_name"], force=True)


def _op_project_dimension(p: Project, a: dict[str, Any]) -> None:
    mart = p.mart(a["mart"])
    p.marts[a["mart"]] = dm.project_dimension(mart, p.warehouse, a["class"],
                                              a.get("name"))


def _op_project_dimension_from_attribute(p: Project, a: dict[str, Any]) -> None:
    mart = p.mart(a["mart"])
    p.marts[a["mart"]] = dm.project_dimension_from_attribute(
        mart, p.warehouse, a["class"], a["attribute"], a["name"])


def _op_project_all_dependencies(p: Project, a: dict[str, Any]) -> None:
    mart = p.mart(a["mart"])
    p.marts[a["mart"]] = dm.project_all_dependencies(mart, p.warehouse)


def _op_set_hierarchy(p: Project, a: dict[str, Any]) -> None:
    mart = p.mart(a["mart"])
    hierarchy = HierarchyGraph(list(a["nodes"]),
                               [tuple(e) for e in a["edges"]])
    p.marts[a["mart"]] = dm.set_hierarchy(mart, a["dimension"], hierarchy)


def _op_add_hierarchy_edge(p: Project, a: dict[str, Any]) -> None:
    mart = p.mart(a["mart"])
    p.marts[a["mart"]] = dm.add_hierarchy_edge(mart, a["dimension"],
                                               a["from"], a["to"])


def _op_remove_hierarchy_edge(p: Project, a: dict[str, Any]) -> None:
    mart = p.mart(a["mart"])
    p.marts[a["mart"]] = dm.remove_hierarchy_edge(mart, a["dimension"],
                                                  a["from"], a["to"])


def _op_specialize_dimension(p: Project, a: dict[str, Any]) -> None:
    mart = p.mart(a["mart"])
    extras = [MartAttribute.from_json(e) for e in a.get("parameters", [])]
    p.marts[a["mart"]] = dm.specialize_dimension(
        mart, a["parent"], a["name"], extras, a.get("membership"))


def _op_add_measure(p: Project, a: dict[str, Any]) -> None:
    mart = p.mart(a["mart"])
    p.marts[a["mart"]] = dm.add_measure(mart, p.warehouse, a["name"], a["formula"])


def _op_add_parameter(p: Project, a: dict[str, Any]) -> None:
    mart = p.mart(a["mart"])
    p.marts[a["mart"]] = dm.add_parameter(mart, p.warehouse, a["dimension"],
                                          a["name"], a["formula"])


def _op_select_objects(p: Project, a: dict[str, Any]) -> None:
    mart = p.mart(a["mart"])
    p.marts[a["mart"]] = dm.select_objects(mart, p.warehouse, a["target"],
                                           a["predicate"])


_OPERATIONS: dict[str, Callable[[Project, dict[str, Any]], None]] = {
    "project_class": _op_project_class,
    "rename_class": _op_restructure("rename_class"),
    "rename_attribute": _op_restructure("rename_attribute"),
    "delete_attribute": _op_restructure("delete_attribute"),
    "delete_class": _op_restructure("delete_class"),
    "group": _op_restructure("group"),
    "split": _op_restructure("split"),
    "set_selection": _op_set_selection,
    "add_specific_attribute": _op_add_specific,
    "add_calculated_attribute": _op_add_calculated,
    "historize_attribute": _op_historize_attribute,
    "historize_class": _op_historize_class,
    "create_environment": _op_create_environment,
    "delete_environment": _op_delete_environment,
    "set_time_model": _op_set_time_model,
    "create_mart": _op_create_mart,
    "project_fact": _op_project_fact,
    "project_dimension": _op_project_dimension,
    "project_dimension_from_attribute": _op_project_dimension_from_attribute,
    "project_all_dependencies": _op_project_all_dependencies,
    "set_hierarchy": _op_set_hierarchy,
    "add_hierarchy_edge": _op_add_hierarchy_edge,
    "remove_hierarchy_edge": _op_remove_hierarchy_edge,
    "specialize_dimension": _op_specialize_dimension,
    "add_measure": _op_add_measure,
    "add_parameter": _op_add_parameter,
    "select_objects": _op_select_objects,
}


class Workspace:
    """A project plus the warehouse store holding its extracted data.

    One writer at a time: mutations take the lock, verify the caller's
    version when one is given, and rebind the store to the new definition.
    """

    def __init__(self, project: Project, store_dir: str | Path | None = None):
        self.project = project
        self.lock = threading.Lock()
        self.store = WarehouseStore(
            project.warehouse, store_dir,
            TimeModel(project.warehouse.granularity, project.warehouse.refresh_period))
        self.store.load_state()

    def apply(self, op: str, args: dict[str, Any],
              expected_version: int | None = None) -> None:
        with self.lock:
            if expected_version is not None and expected_version != self.project.version:
                raise VersionConflictError(
                    f"project is at version {self.project.version}, "
                    f"request expected {expected_version}",
                    version=self.project.version, expected=expected_version)
            self.apply_unlocked(op, args)

    def apply_unlocked(self, op: str, args: dict[str, Any]) -> None:
        self.project.apply(op, args)
        self.store.warehouse = self.project.warehouse
        self.store.time_model = TimeModel(self.project.warehouse.granularity,
                                          self.project.warehouse.refresh_period)

    def refresh(self, snapshots, date, progress=None):
        with self.lock:
            run = self.store.run_refresh(snapshots, date)
            if progress is not None:
                for cname in sorted(run.classes):
                    progress({"event": "class-refreshed", "class": cname,
                              "run": run.seq, **run.classes[cname]})
                progress({"event": "run-complete", "run": run.seq,
                          "date": self.store.time_model.format(run.date)})
            return run

    def detect_representative(self):
        return dm.detect_representative_classes(self.project.warehouse,
                                                self.store.runs)

    def project_fact(self, mart_name: str, class_name: str, fact_name: str,
                     force: bool = False, expected_version: int | None = None) -> list[str]:
        """Validates representativeness against the live run log, then logs
        the resolved decision so replay never depends on run history."""
        with self.lock:
            if expected_version is not None and expected_version != self.project.version:
                raise VersionConflictError(
                    f"project is at version {self.project.version}, "
                    f"request expected {expected_version}",
                    version=self.project.version, expected=expected_version)
            mart = self.project.mart(mart_name)
            _, diagnostics = dm.project_fact(
                mart, self.project.warehouse, class_name, fact_name,
                runs=self.store.runs, force=force)
            self.apply_unlocked("project_fact", {
                "mart": mart_name, "class": class_name, "fact_name": fact_name})
            return diagnostics

    def infer_hierarchy(self, mart_name: str, dimension: str,
                        expected_version: int | None = None) -> HierarchyGraph:
        """Mine the hierarchy on the dimension's current extension and log
        the resulting edges (the replayable form)."""
        with self.lock:
            if expected_version is not None and expected_version != self.project.version:
                raise VersionConflictError(
                    f"project is at version {self.project.version}, "
                    f"request expected {expected_version}",
                    version=self.project.version, expected=expected_version)
            mart = self.project.mart(mart_name)
            dim = mart.get_dimension(dimension)
            sample = self._dimension_sample(mart, dim)
            hierarchy = dm.infer_hierarchy(dim, sample)
            self.apply_unlocked("set_hierarchy", {
                "mart": mart_name, "dimension": dimension,
                "nodes": hierarchy.nodes,
                "edges": [list(e) for e in hierarchy.edges]})
            return hierarchy

    def _dimension_sample(self, mart: MartDef, dim) -> list[dict[str, Any]]:
        data = dm.load_mart(mart, self.project.warehouse, self.store)
        return [row["parameters"] for row in data.dimension_rows.get(dim.name, [])]

    def load_mart(self, mart_name: str):
        mart = self.project.mart(mart_name)
        return dm.load_mart(mart, self.project.warehouse, self.store)


def open_workspace(project_path: str | Path,
                   store_dir: str | Path | None = None) -> Workspace:
    project = Project.load(project_path)
    if store_dir is None:
        store_dir = str(project_path) + ".store"
    return Workspace(project, store_dir)
