"""HTTP/JSON service: the studio's backend.

Thin routing over the same Workspace the CLI drives; every mutation goes
through the shared operation log, so anything built over HTTP replays from
the project file and vice versa. Mutation bodies may carry ``version`` (the
project version the client saw); a stale version gets 409. Engine errors
map to 400 with the diagnostic payload; unknown resources to 404.

``GET /events`` is a server-sent-event stream carrying refresh progress:
one ``class-refreshed`` event per class, then ``run-complete``.
"""

from __future__ import annotations

import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any
from urllib.parse import parse_qs, urlparse

from . import jsonutil
from .errors import DIAGNOSTIC_KINDS, EngineError, VersionConflictError
from .marts import transitive_dependencies
from .project import Workspace
from .schema_core import ObjectSnapshot, parse_date


class ServiceState:
    def __init__(self, workspace: Workspace, project_path: str | None = None):
        self.workspace = workspace
        self.project_path = project_path
        self.subscribers: list[queue.Queue] = []
        self.subscribers_lock = threading.Lock()

    def publish(self, event: dict[str, Any]) -> None:
        with self.subscribers_lock:
            for q in self.subscribers:
                q.put(event)

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self.subscribers_lock:
            self.subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self.subscribers_lock:
            if q in self.subscribers:
                self.subscribers.remove(q)

    def save(self) -> None:
        if self.project_path:
            self.workspace.project.save(self.project_path)


def _snapshots_from_json(data: list[dict[str, Any]]) -> list[ObjectSnapshot]:
    snaps = []
    for raw in data:
        links = {k: ([v] if isinstance(v, str) else list(v))
                 for k, v in raw.get("links", {}).items()}
        extracted = raw.get("extracted_at")
        snaps.append(ObjectSnapshot(
            raw["id"], raw["class"], raw.get("values", {}), links,
            parse_date(extracted) if extracted else None))
    return snaps


class Handler(BaseHTTPRequestHandler):
    state: ServiceState  # injected by run_server / serve_in_thread
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    # -- plumbing -------------------------------------------------------------

    def _send_json(self, status: int, payload: dict[str, Any]) -> None:
        body = jsonutil.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict[str, Any]:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        return jsonutil.loads(self.rfile.read(length).decode("utf-8"))

    def _warehouse_payload(self) -> dict[str, Any]:
        ws = self.state.workspace
        return {"version": ws.project.version,
                "warehouse": ws.project.warehouse.to_json()}

    def _mart_payload(self, name: str) -> dict[str, Any]:
        ws = self.state.workspace
        return {"version": ws.project.version,
                "mart": ws.project.mart(name).to_json()}

    # -- GET --------------------------------------------------------------------

    def do_GET(self):
        try:
            self._route_get()
        except EngineError as exc:
            self._send_json(404 if exc.kind in ("unknown-mart",) else 400,
                            exc.to_diagnostic())
        except BrokenPipeError:
            pass

    def _route_get(self):
        ws = self.state.workspace
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        if url.path == "/schema/source":
            self._send_json(200, {"schema": ws.project.source.to_json()})
        elif url.path == "/warehouse":
            self._send_json(200, self._warehouse_payload())
        elif url.path == "/marts":
            self._send_json(200, {"version": ws.project.version,
                                  "marts": sorted(ws.project.marts)})
        elif url.path == "/runs":
            tm = ws.store.time_model
            self._send_json(200, {"runs": [r.to_json(tm) for r in ws.store.runs]})
        elif url.path == "/diagnostics":
            self._send_json(200, {"kinds": DIAGNOSTIC_KINDS})
        elif url.path == "/export/history":
            self._send_json(200, {"history": ws.store.export_history()})
        elif url.path == "/events":
            self._stream_events()
        elif len(parts) == 2 and parts[0] == "marts":
            self._send_json(200, self._mart_payload(parts[1]))
        elif len(parts) == 3 and parts[0] == "marts" and parts[2] == "dependencies":
            mart = ws.project.mart(parts[1])
            params = parse_qs(url.query)
            start = params.get("from", [None])[0]
            if start is None and mart.fact is not None:
                start = mart.fact.origin_class
            if start is None:
                self._send_json(400, {"kind": "non-dependent-class",
                                      "message": "no fact class and no ?from=",
                                      "details": {}})
                return
            deps = transitive_dependencies(ws.project.warehouse.schema(), start)
            self._send_json(200, {"from": start,
                                  "dependencies": [d.to_json() for d in deps]})
        elif len(parts) == 3 and parts[0] == "marts" and parts[2] == "data":
            data = ws.load_mart(parts[1])
            self._send_json(200, {
                "fact": data.fact_rows,
                "dimensions": data.dimension_rows})
        else:
            self._send_json(404, {"kind": "not-found", "message": self.path,
                                  "details": {}})

    def _stream_events(self):
        q = self.state.subscribe()
        try:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            while True:
                try:
                    event = q.get(timeout=30)
                except queue.Empty:
                    self.wfile.write(b": keep-alive\n\n")
                    self.wfile.flush()
                    continue
                payload = jsonutil.dumps(event)
                self.wfile.write(f"data: {payload}\n\n".encode("utf-8"))
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            self.state.unsubscribe(q)

    # -- POST --------------------------------------------------------------------

    def do_POST(self):
        try:
            self._route_post()
        except VersionConflictError as exc:
            self._send_json(409, exc.to_diagnostic())
        except EngineError as exc:
            self._send_json(404 if exc.kind == "unknown-mart" else 400,
                            exc.to_diagnostic())
        except (KeyError, TypeError, ValueError) as exc:
            self._send_json(400, {"kind": "bad-request", "message": str(exc),
                                  "details": {}})

    def _route_post(self):
        ws = self.state.workspace
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        body = self._read_body()
        version = body.get("version")

        def apply(op: str, args: dict[str, Any]) -> None:
            ws.apply(op, args, expected_version=version)
            self.state.save()

        if url.path == "/warehouse/project":
            apply("project_class", {"class": body["class"]})
            self._send_json(200, self._warehouse_payload())
        elif url.path == "/warehouse/selection":
            apply("set_selection", {"class": body["class"],
                                    "predicate": body["predicate"]})
            self._send_json(200, self._warehouse_payload())
        elif url.path == "/warehouse/attributes":
            self._warehouse_attributes(body, version)
        elif url.path == "/warehouse/historize":
            if body.get("level") == "class":
                apply("historize_class", {"class": body["class"]})
            else:
                apply("historize_attribute", {"class": body["class"],
                                              "attribute": body["attribute"]})
            self._send_json(200, self._warehouse_payload())
        elif url.path == "/warehouse/environments":
            apply("create_environment", {
                "name": body["name"], "classes": body.get("classes", []),
                "links": body.get("links", [])})
            self._send_json(200, self._warehouse_payload())
        elif url.path == "/runs/refresh":
            snaps = _snapshots_from_json(body.get("objects", []))
            run = ws.refresh(snaps, body["date"], progress=self.state.publish)
            self.state.save()
            self._send_json(200, {"run": run.to_json(ws.store.time_model),
                                  "version": ws.project.version})
        elif len(parts) == 3 and parts[0] == "marts":
            self._mart_post(parts[1], parts[2], body, version)
        else:
            self._send_json(404, {"kind": "not-found", "message": self.path,
                                  "details": {}})

    def _warehouse_attributes(self, body: dict[str, Any], version) -> None:
        ws = self.state.workspace
        action = body.get("action", "add")
        if action == "add":
            if body.get("kind") == "calculated":
                ws.apply("add_calculated_attribute",
                         {"class": body["class"], "name": body["name"],
                          "formula": body["formula"]},
                         expected_version=version)
            else:
                ws.apply("add_specific_attribute",
                         {"class": body["class"], "name": body["name"],
                          "type": body.get("type", "string"),
                          "default": body.get("default")},
                         expected_version=version)
        elif action in ("rename_attribute", "delete_attribute", "group", "split",
                        "rename_class", "delete_class"):
            args = {k: v for k, v in body.items()
                    if k not in ("action", "version")}
            ws.apply(action, args, expected_version=version)
        else:
            raise EngineError(f"unknown attribute action {action!r}")
        self.state.save()
        self._send_json(200, self._warehouse_payload())

    def _mart_post(self, mart_name: str, op: str, body: dict[str, Any],
                   version) -> None:
        ws = self.state.workspace

        def apply(name: str, args: dict[str, Any]) -> None:
            ws.apply(name, args, expected_version=version)
            self.state.save()

        if op == "fact":
            if mart_name not in ws.project.marts:
                ws.apply("create_mart", {"name": mart_name},
                         expected_version=version)
                version_after = None  # version moved; fact op checks nothing more
            else:
                version_after = version
            diags = ws.project_fact(mart_name, body["class"], body["fact_name"],
                                    force=body.get("force", False),
                                    expected_version=version_after)
            self.state.save()
            payload = self._mart_payload(mart_name)
            payload["diagnostics"] = diags
            self._send_json(200, payload)
        elif op == "dimensions":
            if body.get("all"):
                apply("project_all_dependencies", {"mart": mart_name})
            elif body.get("from_attribute"):
                apply("project_dimension_from_attribute", {
                    "mart": mart_name, "class": body["class"],
                    "attribute": body["from_attribute"],
                    "name": body.get("name") or body["from_attribute"]})
            else:
                apply("project_dimension", {"mart": mart_name,
                                            "class": body["class"],
                                            "name": body.get("name")})
            self._send_json(200, self._mart_payload(mart_name))
        elif op == "hierarchy":
            action = body.get("action", "infer")
            if action == "infer":
                ws.infer_hierarchy(mart_name, body["dimension"],
                                   expected_version=version)
                self.state.save()
            elif action == "add":
                apply("add_hierarchy_edge", {
                    "mart": mart_name, "dimension": body["dimension"],
                    "from": body["from"], "to": body["to"]})
            elif action == "remove":
                apply("remove_hierarchy_edge", {
                    "mart": mart_name, "dimension": body["dimension"],
                    "from": body["from"], "to": body["to"]})
            else:
                apply("set_hierarchy", {
                    "mart": mart_name, "dimension": body["dimension"],
                    "nodes": body.get("nodes", []),
                    "edges": body.get("edges", [])})
            self._send_json(200, self._mart_payload(mart_name))
        elif op == "measures":
            if body.get("dimension"):
                apply("add_parameter", {"mart": mart_name,
                                        "dimension": body["dimension"],
                                        "name": body["name"],
                                        "formula": body["formula"]})
            else:
                apply("add_measure", {"mart": mart_name, "name": body["name"],
                                      "formula": body["formula"]})
            self._send_json(200, self._mart_payload(mart_name))
        elif op == "selection":
            apply("select_objects", {"mart": mart_name,
                                     "target": body["target"],
                                     "predicate": body["predicate"]})
            self._send_json(200, self._mart_payload(mart_name))
        elif op == "specialize":
            apply("specialize_dimension", {
                "mart": mart_name, "parent": body["parent"],
                "name": body["name"],
                "parameters": body.get("parameters", []),
                "membership": body.get("membership")})
            self._send_json(200, self._mart_payload(mart_name))
        else:
            self._send_json(404, {"kind": "not-found",
                                  "message": f"/marts/{mart_name}/{op}",
                                  "details": {}})


def make_server(workspace: Workspace, host: str, port: int,
                project_path: str | None = None) -> ThreadingHTTPServer:
    state = ServiceState(workspace, project_path)
    handler = type("BoundHandler", (Handler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)


def run_server(project_path: str, host: str, port: int) -> None:
    from .project import open_workspace
    workspace = open_workspace(project_path)
    server = make_server(workspace, host, port, project_path)
    print(f"dwctl service on http://{host}:{port} over {project_path}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
