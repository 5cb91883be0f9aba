from __future__ import annotations

import threading

import httpx
import pytest

from dwengine import jsonutil
from dwengine.errors import DIAGNOSTIC_KINDS
from dwengine.project import Project, Workspace
from dwengine.service import make_server

from conftest import INSURANCE_BATCH_1


@pytest.fixture()
def server(tmp_path, schema_file):
    project = Project.create(schema_file)
    project_path = tmp_path / "svc.dwproj"
    project.save(project_path)
    workspace = Workspace(project, tmp_path / "store")
    srv = make_server(workspace, "127.0.0.1", 0, str(project_path))
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{srv.server_address[1]}"
    yield base, workspace
    srv.shutdown()


def post(base, path, **payload):
    return httpx.post(base + path, json=payload, timeout=10)


def seed_warehouse(base):
    version = httpx.get(base + "/warehouse", timeout=10).json()["version"]
    for cname in ("Actes", "Praticiens", "Cabinets", "Beneficiaires"):
        r = post(base, "/warehouse/project", **{"class": cname, "version": version})
        assert r.status_code == 200, r.text
        version = r.json()["version"]
    return version


def refresh_batch(base, date="1999-01-01"):
    return post(base, "/runs/refresh", objects=INSURANCE_BATCH_1, date=date)


def test_get_source_schema(server):
    base, _ = server
    schema = httpx.get(base + "/schema/source", timeout=10).json()["schema"]
    assert {c["name"] for c in schema["classes"]} >= {"Actes", "Personnes"}


def test_projection_returns_updated_definition(server):
    base, _ = server
    r = post(base, "/warehouse/project", **{"class": "Praticiens", "version": 0})
    assert r.status_code == 200
    payload = r.json()
    names = {c["name"] for c in payload["warehouse"]["classes"]}
    assert names == {"Praticiens", "Personnes"}
    closure = [c for c in payload["warehouse"]["classes"] if c["auto_projected"]]
    assert [c["name"] for c in closure] == ["Personnes"]


def test_version_conflict_second_writer_409(server):
    base, _ = server
    r1 = post(base, "/warehouse/project", **{"class": "Praticiens", "version": 0})
    assert r1.status_code == 200
    r2 = post(base, "/warehouse/project", **{"class": "Actes", "version": 0})
    assert r2.status_code == 409
    assert r2.json()["kind"] == "version-conflict"


def test_environment_overlap_400_disjointness(server):
    base, _ = server
    version = seed_warehouse(base)
    r = post(base, "/warehouse/environments", name="suivi",
             classes=["Actes", "Beneficiaires"], links=["Concerne"],
             version=version)
    assert r.status_code == 200, r.text
    r2 = post(base, "/warehouse/environments", name="autre",
              classes=["Actes"], links=[], version=r.json()["version"])
    assert r2.status_code == 400
    assert r2.json()["kind"] == "disjointness-violation"


def test_refresh_and_runs_endpoint(server):
    base, _ = server
    seed_warehouse(base)
    r = refresh_batch(base)
    assert r.status_code == 200, r.text
    run = r.json()["run"]
    assert run["classes"]["Actes"]["inserted"] == 2
    runs = httpx.get(base + "/runs", timeout=10).json()["runs"]
    assert len(runs) == 1 and runs[0]["seq"] == 1


def test_refresh_normalizes_wire_values(server):
    # Raw JSON dates/decimals must not register as phantom changes.
    base, _ = server
    seed_warehouse(base)
    assert refresh_batch(base, "1999-01-01").status_code == 200
    r = refresh_batch(base, "1999-02-01")
    assert r.status_code == 200
    counters = r.json()["run"]["classes"]["Actes"]
    assert counters == {"inserted": 0, "changed": 0, "unchanged": 2,
                        "tombstoned": []}


def test_refresh_out_of_order_400(server):
    base, _ = server
    seed_warehouse(base)
    assert refresh_batch(base).status_code == 200
    r = refresh_batch(base)  # same date again
    assert r.status_code == 400
    assert r.json()["kind"] == "out-of-order-run"


def test_dependencies_endpoint_lists_witness_chains(server):
    base, _ = server
    version = seed_warehouse(base)
    refresh_batch(base)
    r = post(base, "/marts/prestations/fact",
             **{"class": "Actes", "fact_name": "Prestations", "force": True,
                "version": version})
    assert r.status_code == 200, r.text
    deps = httpx.get(base + "/marts/prestations/dependencies?from=Actes",
                     timeout=10).json()
    by_target = {d["target"]: d for d in deps["dependencies"]}
    assert by_target["Praticiens"]["witness"] == ["association:Prescrit_par:->"]
    assert by_target["Cabinets"]["witness"] == [
        "association:Prescrit_par:->", "association:Exerce_dans:->"]


def full_mart(base):
    version = seed_warehouse(base)
    refresh_batch(base)
    r = post(base, "/marts/prestations/fact",
             **{"class": "Actes", "fact_name": "Prestations", "force": True,
                "version": version})
    assert r.status_code == 200, r.text
    version = r.json()["version"]
    r = post(base, "/marts/prestations/dimensions",
             **{"class": "Cabinets", "version": version})
    assert r.status_code == 200, r.text
    version = r.json()["version"]
    r = post(base, "/marts/prestations/dimensions",
             **{"class": "Actes", "from_attribute": "Date_exec",
                "name": "Execution", "version": version})
    assert r.status_code == 200, r.text
    return r.json()["version"]


def test_mart_construction_measures_hierarchy_and_data(server):
    base, _ = server
    version = full_mart(base)
    r = post(base, "/marts/prestations/measures",
             name="Montant_remb",
             formula='("Actes.Quantité" * "Actes.Prix Unitaire") * "Actes.Taux Remb"',
             version=version)
    assert r.status_code == 200, r.text
    version = r.json()["version"]
    r = post(base, "/marts/prestations/hierarchy",
             dimension="Cabinets", action="infer", version=version)
    assert r.status_code == 200, r.text
    mart = r.json()["mart"]
    dim = next(d for d in mart["dimensions"] if d["name"] == "Cabinets")
    assert ["D_Ville", "D_Département"] in dim["hierarchy"]["edges"]
    data = httpx.get(base + "/marts/prestations/data", timeout=10).json()
    fact_rows = {row["id"]: row for row in data["fact"]}
    assert fact_rows["act1"]["measures"]["Montant_remb"] == 10
    assert fact_rows["act1"]["dimensions"]["Execution"] == "1998-11-15"


def test_hierarchy_cycle_rejected_400(server):
    base, _ = server
    version = full_mart(base)
    for edge in (("D_Ville", "D_Département"), ("D_Département", "D_Région")):
        r = post(base, "/marts/prestations/hierarchy",
                 dimension="Cabinets", action="add",
                 **{"from": edge[0], "to": edge[1], "version": version})
        assert r.status_code == 200, r.text
        version = r.json()["version"]
    r = post(base, "/marts/prestations/hierarchy",
             dimension="Cabinets", action="add",
             **{"from": "D_Région", "to": "D_Ville", "version": version})
    assert r.status_code == 400
    body = r.json()
    assert body["kind"] == "hierarchy-cycle"
    assert body["details"].get("cycle")


def test_specialize_dimension_endpoint(server):
    base, _ = server
    version = full_mart(base)
    r = post(base, "/marts/prestations/specialize",
             parent="Cabinets", name="Pharmacie",
             membership='nom_cab = "Pharma"', version=version)
    assert r.status_code == 200, r.text
    mart = r.json()["mart"]
    sub = next(d for d in mart["dimensions"] if d["name"] == "Pharmacie")
    parent = next(d for d in mart["dimensions"] if d["name"] == "Cabinets")
    assert sub["parent"] == "Cabinets"
    assert {p["name"] for p in parent["parameters"]} <= \
        {p["name"] for p in sub["parameters"]}


def test_unknown_mart_404(server):
    base, _ = server
    r = httpx.get(base + "/marts/fantome", timeout=10)
    assert r.status_code == 404
    assert r.json()["kind"] == "unknown-mart"


def test_diagnostics_catalog_endpoint(server):
    base, _ = server
    kinds = httpx.get(base + "/diagnostics", timeout=10).json()["kinds"]
    assert kinds == DIAGNOSTIC_KINDS
    assert "disjointness-violation" in kinds


def test_events_stream_carries_refresh_progress(server):
    base, _ = server
    seed_warehouse(base)
    events = []
    ready = threading.Event()

    def listen():
        with httpx.stream("GET", base + "/events", timeout=30) as response:
            ready.set()
            for line in response.iter_lines():
                if line.startswith("data: "):
                    events.append(jsonutil.loads(line[6:]))
                    if events and events[-1].get("event") == "run-complete":
                        break

    thread = threading.Thread(target=listen, daemon=True)
    thread.start()
    assert ready.wait(5)
    refresh_batch(base)
    thread.join(timeout=10)
    assert any(e.get("event") == "class-refreshed" and e.get("class") == "Actes"
               for e in events)
    assert events[-1]["event"] == "run-complete"


def test_state_equals_cli_log_state(server, tmp_path):
    # Everything built over HTTP replays from the same project file.
    base, workspace = server
    full_mart(base)
    saved = tmp_path / "replayed.dwproj"
    workspace.project.save(saved)
    replayed = Project.load(saved)
    assert (jsonutil.dumps(replayed.resolved_json(), sort_keys=True)
            == jsonutil.dumps(workspace.project.resolved_json(), sort_keys=True))
