from __future__ import annotations

import pytest
from click.testing import CliRunner

from dwengine import jsonutil
from dwengine.cli import main

from conftest import INSURANCE_BATCH_1, make_objects


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def instances_file(tmp_path):
    path = tmp_path / "batch1.json"
    path.write_text(make_objects(INSURANCE_BATCH_1), encoding="utf-8")
    return path


def invoke(runner, *args):
    return runner.invoke(main, [str(a) for a in args], catch_exceptions=False)


def init_project(runner, tmp_path, schema_file):
    project = tmp_path / "demo.dwproj"
    result = invoke(runner, "init", "--schema", schema_file, "--project", project)
    assert result.exit_code == 0, result.output
    return project


def test_validate_schema_ok(runner, schema_file):
    result = invoke(runner, "validate", "--schema", schema_file)
    assert result.exit_code == 0
    assert "schema ok" in result.output


def test_validate_bad_schema_exits_one_with_diagnostic(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"classes": [{"name": "A"}], "links": [{"name": "l", '
                   '"kind": "association", "source": "A", "target": "Zz"}]}',
                   encoding="utf-8")
    result = runner.invoke(main, ["validate", "--schema", str(bad)])
    assert result.exit_code == 1
    diag = jsonutil.loads(result.stderr.strip().splitlines()[-1])
    assert diag["kind"] == "dangling-endpoint"


def test_full_cli_construction_flow(runner, tmp_path, schema_file, instances_file):
    project = init_project(runner, tmp_path, schema_file)

    def ok(*args):
        result = invoke(runner, *args, "--project", project)
        assert result.exit_code == 0, result.output
        return result

    ok("project-class", "Actes")
    ok("project-class", "Praticiens")
    ok("project-class", "Cabinets")
    ok("project-class", "Beneficiaires")
    ok("historize", "attr", "Praticiens", "D_specialite_prat")
    ok("historize", "class", "Beneficiaires")
    ok("historize", "env", "suivi", "--classes", "Actes,Beneficiaires",
       "--links", "Concerne")
    extract = ok("extract", "--instances", instances_file)
    counts = jsonutil.loads(extract.output.strip())
    assert counts["objects"] == len(INSURANCE_BATCH_1)
    refresh = ok("refresh", "--instances", instances_file, "--date", "1999-01-01")
    run = jsonutil.loads(refresh.output.strip().splitlines()[-1])
    assert run["seq"] == 1 and run["classes"]["Actes"]["inserted"] == 2
    ok("mart-project-fact", "Actes", "Prestations", "--mart", "prestations",
       "--force")
    ok("mart-project-dim", "Cabinets", "--mart", "prestations")
    ok("mart-project-dim", "Actes", "--mart", "prestations",
       "--from-attribute", "Date_exec", "--name", "Execution")
    ok("mart-add-measure", "Montant_remb",
       '("Actes.Quantité" * "Actes.Prix Unitaire") * "Actes.Taux Remb"',
       "--mart", "prestations")
    hierarchy = ok("mart-infer-hierarchy", "Cabinets", "--mart", "prestations")
    edges = jsonutil.loads(hierarchy.output.strip())["edges"]
    assert ["D_Ville", "D_Département"] in edges
    ok("mart-select", "Cabinets", 'Ville = "Toulouse"', "--mart", "prestations")
    detect = ok("mart-detect-fact")
    assert "candidates" in detect.output
    export = ok("export", "mart", "--mart", "prestations", "--out",
                tmp_path / "mart-out")
    assert (tmp_path / "mart-out" / "fact.jsonl").exists()
    history = ok("export", "history")
    assert "Beneficiaires" in history.output
    ok("validate", "--project", project)


def test_refresh_out_of_order_diagnostic(runner, tmp_path, schema_file,
                                         instances_file):
    project = init_project(runner, tmp_path, schema_file)
    invoke(runner, "project-class", "Actes", "--project", project)
    r1 = runner.invoke(main, ["refresh", "--instances", str(instances_file),
                              "--date", "1999-01-01", "--project", str(project)])
    assert r1.exit_code == 0
    r2 = runner.invoke(main, ["refresh", "--instances", str(instances_file),
                              "--date", "1999-01-01", "--project", str(project)])
    assert r2.exit_code == 1
    diag = jsonutil.loads(r2.stderr.strip().splitlines()[-1])
    assert diag["kind"] == "out-of-order-run"


def test_emit_structure_deterministic(runner, tmp_path, schema_file):
    project = init_project(runner, tmp_path, schema_file)
    invoke(runner, "project-class", "Praticiens", "--project", project)
    a = invoke(runner, "emit", "structure", "--target", "sql",
               "--project", project)
    b = invoke(runner, "emit", "structure", "--target", "sql",
               "--project", project)
    assert a.exit_code == 0 and a.output == b.output
    assert "CREATE TABLE" in a.output
    plan = invoke(runner, "emit", "refresh", "--project", project)
    assert jsonutil.loads(plan.output)["target"] == "neutral-plan"


def test_set_time_model_changes_quantization(runner, tmp_path, schema_file,
                                             instances_file):
    project = init_project(runner, tmp_path, schema_file)
    invoke(runner, "project-class", "Actes", "--project", project)
    invoke(runner, "set-time-model", "--granularity", "hour", "--project", project)
    r1 = runner.invoke(main, ["refresh", "--instances", str(instances_file),
                              "--date", "1999-01-01T10:15", "--project",
                              str(project)])
    assert r1.exit_code == 0, r1.output
    run = jsonutil.loads(r1.output.strip().splitlines()[-1])
    assert run["date"] == "1999-01-01T10:00"


def test_env_var_project_path(runner, tmp_path, schema_file, monkeypatch):
    project = init_project(runner, tmp_path, schema_file)
    monkeypatch.setenv("DWCTL_PROJECT", str(project))
    result = runner.invoke(main, ["project-class", "Actes"],
                           catch_exceptions=False)
    assert result.exit_code == 0
