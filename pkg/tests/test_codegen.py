from __future__ import annotations

import datetime

import pytest

from dwengine import jsonutil
from dwengine.codegen import (
    EmissionPlan,
    PlanExecutor,
    emit_refresh,
    emit_structure,
    safe_ident,
)
from dwengine.errors import UnvalidatedDefinitionError
from dwengine.marts import create_mart, project_dimension, project_fact
from dwengine.schema_core import load_instances, load_schema
from dwengine.temporal import WarehouseStore
from dwengine.warehouse import (
    add_calculated_attribute,
    new_warehouse,
    project_class,
    set_selection,
)

from conftest import make_objects
from test_temporal import PEOPLE_SCHEMA, person


def simple_warehouse():
    graph = load_schema(
        '{"classes": [{"name": "K", "attributes": ['
        '{"name": "a", "type": "string"}, {"name": "n", "type": "integer"}],'
        ' "operations": []}], "links": []}')
    return project_class(new_warehouse(graph), "K")


def test_single_class_structure():
    plan = emit_structure(simple_warehouse(), "neutral-plan")
    creates = [s for s in plan.steps if s.kind == "create_class_table"]
    assert len(creates) == 1
    cols = [c["name"] for c in creates[0].params["columns"]]
    assert cols == ["object_id", "D_a", "D_n"]


def test_structure_determinism_byte_identical(source):
    w = new_warehouse(source)
    for name in ("Actes", "Praticiens", "Cabinets"):
        w = project_class(w, name)
    a = emit_structure(w, "neutral-plan").text()
    b = emit_structure(w, "neutral-plan").text()
    assert a == b
    assert emit_structure(w, "sql").text() == emit_structure(w, "sql").text()


def test_historized_class_gets_history_table():
    from dwengine.warehouse import mark_class_historized
    w = mark_class_historized(simple_warehouse(), "K")
    plan = emit_structure(w, "neutral-plan")
    kinds = [s.kind for s in plan.steps]
    assert "create_class_table" in kinds and "create_state_history_table" in kinds
    history = next(s for s in plan.steps if s.kind == "create_state_history_table")
    names = [c["name"] for c in history.params["columns"]]
    assert names[:4] == ["object_id", "state_id", "start", "end"]
    assert history.provenance == "historize-class:K"


def test_tuple_attributes_flatten_with_underscores():
    doc = {"classes": [{"name": "A", "attributes": [
        {"name": "adresse", "type": {"tuple": [
            {"name": "rue", "type": "string"},
            {"name": "ville", "type": "string"}]}}], "operations": []}],
        "links": []}
    w = project_class(new_warehouse(load_schema(jsonutil.dumps(doc))), "A")
    plan = emit_structure(w, "neutral-plan")
    cols = [c["name"] for s in plan.steps if s.kind == "create_class_table"
            for c in s.params["columns"]]
    assert "D_adresse_rue" in cols and "D_adresse_ville" in cols


def test_collection_attribute_gets_child_table():
    doc = {"classes": [{"name": "A", "attributes": [
        {"name": "tags", "type": {"set": "string"}}], "operations": []}],
        "links": []}
    w = project_class(new_warehouse(load_schema(jsonutil.dumps(doc))), "A")
    plan = emit_structure(w, "neutral-plan")
    child = next(s for s in plan.steps if s.kind == "create_child_table")
    assert child.params["table"] == "A__D_tags"
    assert [c["name"] for c in child.params["columns"]] == [
        "object_id", "position", "value"]


def test_star_mart_structure(source):
    w = new_warehouse(source)
    for name in ("Actes", "Praticiens", "Cabinets"):
        w = project_class(w, name)
    mart, _ = project_fact(create_mart("m"), w, "Actes", "Prestations", force=True)
    mart = project_dimension(mart, w, "Praticiens")
    mart = project_dimension(mart, w, "Cabinets")
    plan = emit_structure(mart, "neutral-plan")
    fact = next(s for s in plan.steps if s.kind == "create_fact_table")
    fk_cols = [fk["column"] for fk in fact.params["foreign_keys"]]
    assert fk_cols == ["Cabinets_id", "Praticiens_id"]
    dims = [s for s in plan.steps if s.kind == "create_dimension_table"]
    assert [d.params["table"] for d in dims] == ["Cabinets", "Praticiens"]
    # Dimensions are created before the fact that references them.
    assert plan.steps.index(dims[-1]) < plan.steps.index(fact)


def test_every_step_has_provenance(source):
    w = new_warehouse(source)
    for name in ("Actes", "Praticiens", "Cabinets"):
        w = project_class(w, name)
    for plan in (emit_structure(w, "neutral-plan"), emit_refresh(w, "neutral-plan")):
        assert all(s.provenance for s in plan.steps)


def test_unvalidated_definition_rejected(source):
    w = project_class(new_warehouse(source), "Praticiens")
    del w.classes["Personnes"]  # break the closure behind the API's back
    with pytest.raises(UnvalidatedDefinitionError):
        emit_structure(w, "neutral-plan")


def test_sql_rendering_shape():
    from dwengine.warehouse import mark_class_historized
    w = mark_class_historized(simple_warehouse(), "K")
    sql = emit_structure(w, "sql").text()
    assert 'CREATE TABLE "K"' in sql
    assert '"D_a" VARCHAR(255)' in sql
    assert 'PRIMARY KEY ("object_id")' in sql
    assert sql.rstrip().endswith(";")


def test_identifier_truncation_with_hash():
    long = "x" * 80
    ident = safe_ident(long)
    assert len(ident) == 63
    assert ident != safe_ident(long + "y")


def test_refresh_plan_without_marks_has_only_overwrite_steps():
    plan = emit_refresh(simple_warehouse(), "neutral-plan")
    kinds = {s.kind for s in plan.steps}
    assert "append_attribute_history" not in kinds
    assert "append_state_history" not in kinds
    assert "overwrite_current" in kinds


def test_refresh_plan_references_historized_attribute():
    from dwengine.warehouse import mark_attribute_historized
    w, _ = mark_attribute_historized(simple_warehouse(), "K", "D_a")
    plan = emit_refresh(w, "neutral-plan")
    append = next(s for s in plan.steps if s.kind == "append_attribute_history")
    assert append.params == {"class": "K", "attribute": "D_a"}
    assert append.provenance == "historize-attribute:K.D_a"


def test_selection_and_calculated_in_refresh_plan():
    w = simple_warehouse()
    w = set_selection(w, "K", 'a = "garde"')
    w = add_calculated_attribute(w, "K", "double", '"K.n" * 2')
    plan = emit_refresh(w, "neutral-plan")
    kinds = [s.kind for s in plan.steps]
    assert kinds.index("filter_selection") < kinds.index("map_derived")
    assert kinds.index("map_derived") < kinds.index("compute_calculated")
    assert kinds.index("compute_calculated") < kinds.index("change_detect")


def test_refresh_determinism(source):
    w = new_warehouse(source)
    for name in ("Actes", "Praticiens"):
        w = project_class(w, name)
    assert emit_refresh(w, "neutral-plan").text() == emit_refresh(w, "neutral-plan").text()


# -- the reference executor reproduces the store ------------------------------------

def two_run_fixture():
    graph = load_schema(PEOPLE_SCHEMA)
    w = project_class(new_warehouse(graph), "Praticiens")
    from dwengine.warehouse import (mark_attribute_historized,
                                    mark_class_historized)
    w, _ = mark_attribute_historized(w, "Praticiens", "D_specialite_prat")
    w = mark_class_historized(w, "Praticiens")
    batches = [
        (datetime.date(1999, 1, 1), [person("p1", "Durand", "Cardiologie"),
                                     person("p2", "Martin", "ORL")]),
        (datetime.date(1999, 2, 1), [person("p1", "Durand", "Radiologie"),
                                     person("p2", "Martin", "ORL")]),
    ]
    return graph, w, batches


def test_executor_reproduces_store_history_byte_for_byte():
    graph, w, batches = two_run_fixture()
    store = WarehouseStore(w)
    plan = emit_refresh(w, "neutral-plan")
    executor = PlanExecutor(plan, graph)
    for day, objects in batches:
        snaps = load_instances(graph, make_objects(objects), day)
        store.run_refresh(snaps, day)
        executor.run(snaps, day)
    assert executor.export_history() == store.export_history()
    assert executor.export_history() != ""


def test_executor_follows_renamed_classes():
    # The plan records the source class; renaming the warehouse class must
    # not detach the executor from the snapshots.
    from dwengine.warehouse import mark_class_historized, restructure
    graph = load_schema(PEOPLE_SCHEMA)
    w = project_class(new_warehouse(graph), "Praticiens")
    w = restructure(w, "Praticiens", "rename_class", new_name="Soignants")
    w = mark_class_historized(w, "Soignants")
    store = WarehouseStore(w)
    executor = PlanExecutor(emit_refresh(w, "neutral-plan"), graph)
    for day, objects in [(datetime.date(1999, 1, 1),
                          [person("p1", "Durand", "Cardiologie")]),
                         (datetime.date(1999, 2, 1),
                          [person("p1", "Durand", "Radiologie")])]:
        snaps = load_instances(graph, make_objects(objects), day)
        store.run_refresh(snaps, day)
        executor.run(snaps, day)
    assert "p1" in executor.states.get("Soignants", {})
    assert executor.export_history() == store.export_history()


def test_executor_with_selection_and_calculation(source, batch1):
    w = new_warehouse(source)
    for name in ("Actes", "Praticiens", "Cabinets", "Beneficiaires"):
        w = project_class(w, name)
    w = set_selection(w, "Cabinets", 'Ville = "Toulouse"')
    w = add_calculated_attribute(
        w, "Actes", "Montant_remb",
        '("Actes.Quantité" * "Actes.Prix Unitaire") * "Actes.Taux Remb"')
    from dwengine.warehouse import mark_class_historized
    w = mark_class_historized(w, "Cabinets")
    w = mark_class_historized(w, "Actes")
    store = WarehouseStore(w)
    executor = PlanExecutor(emit_refresh(w, "neutral-plan"), source)
    store.run_refresh(batch1, datetime.date(1999, 1, 1))
    executor.run(batch1, datetime.date(1999, 1, 1))
    assert executor.export_history() == store.export_history()
    # Selection respected on both sides.
    assert set(executor.states["Cabinets"]) == {"cab1"}
