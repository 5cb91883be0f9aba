"""Acceptance suite: one test per criterion, one PASS line each.

Run with: pytest tests/test_acceptance.py -v -s
Every expected value is either computed by an independent oracle inside
this suite or asserted exactly (decimal arithmetic carries no tolerance).
"""

from __future__ import annotations

import datetime
import random
from decimal import Decimal

import pytest

from dwengine import jsonutil
from dwengine.codegen import PlanExecutor, emit_refresh, emit_structure
from dwengine.errors import (
    DisjointnessViolationError,
    DuplicateNameError,
    EngineError,
    EnvironmentEndpointError,
    UnknownClassError,
    UnknownLinkError,
)
from dwengine.expressions import (
    Binding,
    EvaluationContext,
    ExpressionTree,
    evaluate,
    parse_formula,
)
from dwengine.marts import infer_hierarchy, transitive_dependencies
from dwengine.project import Project, Workspace
from dwengine.schema_core import load_instances, load_schema
from dwengine.temporal import WarehouseStore
from dwengine.warehouse import (
    create_environment,
    delete_environment,
    new_warehouse,
    project_class,
)

from conftest import INSURANCE_BATCH_1, INSURANCE_SCHEMA, make_objects
from test_expressions import flat_context_and_binding, random_calculation, \
    random_selection, run_both
from test_marts import dim_with, oracle_closure, oracle_hierarchy, \
    random_linked_schema
from test_codegen import two_run_fixture


def report(criterion: int, text: str) -> None:
    print(f"PASS criterion {criterion}: {text}")


# -- 1. type closure ------------------------------------------------------------

def test_criterion_1_type_closure():
    rnd = random.Random(1001)
    violations = 0
    for _ in range(200):
        graph = random_linked_schema(rnd, rnd.randint(1, 12))
        names = list(graph.classes)
        w = new_warehouse(graph)
        for _ in range(rnd.randint(1, 6)):
            pick = rnd.choice(names)
            w = project_class(w, pick)
            again = project_class(w, pick)
            assert jsonutil.dumps(again.to_json()) == jsonutil.dumps(w.to_json()), \
                "projection must be idempotent"
            w.check_closure()
            projected_sources = {c.source_class for c in w.classes.values()}
            for cls in w.classes.values():
                for anc in graph.ancestors(cls.source_class):
                    if anc not in projected_sources:
                        violations += 1
            expected_links = {l.name for l in graph.links.values()
                              if l.source in projected_sources
                              and l.target in projected_sources}
            if set(w.links) != expected_links:
                violations += 1
            for link in w.links.values():
                if link.source not in w.classes or link.target not in w.classes:
                    violations += 1
    assert violations == 0
    report(1, "200 random schemas, closure + link well-formedness + "
              "idempotence, zero violations")


# -- 2. historization replay ------------------------------------------------------

def test_criterion_2_historization_replay():
    source = load_schema(jsonutil.dumps(INSURANCE_SCHEMA))
    w = new_warehouse(source)
    for cname in ("Praticiens", "Beneficiaires"):
        w = project_class(w, cname)
    from dwengine.warehouse import mark_class_historized
    w = mark_class_historized(w, "Praticiens")
    w = mark_class_historized(w, "Beneficiaires")
    store = WarehouseStore(w)

    # Five scripted runs; the per-run specialty/regime value of each object.
    script = {
        "p1": ["Cardio", "Cardio", "Radio", "Radio", "ORL"],   # 2 changes
        "p2": ["ORL", "ORL", "ORL", "ORL", "ORL"],             # 0 changes
        "b1": ["general", "agricole", "general", "general", "etudiant"],  # 3
    }
    dates = [datetime.date(1999, 1, d) for d in (1, 8, 15, 22, 29)]

    def batch_for(run_index):
        objects = []
        for pid in ("p1", "p2"):
            objects.append({"id": pid, "class": "Praticiens",
                            "values": {"nom": "N", "prenom": "P",
                                       "specialite_prat": script[pid][run_index],
                                       "num_ordre": pid}})
        objects.append({"id": "b1", "class": "Beneficiaires",
                        "values": {"nom": "N", "prenom": "P", "num_secu": "s",
                                   "regime": script["b1"][run_index]}})
        return load_instances(source, make_objects(objects), dates[run_index])

    for i in range(5):
        store.run_refresh(batch_for(i), dates[i])

    def predicted_states(values):
        return 1 + sum(1 for a, b in zip(values, values[1:]) if a != b)

    for pid, cname in (("p1", "Praticiens"), ("p2", "Praticiens"),
                       ("b1", "Beneficiaires")):
        obj = store.generic[cname][pid]
        assert len(obj.states) == predicted_states(script[pid]), pid
        # Intervals partition [first run, infinity).
        assert obj.states[0].start == store.time_model.quantize(dates[0])
        for earlier, later in zip(obj.states, obj.states[1:]):
            assert earlier.end == later.start
        assert obj.states[-1].end is None

    before = store.export_history()
    rerun = store.run_refresh(batch_for(4), datetime.date(1999, 2, 5))
    assert store.export_history() == before, "identical snapshots: no new states"
    assert all(c["changed"] == 0 and c["inserted"] == 0
               for c in rerun.classes.values())
    report(2, "5-run script: states = 1 + changed runs, intervals partition, "
              "identical re-run appends nothing")


# -- 3. environment algebra ---------------------------------------------------------

def test_criterion_3_environment_algebra():
    source = load_schema(jsonutil.dumps(INSURANCE_SCHEMA))
    w0 = new_warehouse(source)
    for cname in source.classes:
        w0 = project_class(w0, cname)
    class_names = sorted(w0.classes)
    link_names = sorted(w0.links)
    rnd = random.Random(3003)
    w = w0
    model: dict[str, list[str]] = {}  # env name -> classes
    rejected = 0
    accepted = 0

    def expected_failure(name, classes, links):
        """Mirror of the engine's validation order, derived independently
        from the stated invariants."""
        if name in model:
            return DuplicateNameError
        for c in classes:
            if c not in class_names:
                return UnknownClassError
        for l in links:
            if l not in link_names:
                return UnknownLinkError
            link = w.links[l]
            if link.source not in classes or link.target not in classes:
                return EnvironmentEndpointError
        taken = {c for members in model.values() for c in members}
        if any(c in taken for c in classes):
            return DisjointnessViolationError
        return None

    for step in range(500):
        if model and rnd.random() < 0.3:
            name = rnd.choice(sorted(model))
            w = delete_environment(w, name)
            del model[name]
        else:
            name = f"env{rnd.randint(0, 12)}"
            classes = rnd.sample(class_names, rnd.randint(1, 3))
            if rnd.random() < 0.15:
                classes.append("Fantome")
            links = [l for l in link_names
                     if rnd.random() < 0.3] if rnd.random() < 0.6 else []
            failure = expected_failure(name, classes, links)
            try:
                w = create_environment(w, name, classes, links)
            except EngineError as exc:
                rejected += 1
                assert failure is not None, f"step {step}: unexpected rejection"
                assert isinstance(exc, failure), \
                    f"step {step}: {type(exc).__name__} != {failure.__name__}"
            else:
                accepted += 1
                assert failure is None, f"step {step}: should have failed"
                model[name] = list(classes)
        # Global invariants after every step.
        seen: set[str] = set()
        for env in w.environments.values():
            assert not (set(env.classes) & seen), "environments overlap"
            seen.update(env.classes)
            for lname in env.links:
                link = w.links[lname]
                assert link.source in env.classes and link.target in env.classes
        assert {n: sorted(e.classes) for n, e in w.environments.items()} \
            == {n: sorted(c) for n, c in model.items()}
    assert accepted and rejected
    report(3, f"500 random create/delete steps ({accepted} accepted, "
              f"{rejected} rejected with the predicted diagnostic), "
              "disjointness and containment never violated")


# -- 4. dependency closure -------------------------------------------------------------

def test_criterion_4_dependency_closure():
    rnd = random.Random(4004)
    for _ in range(100):
        graph = random_linked_schema(rnd, rnd.randint(2, 10))
        closure = oracle_closure(graph)
        for cname in graph.classes:
            got = {d.target for d in transitive_dependencies(graph, cname)}
            assert got == closure[cname]
    source = load_schema(jsonutil.dumps(INSURANCE_SCHEMA))
    w = new_warehouse(source)
    for cname in ("Actes", "Praticiens", "Cabinets"):
        w = project_class(w, cname)
    deps = {d.target: d for d in transitive_dependencies(w.schema(), "Actes")}
    assert "Praticiens" in deps and "Cabinets" in deps
    assert deps["Cabinets"].witness == ("association:Prescrit_par:->",
                                        "association:Exerce_dans:->")
    report(4, "100 random schemas equal the matrix-closure oracle; the "
              "Actes=>Praticiens=>Cabinets chain reproduces")


# -- 5. functional-dependency hierarchies --------------------------------------------------

def test_criterion_5_fd_hierarchies():
    rnd = random.Random(5005)
    for _ in range(100):
        n_cols = rnd.randint(2, 6)
        n_rows = rnd.randint(1, 200)
        columns = [f"c{i}" for i in range(n_cols)]
        domains = [rnd.randint(1, 5) for _ in range(n_cols)]
        sample = [{c: f"v{rnd.randint(1, domains[i])}"
                   for i, c in enumerate(columns)} for _ in range(n_rows)]
        got = infer_hierarchy(dim_with(columns), sample)
        assert got.edges == oracle_hierarchy(sample, columns)
    days = [datetime.date(1998, 1, 1) + datetime.timedelta(days=i)
            for i in range(365)]
    calendar = [{"Jour": d.isoformat(), "Mois": d.month,
                 "Trimestre": (d.month + 2) // 3, "Annee": d.year}
                for d in days]
    chain = infer_hierarchy(dim_with(["Jour", "Mois", "Trimestre", "Annee"]),
                            calendar)
    assert chain.edges == [("Jour", "Mois"), ("Mois", "Trimestre"),
                           ("Trimestre", "Annee")]
    report(5, "100 random relations equal the exhaustive FD scan with "
              "asymmetry + reduction; the 365-day calendar chain emerges")


# -- 6. expression equivalence ---------------------------------------------------------------

def test_criterion_6_expression_equivalence():
    rnd = random.Random(6006)
    for i in range(1000):
        values = {
            "n1": rnd.randint(-10, 10),
            "n2": Decimal(rnd.randint(-100, 100)) / Decimal(4),
            "n3": rnd.choice([rnd.randint(0, 5), None]),
        }
        node = (random_calculation(rnd, 4) if i % 2 == 0
                else random_selection(rnd, 3))
        (a, a_err), (b, b_err) = run_both(node, values)
        assert a_err == b_err and (a_err is not None or a == b), f"tree {i}"
    context, binding = flat_context_and_binding(
        {"Quantité": 2, "Prix Unitaire": Decimal("10"),
         "Taux Remb": Decimal("0.5")})
    tree = parse_formula('("K.Quantité" * "K.Prix Unitaire") * "K.Taux Remb"')
    assert evaluate(tree, context, binding) == Decimal("10")  # (2x10)x0.5, exact
    report(6, "1000 random trees agree with the stack machine; the "
              "reimbursement formula is exactly 10")


# -- 7. codegen determinism + executability ---------------------------------------------------

def test_criterion_7_codegen():
    graph, w, batches = two_run_fixture()
    p1 = emit_structure(w, "neutral-plan").text()
    p2 = emit_structure(w, "neutral-plan").text()
    r1 = emit_refresh(w, "neutral-plan").text()
    r2 = emit_refresh(w, "neutral-plan").text()
    s1 = emit_structure(w, "sql").text()
    s2 = emit_structure(w, "sql").text()
    assert p1 == p2 and r1 == r2 and s1 == s2
    store = WarehouseStore(w)
    executor = PlanExecutor(emit_refresh(w, "neutral-plan"), graph)
    for day, objects in batches:
        snaps = load_instances(graph, make_objects(objects), day)
        store.run_refresh(snaps, day)
        executor.run(snaps, day)
    native = store.export_history()
    replayed = executor.export_history()
    assert native == replayed and native != ""
    report(7, "plans byte-identical across runs; reference executor "
              "reproduces the native 2-run history byte-for-byte")


# -- 8. project replay --------------------------------------------------------------------------

def test_criterion_8_project_replay(tmp_path):
    schema_path = tmp_path / "source.json"
    schema_path.write_text(jsonutil.dumps(INSURANCE_SCHEMA, indent=2),
                           encoding="utf-8")
    project = Project.create(schema_path)
    ws = Workspace(project, tmp_path / "store")
    for cname in ("Actes", "Praticiens", "Cabinets", "Beneficiaires"):
        ws.apply("project_class", {"class": cname})
    ws.apply("historize_class", {"class": "Beneficiaires"})
    source = ws.project.source
    batch = load_instances(source, make_objects(INSURANCE_BATCH_1),
                           datetime.date(1999, 1, 1))
    ws.refresh(batch, datetime.date(1999, 1, 1))
    ws.apply("create_mart", {"name": "prestations"})
    ws.apply("project_fact", {"mart": "prestations", "class": "Actes",
                              "fact_name": "Prestations"})
    ws.apply("project_dimension", {"mart": "prestations", "class": "Cabinets",
                                   "name": None})
    ws.apply("project_dimension_from_attribute", {
        "mart": "prestations", "class": "Actes", "attribute": "Date_exec",
        "name": "Execution"})
    ws.apply("add_measure", {
        "mart": "prestations", "name": "Montant_remb",
        "formula": '("Actes.Quantité" * "Actes.Prix Unitaire") * "Actes.Taux Remb"'})
    ws.infer_hierarchy("prestations", "Cabinets")

    path = tmp_path / "p.dwproj"
    ws.project.save(path)
    reloaded = Project.load(path)
    assert (jsonutil.dumps(reloaded.resolved_json(), sort_keys=True)
            == jsonutil.dumps(ws.project.resolved_json(), sort_keys=True))
    mart = reloaded.marts["prestations"]
    assert mart.fact.name == "Prestations"
    assert {"Execution", "Cabinets"} <= set(mart.dimensions)
    assert mart.fact.measure("Montant_remb") is not None
    dim = mart.dimensions["Cabinets"]
    assert ("D_Ville", "D_Département") in dim.hierarchy.edges
    report(8, "save/reload/replay reproduces the warehouse and the "
              "Prestations mart (Execution + Cabinets dimensions) exactly")
