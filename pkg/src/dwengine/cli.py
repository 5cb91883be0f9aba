"""dwctl: command-line front end over the project log and the store.

Every engine failure exits with status 1 and a machine-readable JSON
diagnostic on stderr: {"kind": ..., "message": ..., "details": ...}.
The project path comes from --project or the DWCTL_PROJECT variable.
"""

from __future__ import annotations

import datetime
import functools
import sys
from pathlib import Path

import click

from . import jsonutil
from .codegen import emit_refresh, emit_structure
from .errors import EngineError
from .marts import load_mart
from .project import Project, Workspace, open_workspace
from .schema_core import load_instances, load_schema


def engine_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except EngineError as exc:
            sys.stderr.write(jsonutil.dumps(exc.to_diagnostic()) + "\n")
            sys.exit(1)
    return wrapper


project_option = click.option(
    "--project", "project_path", envvar="DWCTL_PROJECT", required=True,
    type=click.Path(), help="Project file (or set DWCTL_PROJECT).")


def _workspace(project_path: str) -> Workspace:
    return open_workspace(project_path)


def _save(ws: Workspace, project_path: str) -> None:
    ws.project.save(project_path)


@click.group()
def main():
    """Build and refresh a historized warehouse and its data marts."""


@main.command()
@click.option("--schema", "schema_path", type=click.Path(exists=True))
@click.option("--project", "project_path", type=click.Path(exists=True))
@engine_errors
def validate(schema_path, project_path):
    """Validate a schema file or replay-check a project file."""
    if not schema_path and not project_path:
        raise click.UsageError("pass --schema or --project")
    if schema_path:
        load_schema(Path(schema_path).read_text(encoding="utf-8"))
        click.echo(f"schema ok: {schema_path}")
    if project_path:
        Project.load(project_path)
        click.echo(f"project ok: {project_path}")


@main.command()
@click.option("--schema", "schema_path", required=True, type=click.Path(exists=True))
@project_option
@engine_errors
def init(schema_path, project_path):
    """Create a fresh project over a source schema."""
    project = Project.create(schema_path)
    project.save(project_path)
    click.echo(f"created {project_path} over {schema_path}")


@main.command("project-class")
@click.argument("class_name")
@project_option
@engine_errors
def project_class_cmd(class_name, project_path):
    """Project a source class (and its type closure) into the warehouse."""
    ws = _workspace(project_path)
    before = set(ws.project.warehouse.classes)
    ws.apply("project_class", {"class": class_name})
    _save(ws, project_path)
    added = sorted(set(ws.project.warehouse.classes) - before)
    click.echo(f"projected: {', '.join(added) if added else '(already present)'}")


@main.command()
@click.argument("level", type=click.Choice(["attr", "class", "env"]))
@click.argument("args", nargs=-1)
@click.option("--classes", "env_classes", default="", help="env: comma-separated classes")
@click.option("--links", "env_links", default="", help="env: comma-separated links")
@project_option
@engine_errors
def historize(level, args, env_classes, env_links, project_path):
    """Mark an attribute, a class, or an environment as historized.

    historize attr CLASS ATTRIBUTE | historize class CLASS |
    historize env NAME --classes A,B --links L1
    """
    ws = _workspace(project_path)
    if level == "attr":
        if len(args) != 2:
            raise click.UsageError("historize attr CLASS ATTRIBUTE")
        ws.apply("historize_attribute", {"class": args[0], "attribute": args[1]})
    elif level == "class":
        if len(args) != 1:
            raise click.UsageError("historize class CLASS")
        ws.apply("historize_class", {"class": args[0]})
    else:
        if len(args) != 1:
            raise click.UsageError("historize env NAME --classes ... --links ...")
        ws.apply("create_environment", {
            "name": args[0],
            "classes": [c for c in env_classes.split(",") if c],
            "links": [l for l in env_links.split(",") if l]})
    _save(ws, project_path)
    click.echo("historization recorded")


@main.command("set-time-model")
@click.option("--granularity", type=click.Choice(["day", "hour", "minute"]),
              required=True)
@click.option("--period", type=int, default=1, help="Refresh period in granules.")
@project_option
@engine_errors
def set_time_model(granularity, period, project_path):
    """Fix the time granularity and refresh period of the warehouse."""
    ws = _workspace(project_path)
    ws.apply("set_time_model", {"granularity": granularity,
                                "refresh_period": period})
    _save(ws, project_path)
    click.echo(f"time model: {granularity} x {period}")


@main.command("set-selection")
@click.argument("class_name")
@click.argument("predicate")
@project_option
@engine_errors
def set_selection_cmd(class_name, predicate, project_path):
    """Attach a selection predicate to a warehouse class."""
    ws = _workspace(project_path)
    ws.apply("set_selection", {"class": class_name, "predicate": predicate})
    _save(ws, project_path)
    click.echo(f"selection set on {class_name}")


@main.command()
@click.option("--instances", "instances_path", required=True,
              type=click.Path(exists=True))
@project_option
@engine_errors
def extract(instances_path, project_path):
    """Type-check an instance batch against the source schema (no load)."""
    ws = _workspace(project_path)
    text = Path(instances_path).read_text(encoding="utf-8")
    known = {cname: set(ws.store.current.get(cname, {}))
             for cname in ws.project.warehouse.classes}
    snaps = load_instances(ws.project.source, text, datetime.date.today(), known)
    per_class: dict[str, int] = {}
    for snap in snaps:
        per_class[snap.class_name] = per_class.get(snap.class_name, 0) + 1
    click.echo(jsonutil.dumps({"objects": len(snaps), "classes": per_class}))


@main.command()
@click.option("--instances", "instances_path", required=True,
              type=click.Path(exists=True))
@click.option("--date", "date_text", required=True)
@project_option
@engine_errors
def refresh(instances_path, date_text, project_path):
    """Run one extraction: load instances and append history."""
    ws = _workspace(project_path)
    text = Path(instances_path).read_text(encoding="utf-8")
    known = {cname: set(ws.store.current.get(cname, {}))
             for cname in ws.project.warehouse.classes}
    when = ws.store.time_model.quantize(date_text)
    snaps = load_instances(ws.project.source, text, when.date(), known)
    run = ws.refresh(snaps, date_text)
    _save(ws, project_path)
    click.echo(jsonutil.dumps(run.to_json(ws.store.time_model)))


@main.command("mart-detect-fact")
@project_option
@engine_errors
def mart_detect_fact(project_path):
    """Rank representative-class candidates by insertion rate."""
    ws = _workspace(project_path)
    ranked, notes = ws.detect_representative()
    click.echo(jsonutil.dumps({
        "candidates": [{"class": name, "score": score} for name, score in ranked],
        "notes": notes}))


@main.command("mart-project-fact")
@click.argument("class_name")
@click.argument("fact_name")
@click.option("--mart", "mart_name", required=True)
@click.option("--force", is_flag=True, help="Administrator override.")
@project_option
@engine_errors
def mart_project_fact(class_name, fact_name, mart_name, force, project_path):
    """Project a representative class as the mart's fact class."""
    ws = _workspace(project_path)
    if mart_name not in ws.project.marts:
        ws.apply("create_mart", {"name": mart_name})
    diags = ws.project_fact(mart_name, class_name, fact_name, force=force)
    _save(ws, project_path)
    for diag in diags:
        click.echo(f"note: {diag}")
    click.echo(f"fact {fact_name} created from {class_name}")


@main.command("mart-project-dim")
@click.argument("class_name")
@click.option("--mart", "mart_name", required=True)
@click.option("--name", "dim_name", default=None)
@click.option("--from-attribute", "attribute", default=None,
              help="Derive a temporal/geographic dimension from this attribute.")
@click.option("--all", "all_detected", is_flag=True,
              help="Project every detected dependent class.")
@project_option
@engine_errors
def mart_project_dim(class_name, mart_name, dim_name, attribute, all_detected,
                     project_path):
    """Project a dependent class (or one of its date/address attributes)."""
    ws = _workspace(project_path)
    if all_detected:
        ws.apply("project_all_dependencies", {"mart": mart_name})
    elif attribute:
        ws.apply("project_dimension_from_attribute", {
            "mart": mart_name, "class": class_name, "attribute": attribute,
            "name": dim_name or attribute})
    else:
        ws.apply("project_dimension", {
            "mart": mart_name, "class": class_name, "name": dim_name})
    _save(ws, project_path)
    click.echo("dimension(s) projected")


@main.command("mart-infer-hierarchy")
@click.argument("dimension")
@click.option("--mart", "mart_name", required=True)
@project_option
@engine_errors
def mart_infer_hierarchy(dimension, mart_name, project_path):
    """Mine hierarchical dependencies on the dimension's current extension."""
    ws = _workspace(project_path)
    hierarchy = ws.infer_hierarchy(mart_name, dimension)
    _save(ws, project_path)
    click.echo(jsonutil.dumps(hierarchy.to_json()))


@main.command("mart-add-measure")
@click.argument("name")
@click.argument("formula")
@click.option("--mart", "mart_name", required=True)
@click.option("--dimension", default=None,
              help="Add a calculated parameter to this dimension instead.")
@project_option
@engine_errors
def mart_add_measure(name, formula, mart_name, dimension, project_path):
    """Add a calculated measure (or, with --dimension, a parameter)."""
    ws = _workspace(project_path)
    if dimension:
        ws.apply("add_parameter", {"mart": mart_name, "dimension": dimension,
                                   "name": name, "formula": formula})
    else:
        ws.apply("add_measure", {"mart": mart_name, "name": name,
                                 "formula": formula})
    _save(ws, project_path)
    click.echo(f"added {name}")


@main.command("mart-select")
@click.argument("target")
@click.argument("predicate")
@click.option("--mart", "mart_name", required=True)
@project_option
@engine_errors
def mart_select(target, predicate, mart_name, project_path):
    """Limit the objects a mart class imports from the warehouse."""
    ws = _workspace(project_path)
    ws.apply("select_objects", {"mart": mart_name, "target": target,
                                "predicate": predicate})
    _save(ws, project_path)
    click.echo(f"selection set on {target}")


@main.command()
@click.argument("what", type=click.Choice(["structure", "refresh"]))
@click.option("--target", type=click.Choice(["neutral-plan", "sql"]),
              default="neutral-plan")
@click.option("--mart", "mart_name", default=None,
              help="Emit for this mart instead of the warehouse.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@project_option
@engine_errors
def emit(what, target, mart_name, out_path, project_path):
    """Emit structure or refresh scripts for the warehouse or a mart."""
    ws = _workspace(project_path)
    if what == "structure":
        definition = ws.project.mart(mart_name) if mart_name else ws.project.warehouse
        plan = emit_structure(definition, target)
    else:
        if mart_name:
            raise click.UsageError("refresh scripts exist for the warehouse only")
        plan = emit_refresh(ws.project.warehouse, target)
    text = plan.text()
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("what", type=click.Choice(["history", "mart"]))
@click.option("--mart", "mart_name", default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@project_option
@engine_errors
def export(what, mart_name, out_dir, project_path):
    """Export history or mart data as JSON Lines."""
    ws = _workspace(project_path)
    if what == "history":
        text = ws.store.export_history()
        if out_dir:
            path = Path(out_dir) / "history.jsonl"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
            click.echo(f"wrote {path}")
        else:
            click.echo(text, nl=False)
        return
    if not mart_name:
        raise click.UsageError("export mart needs --mart")
    data = ws.load_mart(mart_name)
    out = Path(out_dir or f"{mart_name}-export")
    out.mkdir(parents=True, exist_ok=True)
    fact_path = out / "fact.jsonl"
    fact_path.write_text(data.export_fact(), encoding="utf-8")
    for dim_name in data.dimension_rows:
        (out / f"dim_{dim_name}.jsonl").write_text(
            data.export_dimension(dim_name), encoding="utf-8")
    click.echo(f"wrote {out}/")


@main.command()
@click.option("--port", default=8642, type=int)
@click.option("--host", default="127.0.0.1")
@project_option
@engine_errors
def serve(port, host, project_path):
    """Start the HTTP/JSON service the admin studio talks to."""
    from .service import run_server
    run_server(project_path, host, port)


if __name__ == "__main__":
    main()
