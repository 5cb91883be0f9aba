// Rendering for every diagnostic kind the engine can emit. The test suite
// fetches GET /diagnostics and fails if a kind ever lacks an entry here.

import type { Diagnostic } from "./types.js";

export interface Rendering {
  title: string;
  // Where to surface it: a banner, inline at a class/link, or at a formula node.
  placement: "banner" | "class" | "link" | "formula" | "hierarchy";
  // Which detail field names the element to highlight, when placed inline.
  highlight?: string;
}

export const RENDERINGS: Record<string, Rendering> = {
  // schema level
  "parse-error": { title: "Document does not parse", placement: "banner" },
  "dangling-endpoint": { title: "Link points at a missing class", placement: "link", highlight: "link" },
  "inheritance-cycle": { title: "Inheritance loops back on itself", placement: "class", highlight: "class_name" },
  "duplicate-name": { title: "Name already in use", placement: "banner" },
  "type-mismatch": { title: "Value does not match the declared type", placement: "banner" },
  "unresolved-reference": { title: "Reference to an unknown object", placement: "banner" },
  "unknown-class": { title: "No such class", placement: "class", highlight: "class_name" },
  "unknown-attribute": { title: "No such attribute", placement: "class", highlight: "class_name" },
  "unknown-link": { title: "No such link", placement: "link", highlight: "link" },
  "cardinality-violation": { title: "Too many link targets", placement: "link", highlight: "link" },

  // warehouse level
  "name-collision": { title: "A warehouse class already has that name", placement: "class", highlight: "class_name" },
  "not-projected": { title: "Class is not in the warehouse yet", placement: "class", highlight: "class_name" },
  "invalid-restructure": { title: "Restructuring cannot apply", placement: "banner" },
  "closure-violation": { title: "Type closure would break", placement: "class", highlight: "class_name" },
  "non-boolean-predicate": { title: "A selection must be a boolean formula", placement: "formula" },

  // formulas
  "syntax-error": { title: "Formula does not parse", placement: "formula" },
  "unknown-operator": { title: "Unknown operator", placement: "formula" },
  "arity-error": { title: "Wrong number of operands", placement: "formula" },
  "evaluation-error": { title: "Formula cannot evaluate", placement: "formula" },
  "division-by-zero": { title: "Division by zero", placement: "formula" },
  "null-operand": { title: "Operand has no value", placement: "formula" },
  "empty-aggregation": { title: "Aggregation over nothing", placement: "formula" },
  "non-date-attribute": { title: "A date attribute is required", placement: "formula" },
  "validation-diagnostics": { title: "Formula does not validate", placement: "formula" },

  // temporal store
  "specific-attribute-historization": { title: "User-owned attributes cannot be historized", placement: "class", highlight: "class_name" },
  "out-of-order-run": { title: "Refresh date must follow the previous run", placement: "banner" },
  "disjointness-violation": { title: "Class already belongs to another environment", placement: "class", highlight: "class_name" },
  "endpoint-outside-environment": { title: "Link leaves the environment", placement: "link", highlight: "link" },
  "not-historized": { title: "Class is not historized", placement: "class", highlight: "class_name" },
  "unknown-object": { title: "No such object", placement: "banner" },

  // marts
  "not-representative": { title: "Class is not detected as representative", placement: "class", highlight: "class_name" },
  "fact-already-defined": { title: "The mart already has its fact class", placement: "banner" },
  "non-dependent-class": { title: "Class does not depend on the fact's origin", placement: "class", highlight: "class_name" },
  "empty-sample": { title: "No extension rows to mine dependencies from", placement: "banner" },
  "unknown-dimension": { title: "No such dimension", placement: "banner" },
  "parameter-collision": { title: "Parameter name collides", placement: "banner" },
  "hierarchy-cycle": { title: "Hierarchy edge would close a cycle", placement: "hierarchy", highlight: "cycle" },
  "hierarchy-dependency": { title: "Not an asymmetric dependency on the data", placement: "hierarchy", highlight: "edge" },
  "complex-measure": { title: "Measures must have simple types", placement: "banner" },
  "ambiguous-linkage": { title: "Fact object reaches several dimension members", placement: "banner" },

  // codegen / project / service
  "unvalidated-definition": { title: "Definition does not validate", placement: "banner" },
  "plan-execution-error": { title: "Plan execution failed", placement: "banner" },
  "project-format-error": { title: "Project file is unreadable", placement: "banner" },
  "replay-mismatch": { title: "Project log does not replay to its saved state", placement: "banner" },
  "source-hash-mismatch": { title: "The source schema changed since the project was saved", placement: "banner" },
  "version-conflict": { title: "Someone else changed the project; reload", placement: "banner" },
  "unknown-mart": { title: "No such mart", placement: "banner" },
  "engine-error": { title: "Engine error", placement: "banner" },

  // service plumbing (not in the engine catalog, still renderable)
  "not-found": { title: "No such resource", placement: "banner" },
  "bad-request": { title: "Malformed request", placement: "banner" },
};

export interface RenderedDiagnostic {
  kind: string;
  title: string;
  message: string;
  placement: Rendering["placement"];
  target: string | null;
}

export function renderDiagnostic(diagnostic: Diagnostic): RenderedDiagnostic {
  const rendering = RENDERINGS[diagnostic.kind] ?? RENDERINGS["engine-error"];
  let target: string | null = null;
  if (rendering.highlight) {
    const value = diagnostic.details?.[rendering.highlight];
    if (Array.isArray(value)) target = value.join(" > ");
    else if (value != null) target = String(value);
  }
  return {
    kind: diagnostic.kind,
    title: rendering.title,
    message: diagnostic.message,
    placement: rendering.placement,
    target,
  };
}
