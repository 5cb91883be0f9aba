// Studio state and interactions. The studio itself is stateless: everything
// it shows is rebuilt from API reads, so closing and reopening against the
// same project reproduces the exact same badges, markers and hierarchies.

import { Api, EngineError } from "./api.js";
import { renderDiagnostic, RenderedDiagnostic } from "./diagnostics.js";
import type { ClassDependency, MartDef, SourceSchema, WarehouseDef } from "./types.js";

export interface StudioState {
  version: number;
  source: SourceSchema;
  warehouse: WarehouseDef;
  marts: MartDef[];
  runs: number;
}

export async function loadStudio(api: Api): Promise<StudioState> {
  const source = await api.sourceSchema();
  const { version, warehouse } = await api.warehouse();
  const index = await api.marts();
  const marts: MartDef[] = [];
  for (const name of index.marts) {
    marts.push((await api.mart(name)).mart);
  }
  const runs = (await api.runs()).runs.length;
  return { version, source: source.schema, warehouse, marts, runs };
}

// A canonical serialization of everything the studio displays; two loads of
// the same project must produce identical strings.
export function displayFingerprint(state: StudioState): string {
  const badges = state.warehouse.classes.map((c) => ({
    name: c.name,
    auto: c.auto_projected,
    selection: c.selection ?? null,
  }));
  const hierarchy = state.marts.map((m) => ({
    name: m.name,
    fact: m.fact?.name ?? null,
    dims: m.dimensions.map((d) => ({
      name: d.name,
      edges: d.hierarchy.edges,
      witness: d.witness ?? [],
    })),
  }));
  return JSON.stringify({
    badges,
    historized: state.warehouse.historized_classes,
    attributes: state.warehouse.historized_attributes,
    environments: state.warehouse.environments,
    hierarchy,
  });
}

export interface ActionResult {
  state: StudioState | null;
  // Closure classes that appeared because of this projection.
  appeared: string[];
  idempotent: boolean;
  diagnostic: RenderedDiagnostic | null;
  conflict: boolean;
}

async function reload(api: Api): Promise<StudioState> {
  return loadStudio(api);
}

function failure(error: unknown): ActionResult {
  if (error instanceof EngineError) {
    return {
      state: null,
      appeared: [],
      idempotent: false,
      diagnostic: renderDiagnostic(error.diagnostic),
      conflict: error.status === 409,
    };
  }
  throw error;
}

// A click on a source class in the projection view.
export async function clickProjection(
  api: Api,
  state: StudioState,
  className: string,
): Promise<ActionResult> {
  const before = new Set(state.warehouse.classes.map((c) => c.name));
  try {
    const response = await api.projectClass(className, state.version);
    const appeared = response.warehouse.classes
      .map((c) => c.name)
      .filter((name) => !before.has(name));
    return {
      state: await reload(api),
      appeared,
      idempotent: appeared.length === 0,
      diagnostic: null,
      conflict: false,
    };
  } catch (error) {
    return failure(error);
  }
}

// The environment lasso: a set of classes and links plus a name.
export async function lassoEnvironment(
  api: Api,
  state: StudioState,
  name: string,
  classes: string[],
  links: string[],
): Promise<ActionResult> {
  try {
    await api.createEnvironment(name, classes, links, state.version);
    return {
      state: await reload(api), appeared: [], idempotent: false,
      diagnostic: null, conflict: false,
    };
  } catch (error) {
    return failure(error);
  }
}

// The dependency explorer: candidates for the open mart, with the classes
// and links to gray once the administrator activates a candidate.
export interface DependencyCandidate {
  target: string;
  witness: string[];
  linkNames: string[];
}

export async function exploreDependencies(
  api: Api,
  mart: string,
  from?: string,
): Promise<DependencyCandidate[]> {
  const { dependencies } = await api.dependencies(mart, from);
  return dependencies
    .filter((d: ClassDependency) => d.witness.length && d.witness[0] !== "reflexive")
    .map((d) => ({
      target: d.target,
      witness: d.witness,
      linkNames: d.witness
        .filter((step) => step !== "reflexive")
        .map((step) => step.split(":")[1]),
    }));
}

export function activationSets(
  candidates: DependencyCandidate[],
  chosen: string[],
): { classes: Set<string>; links: Set<string> } {
  const classes = new Set<string>();
  const links = new Set<string>();
  for (const candidate of candidates) {
    if (!chosen.includes(candidate.target)) continue;
    classes.add(candidate.target);
    for (const link of candidate.linkNames) links.add(link);
  }
  return { classes, links };
}

export async function editHierarchy(
  api: Api,
  state: StudioState,
  mart: string,
  dimension: string,
  action: "infer" | "add" | "remove",
  edge?: [string, string],
): Promise<ActionResult> {
  try {
    const body: Record<string, unknown> = { dimension, action };
    if (edge) {
      body.from = edge[0];
      body.to = edge[1];
    }
    await api.hierarchy(mart, body, state.version);
    return {
      state: await reload(api), appeared: [], idempotent: false,
      diagnostic: null, conflict: false,
    };
  } catch (error) {
    return failure(error);
  }
}

export async function submitFormula(
  api: Api,
  state: StudioState,
  mart: string,
  name: string,
  canonicalText: string,
  dimension?: string,
): Promise<ActionResult> {
  try {
    await api.addMeasure(mart, name, canonicalText, state.version, dimension);
    return {
      state: await reload(api), appeared: [], idempotent: false,
      diagnostic: null, conflict: false,
    };
  } catch (error) {
    return failure(error);
  }
}

export async function submitSelection(
  api: Api,
  state: StudioState,
  mart: string,
  target: string,
  canonicalText: string,
): Promise<ActionResult> {
  try {
    await api.selectObjects(mart, target, canonicalText, state.version);
    return {
      state: await reload(api), appeared: [], idempotent: false,
      diagnostic: null, conflict: false,
    };
  } catch (error) {
    return failure(error);
  }
}
