// Hierarchy window: the inferred graph shown as editable levels. All edits
// go to the server, which re-validates acyclicity and the dependencies;
// this module only shapes the data for display.

import type { Hierarchy } from "./types.js";

export interface HierarchyLevel {
  depth: number;
  parameters: string[];
}

// Orders parameters into detail levels: sources (finest grain) first.
// Works on any DAG; a chain renders as one parameter per level.
export function levelize(hierarchy: Hierarchy): HierarchyLevel[] {
  const incoming = new Map<string, number>();
  for (const node of hierarchy.nodes) incoming.set(node, 0);
  for (const [, to] of hierarchy.edges) {
    incoming.set(to, (incoming.get(to) ?? 0) + 1);
  }
  const depth = new Map<string, number>();
  let frontier = hierarchy.nodes.filter((n) => (incoming.get(n) ?? 0) === 0);
  let level = 0;
  const remaining = new Map(incoming);
  while (frontier.length) {
    for (const node of frontier) depth.set(node, level);
    const next: string[] = [];
    for (const [from, to] of hierarchy.edges) {
      if (!frontier.includes(from)) continue;
      const left = (remaining.get(to) ?? 0) - 1;
      remaining.set(to, left);
      if (left === 0) next.push(to);
    }
    frontier = next;
    level += 1;
  }
  const levels: HierarchyLevel[] = [];
  for (const [node, d] of depth) {
    while (levels.length <= d) levels.push({ depth: levels.length, parameters: [] });
    levels[d].parameters.push(node);
  }
  for (const l of levels) l.parameters.sort();
  return levels;
}

export function chainText(hierarchy: Hierarchy): string {
  return levelize(hierarchy)
    .map((l) => l.parameters.join(", "))
    .join(" ⇒ ");
}
