// Schema graph view: abstraction levels, link-kind masks, activation
// graying, closure badges, fact/dimension markers. Pure data-in SVG-out so
// the same code renders in the browser and under test.

import { computeLayout, Point } from "./layout.js";
import type { LinkKind, MartDef, SchemaLink, WarehouseDef } from "./types.js";

export type AbstractionLevel = "names-only" | "with-attributes";

export interface GraphNode {
  name: string;
  attributes: string[];
  badges: string[]; // "closure" | "historized" | "env:<name>" | "fact" | "dimension"
  grayed: boolean;
}

export interface GraphEdge {
  name: string;
  kind: LinkKind;
  source: string;
  target: string;
  grayed: boolean;
}

export interface GraphView {
  nodes: GraphNode[];
  edges: GraphEdge[];
  positions: Map<string, Point>;
}

export interface ViewOptions {
  level: AbstractionLevel;
  hideInheritance?: boolean;
  hideComposition?: boolean;
  seed: number;
  // Names of classes/links the dependency explorer has activated (grayed).
  activatedClasses?: Set<string>;
  activatedLinks?: Set<string>;
}

export const FACT_MARKER = "☐"; // the fact-class symbol
export const DIMENSION_MARKER = "↷"; // the dimension-origin symbol

function linkVisible(link: SchemaLink, options: ViewOptions): boolean {
  if (options.hideInheritance && link.kind === "inheritance") return false;
  if (options.hideComposition && link.kind === "composition") return false;
  return true;
}

export function warehouseView(
  warehouse: WarehouseDef,
  marts: MartDef[],
  options: ViewOptions,
): GraphView {
  const factOrigins = new Map<string, string>();
  const dimensionOrigins = new Set<string>();
  for (const mart of marts) {
    if (mart.fact) factOrigins.set(mart.fact.origin, mart.fact.name);
    for (const dim of mart.dimensions) {
      if (dim.origin) dimensionOrigins.add(dim.origin);
      if (dim.origin_attribute) dimensionOrigins.add(dim.origin_attribute[0]);
    }
  }
  const envOf = new Map<string, string>();
  for (const env of warehouse.environments) {
    for (const cname of env.classes) envOf.set(cname, env.name);
  }
  const historized = new Set(warehouse.historized_classes);

  const nodes: GraphNode[] = warehouse.classes.map((cls) => {
    const badges: string[] = [];
    if (cls.auto_projected) badges.push("closure");
    if (historized.has(cls.name)) badges.push("historized");
    const env = envOf.get(cls.name);
    if (env) badges.push(`env:${env}`);
    if (factOrigins.has(cls.name)) badges.push("fact");
    if (dimensionOrigins.has(cls.name)) badges.push("dimension");
    return {
      name: cls.name,
      attributes: options.level === "with-attributes"
        ? cls.attributes.map((a) => a.name)
        : [],
      badges,
      grayed: options.activatedClasses?.has(cls.name) ?? false,
    };
  });

  const edges: GraphEdge[] = warehouse.links
    .filter((l) => linkVisible(l, options))
    .map((l) => ({
      name: l.name,
      kind: l.kind,
      source: l.source,
      target: l.target,
      grayed: options.activatedLinks?.has(l.name) ?? false,
    }));

  const positions = computeLayout(
    nodes.map((n) => n.name),
    warehouse.links.map((l) => ({ source: l.source, target: l.target })),
    options.seed,
  );
  return { nodes, edges, positions };
}

export function sourceView(
  schema: { classes: { name: string; attributes: { name: string }[] }[]; links: SchemaLink[] },
  options: ViewOptions,
): GraphView {
  const nodes: GraphNode[] = schema.classes.map((cls) => ({
    name: cls.name,
    attributes: options.level === "with-attributes"
      ? cls.attributes.map((a) => a.name)
      : [],
    badges: [],
    grayed: options.activatedClasses?.has(cls.name) ?? false,
  }));
  const edges: GraphEdge[] = schema.links
    .filter((l) => linkVisible(l, options))
    .map((l) => ({
      name: l.name,
      kind: l.kind,
      source: l.source,
      target: l.target,
      grayed: options.activatedLinks?.has(l.name) ?? false,
    }));
  const positions = computeLayout(
    nodes.map((n) => n.name),
    schema.links.map((l) => ({ source: l.source, target: l.target })),
    options.seed,
  );
  return { nodes, edges, positions };
}

// The mart window: the fact class in the middle, dimensions on a ring,
// (1,1) association edges to the fact, inheritance edges to parents.
export function martStarView(mart: MartDef, seed: number): GraphView {
  const nodes: GraphNode[] = [];
  const edges: GraphEdge[] = [];
  if (mart.fact) {
    nodes.push({
      name: mart.fact.name,
      attributes: mart.fact.measures.map((m) => m.name),
      badges: ["fact"],
      grayed: false,
    });
  }
  for (const dim of mart.dimensions) {
    nodes.push({
      name: dim.name,
      attributes: dim.parameters.map((p) => p.name),
      badges: ["dimension"],
      grayed: false,
    });
    if (dim.parent) {
      edges.push({
        name: `${dim.name}_specializes`,
        kind: "inheritance",
        source: dim.name,
        target: dim.parent,
        grayed: false,
      });
    } else if (mart.fact) {
      edges.push({
        name: `${mart.fact.name}_${dim.name}`,
        kind: "association",
        source: mart.fact.name,
        target: dim.name,
        grayed: false,
      });
    }
  }
  const positions = new Map<string, Point>();
  if (mart.fact) positions.set(mart.fact.name, { x: 480, y: 320 });
  const ring = mart.dimensions.map((d) => d.name).sort();
  ring.forEach((name, i) => {
    const angle = (2 * Math.PI * i) / Math.max(ring.length, 1) + seed * 0.001;
    positions.set(name, {
      x: Math.round((480 + 240 * Math.cos(angle)) * 100) / 100,
      y: Math.round((320 + 200 * Math.sin(angle)) * 100) / 100,
    });
  });
  return { nodes, edges, positions };
}

const EDGE_DASH: Record<LinkKind, string> = {
  association: "",
  composition: "6 3",
  inheritance: "2 3",
};

function escapeXml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

// Renders the view as standalone SVG. Node markup carries data-class /
// data-link attributes; the shell wires click handlers onto them.
export function renderSvg(view: GraphView): string {
  const parts: string[] = [
    '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 960 640" class="schema-graph">',
  ];
  for (const edge of view.edges) {
    const a = view.positions.get(edge.source);
    const b = view.positions.get(edge.target);
    if (!a || !b) continue;
    const cls = edge.grayed ? "edge grayed" : "edge";
    const dash = EDGE_DASH[edge.kind] ? ` stroke-dasharray="${EDGE_DASH[edge.kind]}"` : "";
    parts.push(
      `<line class="${cls}" data-link="${escapeXml(edge.name)}" data-kind="${edge.kind}"` +
      ` x1="${a.x}" y1="${a.y}" x2="${b.x}" y2="${b.y}" stroke="#667"${dash}/>`,
    );
    const mx = Math.round(((a.x + b.x) / 2) * 100) / 100;
    const my = Math.round(((a.y + b.y) / 2) * 100) / 100;
    parts.push(
      `<text class="edge-label" x="${mx}" y="${my}" font-size="10">${escapeXml(edge.name)}</text>`,
    );
  }
  for (const node of view.nodes) {
    const p = view.positions.get(node.name);
    if (!p) continue;
    const height = 28 + node.attributes.length * 13;
    const cls = node.grayed ? "node grayed" : "node";
    parts.push(`<g class="${cls}" data-class="${escapeXml(node.name)}" transform="translate(${p.x - 60},${p.y - height / 2})">`);
    parts.push(`<rect width="120" height="${height}" rx="4" fill="${node.grayed ? "#d8d8dc" : "#fff"}" stroke="#334"/>`);
    const markers = node.badges.includes("fact") ? FACT_MARKER + " "
      : node.badges.includes("dimension") ? DIMENSION_MARKER + " " : "";
    parts.push(`<text x="60" y="16" text-anchor="middle" font-size="12" font-weight="bold">${escapeXml(markers + node.name)}</text>`);
    node.attributes.forEach((attr, i) => {
      parts.push(`<text x="8" y="${30 + i * 13}" font-size="10">${escapeXml(attr)}</text>`);
    });
    node.badges.forEach((badge, i) => {
      if (badge === "fact" || badge === "dimension") return;
      parts.push(`<text class="badge" data-badge="${escapeXml(badge)}" x="122" y="${12 + i * 12}" font-size="9" fill="#a50">${escapeXml(badge)}</text>`);
    });
    parts.push("</g>");
  }
  parts.push("</svg>");
  return parts.join("\n");
}
