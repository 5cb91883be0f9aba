import { describe, expect, it } from "vitest";

import { computeLayout } from "../src/layout.js";
import {
  DIMENSION_MARKER,
  FACT_MARKER,
  martStarView,
  renderSvg,
  sourceView,
  warehouseView,
} from "../src/graph.js";
import type { MartDef, WarehouseDef } from "../src/types.js";
import { INSURANCE_SCHEMA } from "./fixtures.js";

const schema = INSURANCE_SCHEMA as never;

function demoWarehouse(): WarehouseDef {
  return {
    granularity: "day",
    refresh_period: 1,
    classes: [
      { name: "Praticiens", source: "Praticiens", attributes: [
        { name: "D_specialite_prat", kind: "derived", type: "string" }],
        operations: [], auto_projected: false },
      { name: "Personnes", source: "Personnes", attributes: [
        { name: "D_nom", kind: "derived", type: "string" }],
        operations: [], auto_projected: true },
    ],
    links: [{ name: "est_personne_prat", kind: "inheritance",
      source: "Praticiens", target: "Personnes" }],
    historized_attributes: [],
    historized_classes: ["Personnes"],
    environments: [],
  };
}

function demoMart(): MartDef {
  return {
    name: "prestations",
    fact: { name: "Prestations", origin: "Praticiens", measures: [] },
    dimensions: [{
      name: "Personnes", origin: "Personnes", parameters: [],
      hierarchy: { nodes: [], edges: [] },
    }],
  };
}

describe("layout", () => {
  it("is deterministic for a fixed seed", () => {
    const nodes = ["A", "B", "C", "D"];
    const edges = [{ source: "A", target: "B" }, { source: "B", target: "C" }];
    const first = computeLayout(nodes, edges, 42);
    const second = computeLayout(nodes, edges, 42);
    expect([...first.entries()]).toEqual([...second.entries()]);
  });

  it("changes with the seed", () => {
    const nodes = ["A", "B", "C"];
    const a = computeLayout(nodes, [], 1);
    const b = computeLayout(nodes, [], 2);
    expect(JSON.stringify([...a])).not.toEqual(JSON.stringify([...b]));
  });
});

describe("abstraction levels and masks", () => {
  it("names-only level draws no attributes", () => {
    const view = sourceView(schema, { level: "names-only", seed: 7 });
    expect(view.nodes.every((n) => n.attributes.length === 0)).toBe(true);
    const svg = renderSvg(view);
    expect(svg).not.toContain("specialite_prat");
  });

  it("with-attributes level lists them", () => {
    const view = sourceView(schema, { level: "with-attributes", seed: 7 });
    const actes = view.nodes.find((n) => n.name === "Actes")!;
    expect(actes.attributes).toContain("Date_exec");
  });

  it("masking inheritance hides exactly those links", () => {
    const full = sourceView(schema, { level: "names-only", seed: 7 });
    const masked = sourceView(schema, {
      level: "names-only", seed: 7, hideInheritance: true,
    });
    const hidden = full.edges.length - masked.edges.length;
    expect(hidden).toBe(full.edges.filter((e) => e.kind === "inheritance").length);
    expect(masked.edges.some((e) => e.kind === "inheritance")).toBe(false);
    expect(masked.edges.some((e) => e.name === "Prescrit_par")).toBe(true);
  });

  it("masking composition leaves associations and inheritance", () => {
    const masked = sourceView(schema, {
      level: "names-only", seed: 7, hideComposition: true,
    });
    expect(masked.edges.some((e) => e.kind === "inheritance")).toBe(true);
  });

  it("an empty schema renders an empty canvas without error", () => {
    const view = sourceView({ classes: [], links: [] }, {
      level: "names-only", seed: 1,
    });
    const svg = renderSvg(view);
    expect(svg.startsWith("<svg")).toBe(true);
    expect(view.nodes).toHaveLength(0);
  });
});

describe("badges and markers", () => {
  it("closure classes carry the closure badge", () => {
    const view = warehouseView(demoWarehouse(), [], { level: "names-only", seed: 3 });
    const personnes = view.nodes.find((n) => n.name === "Personnes")!;
    expect(personnes.badges).toContain("closure");
    const praticiens = view.nodes.find((n) => n.name === "Praticiens")!;
    expect(praticiens.badges).not.toContain("closure");
  });

  it("fact and dimension origins carry the markers", () => {
    const view = warehouseView(demoWarehouse(), [demoMart()], {
      level: "names-only", seed: 3,
    });
    const svg = renderSvg(view);
    expect(svg).toContain(FACT_MARKER);
    expect(svg).toContain(DIMENSION_MARKER);
    const praticiens = view.nodes.find((n) => n.name === "Praticiens")!;
    expect(praticiens.badges).toContain("fact");
  });

  it("activated classes and links are grayed", () => {
    const view = warehouseView(demoWarehouse(), [], {
      level: "names-only", seed: 3,
      activatedClasses: new Set(["Personnes"]),
      activatedLinks: new Set(["est_personne_prat"]),
    });
    expect(view.nodes.find((n) => n.name === "Personnes")!.grayed).toBe(true);
    expect(view.edges.find((e) => e.name === "est_personne_prat")!.grayed).toBe(true);
    const svg = renderSvg(view);
    expect(svg).toContain('class="node grayed"');
    expect(svg).toContain('class="edge grayed"');
  });

  it("mart star view centers the fact and rings the dimensions", () => {
    const mart: MartDef = {
      name: "prestations",
      fact: { name: "Prestations", origin: "Actes",
        measures: [{ name: "Montant_remb", type: "decimal", stored: false }] },
      dimensions: [
        { name: "Cabinets", origin: "Cabinets", parameters: [],
          hierarchy: { nodes: [], edges: [] } },
        { name: "Pharmacie", origin: "Cabinets", parameters: [],
          hierarchy: { nodes: [], edges: [] }, parent: "Cabinets" },
      ],
    };
    const view = martStarView(mart, 42);
    expect(view.positions.get("Prestations")).toEqual({ x: 480, y: 320 });
    const factEdges = view.edges.filter((e) => e.kind === "association");
    expect(factEdges).toHaveLength(1); // root dimension only
    expect(factEdges[0].target).toBe("Cabinets");
    const specialization = view.edges.find((e) => e.kind === "inheritance")!;
    expect(specialization.source).toBe("Pharmacie");
    expect(specialization.target).toBe("Cabinets");
    expect(renderSvg(view)).toContain(FACT_MARKER);
    // Same seed, same pixels.
    expect(JSON.stringify([...martStarView(mart, 42).positions]))
      .toBe(JSON.stringify([...view.positions]));
  });

  it("historized and environment badges mirror the definition", () => {
    const warehouse = demoWarehouse();
    warehouse.environments = [{ name: "suivi", classes: ["Praticiens"], links: [] }];
    const view = warehouseView(warehouse, [], { level: "names-only", seed: 3 });
    expect(view.nodes.find((n) => n.name === "Personnes")!.badges)
      .toContain("historized");
    expect(view.nodes.find((n) => n.name === "Praticiens")!.badges)
      .toContain("env:suivi");
  });
});
