// Wire payloads of the engine's HTTP API, as the studio consumes them.

export type LinkKind = "association" | "composition" | "inheritance";

export interface SourceAttribute {
  name: string;
  type: unknown;
  semantic?: string;
}

export interface SourceClass {
  name: string;
  attributes: SourceAttribute[];
  operations: string[];
}

export interface SchemaLink {
  name: string;
  kind: LinkKind;
  source: string;
  target: string;
  cardinality?: { source: [number, number | "many"]; target: [number, number | "many"] };
}

export interface SourceSchema {
  classes: SourceClass[];
  links: SchemaLink[];
}

export interface WarehouseAttribute {
  name: string;
  kind: "derived" | "calculated" | "specific";
  type: unknown;
  source_path?: string[];
  formula?: string;
  semantic?: string;
}

export interface WarehouseClass {
  name: string;
  source: string;
  attributes: WarehouseAttribute[];
  operations: string[];
  auto_projected: boolean;
  selection?: string;
}

export interface EnvironmentDef {
  name: string;
  classes: string[];
  links: string[];
}

export interface WarehouseDef {
  granularity: string;
  refresh_period: number;
  classes: WarehouseClass[];
  links: SchemaLink[];
  historized_attributes: [string, string][];
  historized_classes: string[];
  environments: EnvironmentDef[];
}

export interface MartAttribute {
  name: string;
  type: unknown;
  stored: boolean;
  source_attribute?: string;
  formula?: string;
}

export interface Hierarchy {
  nodes: string[];
  edges: [string, string][];
}

export interface FactClass {
  name: string;
  origin: string;
  measures: MartAttribute[];
  selection?: string;
}

export interface DimensionClass {
  name: string;
  origin?: string;
  origin_attribute?: [string, string];
  parameters: MartAttribute[];
  hierarchy: Hierarchy;
  parent?: string;
  membership?: string;
  selection?: string;
  witness?: string[];
}

export interface MartDef {
  name: string;
  fact: FactClass | null;
  dimensions: DimensionClass[];
}

export interface ClassDependency {
  source: string;
  target: string;
  witness: string[];
}

export interface RunRecord {
  seq: number;
  date: string;
  classes: Record<string, { inserted: number; changed: number; unchanged: number; tombstoned: string[] }>;
}

export interface Diagnostic {
  kind: string;
  message: string;
  details: Record<string, unknown>;
}

export interface RefreshEvent {
  event: "class-refreshed" | "run-complete";
  class?: string;
  run: number;
  [key: string]: unknown;
}
