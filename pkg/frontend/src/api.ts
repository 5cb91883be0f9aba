// Typed client for the engine service. Every mutation carries the project
// version the caller last saw; the engine answers 409 when it moved.

import type {
  ClassDependency,
  Diagnostic,
  MartDef,
  RefreshEvent,
  RunRecord,
  SourceSchema,
  WarehouseDef,
} from "./types.js";

export class EngineError extends Error {
  constructor(public status: number, public diagnostic: Diagnostic) {
    super(diagnostic.message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  const body = await response.json();
  if (!response.ok) {
    throw new EngineError(response.status, body as Diagnostic);
  }
  return body as T;
}

export class Api {
  constructor(public base: string) {}

  private get<T>(path: string): Promise<T> {
    return request<T>(this.base + path);
  }

  private post<T>(path: string, payload: Record<string, unknown>): Promise<T> {
    return request<T>(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  sourceSchema(): Promise<{ schema: SourceSchema }> {
    return this.get("/schema/source");
  }

  warehouse(): Promise<{ version: number; warehouse: WarehouseDef }> {
    return this.get("/warehouse");
  }

  marts(): Promise<{ version: number; marts: string[] }> {
    return this.get("/marts");
  }

  mart(name: string): Promise<{ version: number; mart: MartDef }> {
    return this.get(`/marts/${encodeURIComponent(name)}`);
  }

  dependencies(mart: string, from?: string): Promise<{ from: string; dependencies: ClassDependency[] }> {
    const suffix = from ? `?from=${encodeURIComponent(from)}` : "";
    return this.get(`/marts/${encodeURIComponent(mart)}/dependencies${suffix}`);
  }

  runs(): Promise<{ runs: RunRecord[] }> {
    return this.get("/runs");
  }

  diagnosticKinds(): Promise<{ kinds: string[] }> {
    return this.get("/diagnostics");
  }

  projectClass(className: string, version: number) {
    return this.post<{ version: number; warehouse: WarehouseDef }>(
      "/warehouse/project", { class: className, version });
  }

  setSelection(className: string, predicate: string, version: number) {
    return this.post<{ version: number; warehouse: WarehouseDef }>(
      "/warehouse/selection", { class: className, predicate, version });
  }

  historize(body: { level: "attribute" | "class"; class: string; attribute?: string }, version: number) {
    return this.post<{ version: number; warehouse: WarehouseDef }>(
      "/warehouse/historize", { ...body, version });
  }

  createEnvironment(name: string, classes: string[], links: string[], version: number) {
    return this.post<{ version: number; warehouse: WarehouseDef }>(
      "/warehouse/environments", { name, classes, links, version });
  }

  projectFact(mart: string, className: string, factName: string, force: boolean, version: number) {
    return this.post<{ version: number; mart: MartDef; diagnostics: string[] }>(
      `/marts/${encodeURIComponent(mart)}/fact`,
      { class: className, fact_name: factName, force, version });
  }

  projectDimension(mart: string, body: Record<string, unknown>, version: number) {
    return this.post<{ version: number; mart: MartDef }>(
      `/marts/${encodeURIComponent(mart)}/dimensions`, { ...body, version });
  }

  hierarchy(mart: string, body: Record<string, unknown>, version: number) {
    return this.post<{ version: number; mart: MartDef }>(
      `/marts/${encodeURIComponent(mart)}/hierarchy`, { ...body, version });
  }

  addMeasure(mart: string, name: string, formula: string, version: number, dimension?: string) {
    return this.post<{ version: number; mart: MartDef }>(
      `/marts/${encodeURIComponent(mart)}/measures`,
      dimension ? { name, formula, dimension, version } : { name, formula, version });
  }

  selectObjects(mart: string, target: string, predicate: string, version: number) {
    return this.post<{ version: number; mart: MartDef }>(
      `/marts/${encodeURIComponent(mart)}/selection`, { target, predicate, version });
  }

  refresh(objects: unknown[], date: string) {
    return this.post<{ version: number; run: RunRecord }>(
      "/runs/refresh", { objects, date });
  }

  // Server-sent refresh progress, readable in browsers and in node.
  async *events(signal?: AbortSignal): AsyncGenerator<RefreshEvent> {
    const response = await fetch(this.base + "/events", { signal });
    if (!response.body) return;
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { value, done } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let index;
      while ((index = buffer.indexOf("\n\n")) >= 0) {
        const chunk = buffer.slice(0, index);
        buffer = buffer.slice(index + 2);
        for (const line of chunk.split("\n")) {
          if (line.startsWith("data: ")) {
            yield JSON.parse(line.slice(6)) as RefreshEvent;
          }
        }
      }
    }
  }
}
