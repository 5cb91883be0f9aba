// Spawns the engine service on a throwaway project for integration tests.

import { execFileSync, spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { INSURANCE_SCHEMA } from "./fixtures.js";

export interface RunningService {
  base: string;
  stop: () => void;
}

async function waitReady(base: string, child: ChildProcess): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt++) {
    if (child.exitCode !== null) {
      throw new Error(`service exited with ${child.exitCode}`);
    }
    try {
      const response = await fetch(base + "/diagnostics");
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error("service never became ready");
}

export async function startService(): Promise<RunningService> {
  const dir = mkdtempSync(join(tmpdir(), "dwstudio-"));
  const schemaPath = join(dir, "source.json");
  const projectPath = join(dir, "studio.dwproj");
  writeFileSync(schemaPath, JSON.stringify(INSURANCE_SCHEMA, null, 2));
  execFileSync("python3", ["-m", "dwengine.cli", "init",
    "--schema", schemaPath, "--project", projectPath]);
  const port = 21000 + Math.floor(Math.random() * 20000);
  const base = `http://127.0.0.1:${port}`;
  const child = spawn("python3", ["-m", "dwengine.cli", "serve",
    "--port", String(port), "--project", projectPath], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  await waitReady(base, child);
  return {
    base,
    stop: () => {
      child.kill();
    },
  };
}
