// Spawns the live busnet service once for the whole test run.

import { spawn, type ChildProcess } from "node:child_process";
import { fileURLToPath } from "node:url";
import type { TestProject } from "vitest/node";

declare module "vitest" {
  interface ProvidedContext {
    baseUrl: string;
  }
}

let child: ChildProcess | null = null;

export default async function setup(project: TestProject): Promise<() => void> {
  const script = fileURLToPath(new URL("./serve_fixture.py", import.meta.url));
  child = spawn("python3", [script], { stdio: ["ignore", "pipe", "inherit"] });

  const port = await new Promise<string>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("service did not start in time")), 60_000);
    let buffer = "";
    child!.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/READY (\d+)/);
      if (match) {
        clearTimeout(timer);
        resolve(match[1]);
      }
      if (buffer.includes("FAILED")) {
        clearTimeout(timer);
        reject(new Error("service failed to start"));
      }
    });
    child!.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`service exited early with code ${code}`));
    });
  });

  project.provide("baseUrl", `http://127.0.0.1:${port}`);
  return () => {
    child?.kill("SIGTERM");
  };
}
