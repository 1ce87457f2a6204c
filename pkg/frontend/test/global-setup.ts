import type { TestProject } from "vitest/node";

import { startService, RunningService } from "./service.js";

let running: RunningService | null = null;

declare module "vitest" {
  export interface ProvidedContext {
    serviceUrl: string;
  }
}

export default async function setup(project: TestProject): Promise<() => void> {
  running = await startService();
  project.provide("serviceUrl", running.url);
  return () => {
    running?.stop();
  };
}
