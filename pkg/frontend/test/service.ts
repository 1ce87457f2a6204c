/** Spawn one real chainstory service for the whole vitest run. */

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import net from "node:net";

const here = dirname(fileURLToPath(import.meta.url));

export interface RunningService {
  url: string;
  stop: () => void;
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = net.createServer();
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address && typeof address === "object") {
        const port = address.port;
        probe.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

export async function startService(): Promise<RunningService> {
  const dataDir = mkdtempSync(join(tmpdir(), "chainstory-web-test-"));
  const port = await freePort();
  const url = `http://127.0.0.1:${port}`;
  const python = process.env.PYTHON ?? "python3";
  const child: ChildProcess = spawn(
    python,
    ["-m", "chainstory.service", "--data-dir", dataDir, "--port", String(port)],
    { stdio: ["ignore", "pipe", "pipe"], cwd: join(here, "..", "..") },
  );
  let output = "";
  child.stdout?.on("data", (chunk) => (output += chunk));
  child.stderr?.on("data", (chunk) => (output += chunk));

  const deadline = Date.now() + 20_000;
  while (Date.now() < deadline) {
    if (child.exitCode !== null) {
      throw new Error(`service exited early:\n${output}`);
    }
    try {
      const response = await fetch(`${url}/`);
      if (response.ok) {
        return {
          url,
          stop: () => {
            child.kill("SIGKILL");
            rmSync(dataDir, { recursive: true, force: true });
          },
        };
      }
    } catch {
      await new Promise((r) => setTimeout(r, 100));
    }
  }
  child.kill("SIGKILL");
  throw new Error(`service did not come up:\n${output}`);
}
