import { expect, inject, test } from "vitest";

import { ChainStoryApi } from "../src/api.js";
import { ClientSession } from "../src/session.js";

function fakeStorage(): Storage {
  const data = new Map<string, string>();
  return {
    get length() {
      return data.size;
    },
    clear: () => data.clear(),
    getItem: (key) => data.get(key) ?? null,
    key: (index) => [...data.keys()][index] ?? null,
    removeItem: (key) => void data.delete(key),
    setItem: (key, value) => void data.set(key, value),
  };
}

test("session keeps the token out of logs and restores from storage", async () => {
  const base = inject("serviceUrl");
  const storage = fakeStorage();
  const api = new ChainStoryApi(base);
  const session = new ClientSession(api, storage);
  await session.register("carol");

  expect(session.active).toBe(true);
  expect(session.workerId).toMatch(/^w\d+$/);
  expect(String(session)).not.toMatch(/[0-9a-f]{32}/); // no token in repr

  // a new session over the same storage picks the identity back up and
  // can immediately perform an authenticated mutation
  const api2 = new ChainStoryApi(base);
  const restored = new ClientSession(api2, storage);
  expect(restored.active).toBe(true);
  expect(restored.workerId).toBe(session.workerId);
  const uploaded = await api2.uploadImage(
    new File([new Uint8Array([42])], "s.png"),
    "restored session upload",
  );
  expect(uploaded.uploader).toBe(session.workerId);
});

test("unauthenticated api calls carry no authorization header", async () => {
  const base = inject("serviceUrl");
  const api = new ChainStoryApi(base);
  const page = await api.listImages();
  expect(page.total).toBeGreaterThanOrEqual(0);
  await expect(
    api.startChain("0".repeat(64)),
  ).rejects.toMatchObject({ code: "Unauthorized" });
});
