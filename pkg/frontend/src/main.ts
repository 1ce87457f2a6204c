/**
 * Entry point: resolve the API base URL, restore the session, boot the app.
 *
 * Base URL resolution: `?api=` query parameter first (for development
 * against a separately running service), otherwise the page's own origin
 * (the service can serve this client at /ui).
 */

import { ChainStoryApi } from "./api.js";
import { createApp } from "./app.js";
import { ClientSession } from "./session.js";

function apiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  if (fromQuery) return fromQuery.replace(/\/$/, "");
  return window.location.origin;
}

document.addEventListener("DOMContentLoaded", () => {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const api = new ChainStoryApi(apiBase());
  const session = new ClientSession(api);
  const app = createApp(root, api, session);
  void app.refresh();
});
