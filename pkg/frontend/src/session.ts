/**
 * Client session: the worker identity plus its bearer token.
 *
 * The token lives in sessionStorage only (cleared with the tab) and is
 * deliberately excluded from the serialized debug representation so it
 * cannot end up in logs.
 */

import { ChainStoryApi } from "./api.js";

const STORAGE_KEY = "chainstory.session";

export interface SessionData {
  workerId: string;
  displayName: string;
  token: string;
}

export class ClientSession {
  private data: SessionData | null = null;

  constructor(
    readonly api: ChainStoryApi,
    private storage: Storage | null = defaultStorage(),
  ) {
    const raw = this.storage?.getItem(STORAGE_KEY);
    if (raw) {
      try {
        this.data = JSON.parse(raw) as SessionData;
        this.api.setToken(this.data.token);
      } catch {
        this.storage?.removeItem(STORAGE_KEY);
      }
    }
  }

  get active(): boolean {
    return this.data !== null;
  }

  get workerId(): string | null {
    return this.data?.workerId ?? null;
  }

  get displayName(): string | null {
    return this.data?.displayName ?? null;
  }

  async register(displayName: string): Promise<void> {
    const registered = await this.api.registerWorker(displayName);
    this.data = {
      workerId: registered.worker_id,
      displayName: registered.display_name,
      token: registered.token,
    };
    this.api.setToken(registered.token);
    this.storage?.setItem(STORAGE_KEY, JSON.stringify(this.data));
  }

  /** Debug/display form; never includes the token. */
  toString(): string {
    return this.data
      ? `session(${this.data.workerId}, ${this.data.displayName})`
      : "session(none)";
  }
}

function defaultStorage(): Storage | null {
  try {
    return typeof sessionStorage !== "undefined" ? sessionStorage : null;
  } catch {
    return null;
  }
}
