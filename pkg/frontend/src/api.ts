/**
 * Typed client for the chainstory HTTP API.
 *
 * Every request goes through one `request()` door and is recorded in the
 * audit trail, so tests can prove the UI only ever talks to documented
 * endpoints (and never issues a deleting method). The bearer token is
 * attached here and nowhere else; it is never logged.
 */

export interface WorkerRegistration {
  worker_id: string;
  display_name: string;
  registered_at: string;
  token: string;
}

export interface ImageRecord {
  image_id: string;
  description: string;
  uploader: string;
  uploaded_at: string;
  origin: "base_pool" | "worker_upload";
}

export interface Provenance {
  kind: "fresh" | "branch" | "merge";
  parent?: string;
  prefix_len?: number;
  first?: string;
  second?: string;
}

export interface Chain {
  chain_id: string;
  sequence: string[];
  length: number;
  creator: string;
  contributors: string[];
  implicit_votes: number;
  created_at: string;
  provenance: Provenance;
  score?: number;
}

export interface ChainOutcome {
  outcome: "created" | "duplicate_voted";
  chain: Chain;
}

export interface Story {
  story_id: string;
  chain_id: string;
  author: string;
  version: number;
  body: string;
  derived_from: string | null;
  created_at: string;
  votes: number;
}

export interface VoteResult {
  vote: {
    voter: string;
    chain_id: string;
    story_id: string;
    cast_at: string;
    superseded: boolean;
  };
  tally: number;
}

export interface RecommendationItem {
  chain: Chain;
  top_story?: Story | null;
}

export interface Recommendations {
  mode: "top" | "sampled";
  seed?: number;
  items: RecommendationItem[];
}

export interface LeaderboardEntry {
  worker: string;
  display_name: string;
  score: number;
  rank: number;
}

export interface Page<T> {
  total: number;
  items: T[];
}

export interface AuditEntry {
  method: "GET" | "POST";
  path: string;
}

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

export class ChainStoryApi {
  /** Every request the client has issued, in order. */
  readonly audit: AuditEntry[] = [];

  constructor(
    readonly baseUrl: string,
    private token: string | null = null,
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private async request<T>(
    method: "GET" | "POST",
    path: string,
    body?: BodyInit | object,
  ): Promise<T> {
    this.audit.push({ method, path });
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    let payload: BodyInit | undefined;
    if (body instanceof FormData) {
      payload = body;
    } else if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      payload = JSON.stringify(body);
    }
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: payload,
    });
    if (!response.ok) {
      let code = "HttpError";
      let message = `${response.status}`;
      try {
        const data = (await response.json()) as {
          error?: { code?: string; message?: string };
        };
        code = data.error?.code ?? code;
        message = data.error?.message ?? message;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(code, message, response.status);
    }
    return (await response.json()) as T;
  }

  // workers ------------------------------------------------------------

  registerWorker(displayName: string): Promise<WorkerRegistration> {
    return this.request("POST", "/workers", { display_name: displayName });
  }

  // images -------------------------------------------------------------

  uploadImage(blob: File | Blob, description: string): Promise<ImageRecord> {
    const form = new FormData();
    form.append("blob", blob);
    form.append("description", description);
    return this.request("POST", "/images", form);
  }

  listImages(offset = 0, limit = 200): Promise<Page<ImageRecord>> {
    return this.request("GET", `/images?offset=${offset}&limit=${limit}`);
  }

  blobUrl(imageId: string): string {
    return `${this.baseUrl}/images/${imageId}/blob`;
  }

  // chains -------------------------------------------------------------

  startChain(baseImageId: string): Promise<ChainOutcome> {
    return this.request("POST", "/chains", { base_image_id: baseImageId });
  }

  extendChain(chainId: string, appended: string[]): Promise<ChainOutcome> {
    return this.request("POST", `/chains/${chainId}/extend`, { appended });
  }

  branchChain(
    chainId: string,
    prefixLen: number,
    appended: string[],
  ): Promise<ChainOutcome> {
    return this.request("POST", `/chains/${chainId}/branch`, {
      prefix_len: prefixLen,
      appended,
    });
  }

  mergeChains(first: string, second: string): Promise<ChainOutcome> {
    return this.request("POST", "/chains/merge", { first, second });
  }

  listChains(offset = 0, limit = 200): Promise<Page<Chain>> {
    return this.request("GET", `/chains?offset=${offset}&limit=${limit}`);
  }

  getChain(chainId: string): Promise<Chain> {
    return this.request("GET", `/chains/${chainId}`);
  }

  // stories ------------------------------------------------------------

  submitStory(
    chainId: string,
    body: string,
    derivedFrom?: string,
  ): Promise<Story> {
    const payload: { body: string; derived_from?: string } = { body };
    if (derivedFrom) payload.derived_from = derivedFrom;
    return this.request("POST", `/chains/${chainId}/stories`, payload);
  }

  listStories(
    chainId: string,
    ordering: "by_time_asc" | "by_votes_desc" = "by_time_asc",
  ): Promise<Page<Story>> {
    return this.request(
      "GET",
      `/chains/${chainId}/stories?ordering=${ordering}&limit=200`,
    );
  }

  // votes, recommendations, leaderboard ---------------------------------

  voteStory(storyId: string): Promise<VoteResult> {
    return this.request("POST", `/stories/${storyId}/vote`);
  }

  recommendations(
    mode: "top" | "sampled",
    k: number,
    seed?: number,
  ): Promise<Recommendations> {
    const seedPart = seed === undefined ? "" : `&seed=${seed}`;
    return this.request("GET", `/recommendations?mode=${mode}&k=${k}${seedPart}`);
  }

  leaderboard(k = 10): Promise<{ entries: LeaderboardEntry[] }> {
    return this.request("GET", `/leaderboard?k=${k}`);
  }
}
