/**
 * The chainstory client app: plain DOM, one-way render from fetched state.
 *
 * Every worker action (upload, start/extend/branch/merge, write, vote) is
 * a documented POST followed by an optimistic full refresh; there is no
 * client-side cache to rot and no way to delete or overwrite anything,
 * because no such endpoint exists or is called. Errors surface in the
 * notice bar and never wipe entered text.
 */

import {
  ApiError,
  Chain,
  ChainOutcome,
  ChainStoryApi,
  ImageRecord,
  LeaderboardEntry,
  Recommendations,
  Story,
} from "./api.js";
import { clear, el } from "./dom.js";
import { ClientSession } from "./session.js";

const DUPLICATE_NOTICE = "merged into existing chain, vote counted";

interface AppState {
  images: ImageRecord[];
  chains: Chain[];
  selectedChainId: string | null;
  stories: Story[];
  recommendations: Recommendations | null;
  leaderboard: LeaderboardEntry[];
  notice: string;
  selection: string[]; // ordered image ids picked in the pool
}

export class App {
  readonly state: AppState = {
    images: [],
    chains: [],
    selectedChainId: null,
    stories: [],
    recommendations: null,
    leaderboard: [],
    notice: "",
    selection: [],
  };

  private inFlight = 0;
  private waiters: Array<() => void> = [];

  constructor(
    readonly root: HTMLElement,
    readonly api: ChainStoryApi,
    readonly session: ClientSession,
  ) {}

  /** Resolves once every tracked async action has finished. */
  settle(): Promise<void> {
    if (this.inFlight === 0) return Promise.resolve();
    return new Promise((resolve) => this.waiters.push(resolve));
  }

  private track(work: Promise<unknown>): void {
    this.inFlight += 1;
    work
      .catch((error: unknown) => {
        this.state.notice =
          error instanceof ApiError
            ? `error [${error.code}]: ${error.message}`
            : `error: ${String(error)}`;
        this.render();
      })
      .finally(() => {
        this.inFlight -= 1;
        if (this.inFlight === 0) {
          for (const wake of this.waiters.splice(0)) wake();
        }
      });
  }

  // ------------------------------------------------------------------
  // data loading

  async refresh(): Promise<void> {
    const [images, chains, recommendations, leaderboard] = await Promise.all([
      this.api.listImages(),
      this.api.listChains(),
      this.api.recommendations("top", 5),
      this.api.leaderboard(10),
    ]);
    this.state.images = images.items;
    this.state.chains = chains.items;
    this.state.recommendations = recommendations;
    this.state.leaderboard = leaderboard.entries;
    if (
      this.state.selectedChainId &&
      !chains.items.some((c) => c.chain_id === this.state.selectedChainId)
    ) {
      this.state.selectedChainId = null;
    }
    if (this.state.selectedChainId) {
      const stories = await this.api.listStories(this.state.selectedChainId);
      this.state.stories = stories.items;
    } else {
      this.state.stories = [];
    }
    this.render();
  }

  private afterOutcome(outcome: ChainOutcome): Promise<void> {
    this.state.notice =
      outcome.outcome === "duplicate_voted"
        ? DUPLICATE_NOTICE
        : "new chain created";
    this.state.selectedChainId = outcome.chain.chain_id;
    this.state.selection = [];
    return this.refresh();
  }

  // ------------------------------------------------------------------
  // worker actions (each settles one documented POST, then refreshes)

  register(displayName: string): void {
    this.track(this.session.register(displayName).then(() => this.refresh()));
  }

  upload(file: File | Blob, description: string): void {
    this.track(
      this.api.uploadImage(file, description).then(async (record) => {
        this.state.notice = `image ${record.image_id.slice(0, 10)} in the pool`;
        await this.refresh();
      }),
    );
  }

  toggleSelect(imageId: string): void {
    const at = this.state.selection.indexOf(imageId);
    if (at >= 0) this.state.selection.splice(at, 1);
    else this.state.selection.push(imageId);
    this.render();
  }

  startChain(): void {
    const base = this.state.selection[0];
    if (!base) {
      this.state.notice = "select an image to start from";
      this.render();
      return;
    }
    this.track(this.api.startChain(base).then((o) => this.afterOutcome(o)));
  }

  /** Branch affordance at any prefix position; the full-length position is
   * a plain extension of the whole chain. */
  growFrom(chainId: string, prefixLen: number): void {
    const appended = [...this.state.selection];
    if (appended.length === 0) {
      this.state.notice = "select images to append first";
      this.render();
      return;
    }
    const chain = this.state.chains.find((c) => c.chain_id === chainId);
    const call =
      chain && prefixLen === chain.length
        ? this.api.extendChain(chainId, appended)
        : this.api.branchChain(chainId, prefixLen, appended);
    this.track(call.then((o) => this.afterOutcome(o)));
  }

  merge(firstId: string, secondId: string): void {
    this.track(
      this.api.mergeChains(firstId, secondId).then((o) => this.afterOutcome(o)),
    );
  }

  selectChain(chainId: string): void {
    this.state.selectedChainId = chainId;
    this.track(this.refresh());
  }

  submitStory(body: string, derivedFrom?: string): void {
    if (!this.state.selectedChainId) {
      this.state.notice = "select a chain to write for";
      this.render();
      return;
    }
    if (!body.trim()) {
      // blocked client-side: no request leaves the browser
      this.state.notice = "a story needs words before it can be submitted";
      this.render();
      return;
    }
    const chainId = this.state.selectedChainId;
    this.track(
      this.api.submitStory(chainId, body, derivedFrom).then(async (story) => {
        this.state.notice = `stored version ${story.version}`;
        await this.refresh();
      }),
    );
  }

  vote(storyId: string): void {
    this.track(
      this.api.voteStory(storyId).then(async (result) => {
        this.state.notice = `vote counted (tally ${result.tally})`;
        await this.refresh();
      }),
    );
  }

  shuffle(): void {
    const seed = Math.floor(Math.random() * 2 ** 31);
    this.track(
      this.api.recommendations("sampled", 5, seed).then((recs) => {
        this.state.recommendations = recs;
        this.render();
      }),
    );
  }

  showTop(): void {
    this.track(
      this.api.recommendations("top", 5).then((recs) => {
        this.state.recommendations = recs;
        this.render();
      }),
    );
  }

  // ------------------------------------------------------------------
  // rendering

  render(): void {
    clear(this.root);
    this.root.append(
      this.renderSessionBar(),
      this.renderNotice(),
      el(
        "div",
        { className: "columns" },
        this.renderPool(),
        this.renderChains(),
        this.renderStories(),
        el(
          "div",
          { className: "side" },
          this.renderRecommendations(),
          this.renderLeaderboard(),
        ),
      ),
    );
  }

  private renderSessionBar(): HTMLElement {
    if (this.session.active) {
      return el(
        "header",
        { className: "session-bar" },
        el("strong", {}, "chainstory"),
        el(
          "span",
          { className: "who" },
          ` writing as ${this.session.displayName} (${this.session.workerId})`,
        ),
      );
    }
    const name = el("input", {
      id: "register-name",
      placeholder: "your name",
    });
    const button = el("button", { id: "register-btn" }, "join");
    button.addEventListener("click", () => {
      if (name.value.trim()) this.register(name.value.trim());
    });
    return el(
      "header",
      { className: "session-bar" },
      el("strong", {}, "chainstory "),
      name,
      button,
    );
  }

  private renderNotice(): HTMLElement {
    return el("div", { className: "notice" }, this.state.notice);
  }

  private renderPool(): HTMLElement {
    const file = el("input", { id: "upload-file", type: "file" });
    const description = el("input", {
      id: "upload-desc",
      placeholder: "describe the image",
    });
    const uploadButton = el("button", { id: "upload-btn" }, "upload");
    uploadButton.addEventListener("click", () => {
      const chosen = file.files?.[0];
      if (!chosen) {
        this.state.notice = "choose a file first";
        this.render();
        return;
      }
      if (!description.value.trim()) {
        this.state.notice = "an image needs a description";
        this.render();
        return;
      }
      this.upload(chosen, description.value.trim());
    });

    const grid = el("div", { className: "pool-grid" });
    for (const image of this.state.images) {
      const picked = this.state.selection.indexOf(image.image_id);
      const card = el(
        "figure",
        {
          className: picked >= 0 ? "pool-image selected" : "pool-image",
          dataset: { imageId: image.image_id },
          title: image.description,
        },
        el("img", {
          src: this.api.blobUrl(image.image_id),
          alt: image.description,
        }),
        el(
          "figcaption",
          {},
          picked >= 0 ? `#${picked + 1} ${image.description}` : image.description,
        ),
      );
      card.addEventListener("click", () => this.toggleSelect(image.image_id));
      grid.append(card);
    }

    const start = el("button", { id: "start-chain-btn" }, "start chain from first pick");
    start.addEventListener("click", () => this.startChain());

    return el(
      "section",
      { className: "pool-panel" },
      el("h2", {}, `image pool (${this.state.images.length})`),
      el("div", { className: "upload-form" }, file, description, uploadButton),
      grid,
      start,
    );
  }

  private renderChains(): HTMLElement {
    const panel = el(
      "section",
      { className: "chains-panel" },
      el("h2", {}, `image chains (${this.state.chains.length})`),
    );
    for (const chain of this.state.chains) {
      panel.append(this.renderChainCard(chain));
    }
    return panel;
  }

  private renderChainCard(chain: Chain): HTMLElement {
    const strip = el("div", { className: "chain-strip" });
    chain.sequence.forEach((imageId, position) => {
      const image = this.state.images.find((i) => i.image_id === imageId);
      const grow = el(
        "button",
        {
          className: "grow-btn",
          dataset: { prefix: String(position + 1), chainId: chain.chain_id },
          title:
            position + 1 === chain.length
              ? "extend the whole chain with the picked images"
              : `branch from the first ${position + 1} image(s)`,
        },
        position + 1 === chain.length ? "extend" : "branch here",
      );
      grow.addEventListener("click", () =>
        this.growFrom(chain.chain_id, position + 1),
      );
      strip.append(
        el(
          "figure",
          {
            className: "strip-image",
            dataset: { imageId, position: String(position) },
          },
          el("img", {
            src: this.api.blobUrl(imageId),
            alt: image?.description ?? imageId,
          }),
          grow,
        ),
      );
    });

    const mergeTargets = this.state.chains.filter(
      (c) => c.chain_id !== chain.chain_id,
    );
    const mergeSelect = el("select", { className: "merge-select" });
    for (const target of mergeTargets) {
      mergeSelect.append(
        el(
          "option",
          { value: target.chain_id },
          `${target.chain_id.slice(0, 8)} (${target.length} images)`,
        ),
      );
    }
    const mergeButton = el("button", { className: "merge-btn" }, "merge into this");
    mergeButton.addEventListener("click", () => {
      if (mergeSelect.value) this.merge(chain.chain_id, mergeSelect.value);
    });

    const open = el("button", { className: "open-btn" }, "stories");
    open.addEventListener("click", () => this.selectChain(chain.chain_id));

    const card = el(
      "article",
      {
        className:
          chain.chain_id === this.state.selectedChainId
            ? "chain-card selected"
            : "chain-card",
        dataset: { chainId: chain.chain_id },
      },
      el(
        "div",
        { className: "chain-head" },
        el("code", {}, chain.chain_id.slice(0, 10)),
        el(
          "span",
          { className: "chain-votes" },
          ` votes ${chain.implicit_votes}`,
        ),
        open,
      ),
      strip,
      mergeTargets.length
        ? el("div", { className: "merge-row" }, mergeSelect, mergeButton)
        : null,
    );
    return card;
  }

  private renderStories(): HTMLElement {
    const panel = el("section", { className: "stories-panel" });
    if (!this.state.selectedChainId) {
      panel.append(
        el("h2", {}, "stories"),
        el("p", {}, "open a chain to read and write its stories"),
      );
      return panel;
    }
    panel.append(el("h2", {}, "stories for this chain"));

    const versions = el("div", { className: "story-versions" });
    for (const story of this.state.stories) {
      const voteButton = el("button", { className: "vote-btn" }, "vote");
      voteButton.addEventListener("click", () => this.vote(story.story_id));
      versions.append(
        el(
          "article",
          { className: "story-card", dataset: { storyId: story.story_id } },
          el(
            "div",
            { className: "story-meta" },
            el("span", { className: "story-author" }, story.author),
            el("span", { className: "story-version" }, ` v${story.version}`),
            el("span", { className: "story-votes" }, ` ${story.votes} votes`),
            story.derived_from
              ? el(
                  "span",
                  { className: "story-derived" },
                  ` from ${story.derived_from}`,
                )
              : null,
            voteButton,
          ),
          el("p", { className: "story-body" }, story.body),
        ),
      );
    }

    const body = el("textarea", {
      id: "story-body",
      placeholder: "write this chain's story (all earlier versions stay)",
    });
    const derive = el("select", { id: "derive-from" });
    derive.append(el("option", { value: "" }, "fresh telling"));
    for (const story of this.state.stories) {
      derive.append(
        el(
          "option",
          { value: story.story_id },
          `build on ${story.story_id} (${story.author} v${story.version})`,
        ),
      );
    }
    const submit = el("button", { id: "submit-story-btn" }, "submit version");
    submit.addEventListener("click", () => {
      this.submitStory(body.value, derive.value || undefined);
    });

    panel.append(
      versions,
      el("div", { className: "editor" }, body, derive, submit),
    );
    return panel;
  }

  private renderRecommendations(): HTMLElement {
    const recs = this.state.recommendations;
    const shuffleButton = el("button", { id: "shuffle-btn" }, "shuffle");
    shuffleButton.addEventListener("click", () => this.shuffle());
    const topButton = el("button", { id: "top-btn" }, "top voted");
    topButton.addEventListener("click", () => this.showTop());

    const panel = el(
      "section",
      { className: "recs-panel" },
      el("h2", {}, `recommended (${recs?.mode ?? "top"})`),
      el("div", {}, topButton, shuffleButton),
    );
    for (const item of recs?.items ?? []) {
      const snippet = item.top_story
        ? `"${item.top_story.body.slice(0, 60)}" — ${item.top_story.author}`
        : "no story yet";
      const openButton = el("button", { className: "rec-open" }, "open");
      openButton.addEventListener("click", () =>
        this.selectChain(item.chain.chain_id),
      );
      panel.append(
        el(
          "div",
          { className: "rec-item", dataset: { chainId: item.chain.chain_id } },
          el("code", {}, item.chain.chain_id.slice(0, 10)),
          el("span", {}, ` ${item.chain.length} images `),
          el("em", {}, snippet),
          openButton,
        ),
      );
    }
    return panel;
  }

  private renderLeaderboard(): HTMLElement {
    const panel = el(
      "section",
      { className: "leaderboard" },
      el("h2", {}, "leaderboard"),
    );
    for (const entry of this.state.leaderboard) {
      panel.append(
        el(
          "div",
          { className: "lb-row", dataset: { worker: entry.worker } },
          el("span", { className: "lb-rank" }, `#${entry.rank} `),
          el("span", { className: "lb-name" }, entry.display_name),
          el("span", { className: "lb-score" }, ` ${entry.score}`),
        ),
      );
    }
    return panel;
  }
}

export function createApp(
  root: HTMLElement,
  api: ChainStoryApi,
  session: ClientSession,
): App {
  const app = new App(root, api, session);
  app.render();
  return app;
}
