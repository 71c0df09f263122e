// End-to-end test against the live pipeline server (demo models).
// Gated behind KGCHAT_E2E=1 because it spawns the Python service:
//   KGCHAT_E2E=1 npx vitest run tests/e2e.test.ts

import { ChildProcess, spawn } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatStore } from "../src/state.js";
import { renderTrace } from "../src/trace.js";

const PORT = 8731;
const BASE = `http://127.0.0.1:${PORT}`;
const enabled = process.env.KGCHAT_E2E === "1";

let server: ChildProcess | null = null;

async function waitForHealth(timeoutMs = 110_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${BASE}/healthz`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 500));
  }
  throw new Error("chat-server did not become healthy in time");
}

describe.runIf(enabled)("live server session", () => {
  beforeAll(async () => {
    server = spawn("chat-server", ["--demo", "--port", String(PORT)], {
      stdio: ["ignore", "inherit", "inherit"],
    });
    await waitForHealth();
  });

  afterAll(() => {
    server?.kill("SIGTERM");
  });

  it("three scripted messages keep transcript identical to server state", async () => {
    const api = new ApiClient(BASE);
    const store = new ChatStore(api);
    await store.start({ recall_algo: "lexical", top_n_knowledge: 1 });

    const script = [
      "What is the genre of Golden Harbor ?",
      "Who is the director of Golden Harbor ?",
      "Which year did Iron Meadow come out ?",
    ];
    for (const text of script) {
      const res = await store.send(text);
      expect(res.ok).toBe(true);
    }

    const state = await api.getSession(store.sessionId as string);
    expect(state.turns).toBe(3);
    expect(store.committedTranscript().map((m) => m.text)).toEqual(state.history);

    // trace panel values equal API values to 3 decimals
    for (let turn = 0; turn < 3; turn++) {
      const trace = await api.getTrace(store.sessionId as string, turn);
      const panel = renderTrace(document, trace);
      for (const [name, score] of trace.topic_scores) {
        const node = panel.querySelector(`.score-value[data-topic="${name}"]`);
        expect(node?.textContent).toBe(score.toFixed(3));
      }
      const rendered = [...panel.querySelectorAll(".knowledge-score")].map((n) => n.textContent);
      expect(rendered).toEqual(trace.ranked.map((r) => (r.score as number).toFixed(3)));
      expect(panel.querySelectorAll('.knowledge-row[data-selected="true"]').length).toBe(
        trace.selected.length,
      );
    }
  });

  it("failed request leaves no phantom messages", async () => {
    const api = new ApiClient(BASE);
    const store = new ChatStore(api);
    await store.start();
    await store.send("What is the rating of Up ?");
    const goodSession = store.sessionId as string;

    // point the store at a dead session: the POST 404s, nothing may leak
    store.sessionId = "deadbeef";
    const res = await store.send("this turn must fail");
    expect(res.ok).toBe(false);
    expect(store.transcript.filter((m) => m.status === "failed")).toHaveLength(1);

    store.sessionId = goodSession;
    const state = await api.getSession(goodSession);
    expect(state.history).toHaveLength(2);
    expect(store.committedTranscript().map((m) => m.text)).toEqual(state.history);
  });
});

describe.runIf(!enabled)("live server session (skipped)", () => {
  it.skip("set KGCHAT_E2E=1 to run against the live service", () => {});
});
