// In-memory fake of the chat API for unit tests: same payload shapes as the
// real server (schemas/chat_api.json), deterministic replies and traces.

import { TurnTrace } from "../src/api.js";

export function makeTrace(turn: number, overrides: Partial<TurnTrace> = {}): TurnTrace {
  return {
    turn,
    user_text: `question ${turn}`,
    recalled_topics: ["Golden Harbor", "Iron Meadow"],
    topic_scores: [
      ["Golden Harbor", 2.71828],
      ["Iron Meadow", 1.41421],
      ["Silent Comet", -0.57721],
    ],
    best_topic: "Golden Harbor",
    n_candidates: 13,
    n_topic_candidates: 7,
    ranked: [
      { head: "Golden Harbor", relation: "genre", tail: "romance", score: 0.91234 },
      { head: "Golden Harbor", relation: "year", tail: "2001", score: 0.40567 },
      { head: "Golden Harbor", relation: "star", tail: "Mira Voss", score: 0.10001 },
    ],
    selected: [{ head: "Golden Harbor", relation: "genre", tail: "romance", score: 0.91234 }],
    generator_input: "[CLS] Golden Harbor genre romance [SEP] [speaker1] question",
    reply: `reply ${turn}`,
    fallback: null,
    timings_ms: { select: 1.5, rank: 0.7, generate: 12.25 },
    ...overrides,
  };
}

export interface FakeServer {
  fetch: (input: string, init?: RequestInit) => Promise<Response>;
  history: (id: string) => string[];
  sessions: Map<string, { history: string[]; traces: TurnTrace[] }>;
  failNext: { on: boolean };
}

export function makeFakeServer(): FakeServer {
  const sessions = new Map<string, { history: string[]; traces: TurnTrace[] }>();
  const failNext = { on: false };
  let counter = 0;

  function json(status: number, body: unknown): Response {
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  }

  async function fakeFetch(input: string, init?: RequestInit): Promise<Response> {
    const url = new URL(input);
    const parts = url.pathname.split("/").filter(Boolean);
    if (url.pathname === "/healthz") return json(200, { status: "ok", topics: 20 });
    if (url.pathname === "/sessions" && init?.method === "POST") {
      const id = `fake-${counter++}`;
      sessions.set(id, { history: [], traces: [] });
      return json(200, { id });
    }
    const session = sessions.get(parts[1]);
    if (!session) return json(404, { detail: "unknown session" });
    if (parts[2] === "messages" && init?.method === "POST") {
      if (failNext.on) {
        failNext.on = false;
        return json(500, { detail: "injected failure" });
      }
      const { text } = JSON.parse(String(init.body)) as { text: string };
      if (!text.trim()) return json(400, { detail: "[input] utterance must be non-empty" });
      const turn = session.traces.length;
      const trace = makeTrace(turn, { user_text: text, reply: `reply to: ${text}` });
      session.history.push(text, trace.reply);
      session.traces.push(trace);
      return json(200, { reply: trace.reply, turn });
    }
    if (parts[2] === "trace") {
      const turn = Number(parts[3]);
      const trace = session.traces[turn];
      return trace ? json(200, trace) : json(404, { detail: "unknown turn" });
    }
    if (parts.length === 2) {
      return json(200, {
        id: parts[1],
        history: session.history,
        turns: session.traces.length,
        memory_topics: ["Golden Harbor"],
      });
    }
    return json(404, { detail: "no such route" });
  }

  return { fetch: fakeFetch, history: (id) => sessions.get(id)?.history ?? [], sessions, failNext };
}
