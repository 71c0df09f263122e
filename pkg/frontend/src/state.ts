// Chat session state: transcript, in-flight guard, trace cache.
// Pure logic so the behavior is testable without a DOM; app.ts renders it.

import { ApiClient, ApiError, SessionConfig, TurnTrace } from "./api.js";

export type MessageStatus = "pending" | "ok" | "failed";

export interface ChatMessage {
  speaker: "user" | "bot";
  text: string;
  turn: number | null;
  status: MessageStatus;
}

export interface SendResult {
  ok: boolean;
  error?: string;
}

export class ChatStore {
  sessionId: string | null = null;
  transcript: ChatMessage[] = [];
  traces = new Map<number, TurnTrace>();
  selectedTurn: number | null = null;
  pending = false;
  lastError: string | null = null;
  onChange: () => void = () => {};

  constructor(private api: ApiClient) {}

  /** Messages confirmed by the server; mirrors GET /sessions/{id} history. */
  committedTranscript(): ChatMessage[] {
    return this.transcript.filter((m) => m.status === "ok");
  }

  async start(config?: SessionConfig): Promise<void> {
    const { id } = await this.api.createSession(config);
    this.sessionId = id;
    this.transcript = [];
    this.traces.clear();
    this.selectedTurn = null;
    this.pending = false;
    this.lastError = null;
    this.onChange();
  }

  async send(text: string): Promise<SendResult> {
    text = text.trim();
    if (!text) return { ok: false, error: "empty message" };
    if (!this.sessionId) return { ok: false, error: "no session" };
    if (this.pending) return { ok: false, error: "a message is already in flight" };

    this.pending = true;
    this.lastError = null;
    const mine: ChatMessage = { speaker: "user", text, turn: null, status: "pending" };
    this.transcript.push(mine);
    this.onChange();
    try {
      const { reply, turn } = await this.api.sendMessage(this.sessionId, text);
      mine.status = "ok";
      mine.turn = turn;
      this.transcript.push({ speaker: "bot", text: reply, turn, status: "ok" });
      await this.loadTrace(turn);
      this.selectedTurn = turn;
      return { ok: true };
    } catch (err) {
      // the server rejected or never saw the turn: keep nothing phantom,
      // mark the local message failed so the user can retry it
      mine.status = "failed";
      this.lastError = err instanceof ApiError ? `${err.status || "network"}: ${err.message}` : String(err);
      return { ok: false, error: this.lastError };
    } finally {
      this.pending = false;
      this.onChange();
    }
  }

  /** Re-send the text of the most recent failed message and drop its tombstone. */
  async retryLastFailed(): Promise<SendResult> {
    const idx = this.transcript.map((m) => m.status).lastIndexOf("failed");
    if (idx < 0) return { ok: false, error: "nothing to retry" };
    const [failed] = this.transcript.splice(idx, 1);
    this.onChange();
    return this.send(failed.text);
  }

  async loadTrace(turn: number): Promise<TurnTrace | null> {
    if (!this.sessionId) return null;
    if (!this.traces.has(turn)) {
      this.traces.set(turn, await this.api.getTrace(this.sessionId, turn));
    }
    return this.traces.get(turn) ?? null;
  }

  async selectTurn(turn: number): Promise<void> {
    await this.loadTrace(turn);
    this.selectedTurn = turn;
    this.onChange();
  }

  selectedTrace(): TurnTrace | null {
    return this.selectedTurn === null ? null : this.traces.get(this.selectedTurn) ?? null;
  }
}

/** Fixed 3-decimal rendering for every score shown in the UI. */
export function formatScore(value: number): string {
  return value.toFixed(3);
}
