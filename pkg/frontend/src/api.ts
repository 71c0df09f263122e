// Typed client for the kgchat HTTP JSON API.
// The payload shapes are frozen in ../schemas/chat_api.json; keep both in sync.

export interface SessionCreated {
  id: string;
}

export interface MessageReply {
  reply: string;
  turn: number;
}

export interface SessionState {
  id: string;
  history: string[];
  turns: number;
  memory_topics: string[];
}

export interface ScoredTriple {
  head: string;
  relation: string;
  tail: string;
  score?: number;
}

export interface TurnTrace {
  turn: number;
  user_text: string;
  recalled_topics: string[];
  topic_scores: [string, number][];
  best_topic: string | null;
  n_candidates: number;
  n_topic_candidates: number;
  ranked: ScoredTriple[];
  selected: ScoredTriple[];
  generator_input: string;
  reply: string;
  fallback: string | null;
  timings_ms: Record<string, number>;
}

export interface SessionConfig {
  recall_algo?: "tfidf" | "lexical" | "ac";
  top_n_knowledge?: 1 | 3;
  n_recall?: number;
  decode?: "greedy" | "beam";
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, `network error: ${String(err)}`);
    }
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = await res.json();
        if (body && body.detail) detail = JSON.stringify(body.detail);
      } catch {
        // keep statusText
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  health(): Promise<{ status: string; topics: number }> {
    return this.request("/healthz");
  }

  createSession(config?: SessionConfig): Promise<SessionCreated> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(config ? { config } : {}),
    });
  }

  sendMessage(sessionId: string, text: string): Promise<MessageReply> {
    return this.request(`/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  getSession(sessionId: string): Promise<SessionState> {
    return this.request(`/sessions/${sessionId}`);
  }

  getTrace(sessionId: string, turn: number): Promise<TurnTrace> {
    return this.request(`/sessions/${sessionId}/trace/${turn}`);
  }
}
