// DOM wiring: transcript pane, composer, config controls, trace panel.

import { ApiClient, SessionConfig } from "./api.js";
import { ChatStore } from "./state.js";
import { renderEmptyTrace, renderTrace } from "./trace.js";

export interface AppHandles {
  store: ChatStore;
  sendFromInput: () => Promise<void>;
}

export function initApp(doc: Document, api: ApiClient): AppHandles {
  const store = new ChatStore(api);
  const messages = doc.getElementById("messages") as HTMLElement;
  const input = doc.getElementById("input") as HTMLTextAreaElement;
  const sendBtn = doc.getElementById("send") as HTMLButtonElement;
  const tracePanel = doc.getElementById("trace-panel") as HTMLElement;
  const statusDot = doc.getElementById("status") as HTMLElement;
  const algoSel = doc.getElementById("algo") as HTMLSelectElement;
  const kbSel = doc.getElementById("kb") as HTMLSelectElement;
  const newBtn = doc.getElementById("new-session") as HTMLButtonElement;
  const errorBar = doc.getElementById("error-bar") as HTMLElement;

  function render() {
    messages.replaceChildren();
    for (const msg of store.transcript) {
      const div = doc.createElement("div");
      div.className = `msg ${msg.speaker} ${msg.status}`;
      div.textContent = msg.text;
      if (msg.status === "failed") {
        const retry = doc.createElement("button");
        retry.className = "retry";
        retry.textContent = "retry";
        retry.onclick = () => void store.retryLastFailed();
        div.appendChild(retry);
      }
      if (msg.speaker === "bot" && msg.turn !== null) {
        div.classList.toggle("trace-selected", msg.turn === store.selectedTurn);
        div.onclick = () => void store.selectTurn(msg.turn as number);
        div.title = "click to inspect this turn";
      }
      messages.appendChild(div);
    }
    messages.scrollTop = messages.scrollHeight;

    const trace = store.selectedTrace();
    tracePanel.replaceChildren(trace ? renderTrace(doc, trace) : renderEmptyTrace(doc));
    sendBtn.disabled = store.pending || !store.sessionId;
    errorBar.textContent = store.lastError ?? "";
    errorBar.style.display = store.lastError ? "block" : "none";
  }
  store.onChange = render;

  async function startSession() {
    const config: SessionConfig = {
      recall_algo: algoSel.value as SessionConfig["recall_algo"],
      top_n_knowledge: Number(kbSel.value) as 1 | 3,
    };
    statusDot.className = "";
    try {
      await store.start(config);
      await api.health();
      statusDot.className = "connected";
    } catch (err) {
      store.lastError = `cannot reach server: ${String(err)}`;
    }
    render();
  }

  async function sendFromInput() {
    const text = input.value;
    input.value = "";
    await store.send(text);
  }

  sendBtn.onclick = () => void sendFromInput();
  input.onkeydown = (ev) => {
    if (ev.key === "Enter" && !ev.shiftKey) {
      ev.preventDefault();
      void sendFromInput();
    }
  };
  newBtn.onclick = () => void startSession();
  algoSel.onchange = () => void startSession();
  kbSel.onchange = () => void startSession();

  void startSession();
  return { store, sendFromInput };
}
