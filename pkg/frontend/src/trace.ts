// Trace panel rendering: why the last reply was produced.
// Pure (document, trace) -> element so tests can inspect the DOM directly.

import { ScoredTriple, TurnTrace } from "./api.js";
import { formatScore } from "./state.js";

function el(doc: Document, tag: string, className?: string, text?: string): HTMLElement {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function tripleText(t: ScoredTriple): string {
  return `${t.head} ${t.relation} ${t.tail}`;
}

function section(doc: Document, title: string): HTMLElement {
  const box = el(doc, "section", "trace-section");
  box.appendChild(el(doc, "h3", "", title));
  return box;
}

export function renderEmptyTrace(doc: Document): HTMLElement {
  const root = el(doc, "div", "trace empty");
  root.appendChild(el(doc, "p", "trace-empty", "No trace yet. Send a message to inspect the pipeline."));
  return root;
}

export function renderTrace(doc: Document, trace: TurnTrace): HTMLElement {
  const root = el(doc, "div", "trace");
  root.dataset.turn = String(trace.turn);

  const head = section(doc, `Turn ${trace.turn}`);
  head.appendChild(el(doc, "p", "trace-user", trace.user_text));
  if (trace.fallback) {
    const badge = el(doc, "span", "badge fallback", `fallback: ${trace.fallback}`);
    badge.dataset.fallback = trace.fallback;
    head.appendChild(badge);
  }
  root.appendChild(head);

  const recalled = section(doc, `Recalled topics (${trace.recalled_topics.length})`);
  const chips = el(doc, "div", "chips");
  for (const name of trace.recalled_topics) {
    const chip = el(doc, "span", "chip" + (name === trace.best_topic ? " best" : ""), name);
    chips.appendChild(chip);
  }
  recalled.appendChild(chips);
  root.appendChild(recalled);

  const scores = section(doc, "Topic scores (top 10)");
  const maxAbs = Math.max(...trace.topic_scores.map(([, s]) => Math.abs(s)), 1e-9);
  for (const [name, score] of trace.topic_scores) {
    const row = el(doc, "div", "score-row" + (name === trace.best_topic ? " best" : ""));
    row.appendChild(el(doc, "span", "score-name", name));
    const bar = el(doc, "div", "score-bar");
    const fill = el(doc, "div", "score-fill");
    fill.style.width = `${Math.round((Math.abs(score) / maxAbs) * 100)}%`;
    bar.appendChild(fill);
    row.appendChild(bar);
    const num = el(doc, "span", "score-value", formatScore(score));
    num.dataset.topic = name;
    row.appendChild(num);
    scores.appendChild(row);
  }
  root.appendChild(scores);

  const ranked = section(
    doc,
    `Ranked knowledge (${trace.n_topic_candidates} of ${trace.n_candidates} candidates)`,
  );
  const selectedKeys = new Set(trace.selected.map(tripleText));
  for (const item of trace.ranked) {
    const row = el(doc, "div", "knowledge-row");
    if (selectedKeys.has(tripleText(item))) {
      row.classList.add("selected");
      row.dataset.selected = "true";
    }
    row.appendChild(el(doc, "span", "knowledge-text", tripleText(item)));
    const score = el(doc, "span", "knowledge-score", item.score === undefined ? "" : formatScore(item.score));
    row.appendChild(score);
    ranked.appendChild(row);
  }
  root.appendChild(ranked);

  const timings = section(doc, "Stage timings");
  for (const [stage, ms] of Object.entries(trace.timings_ms)) {
    timings.appendChild(el(doc, "div", "timing", `${stage}: ${ms.toFixed(1)} ms`));
  }
  root.appendChild(timings);

  const gen = section(doc, "Generator input");
  gen.appendChild(el(doc, "pre", "gen-input", trace.generator_input));
  root.appendChild(gen);
  return root;
}
