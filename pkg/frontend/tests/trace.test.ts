import { describe, expect, it } from "vitest";

import { renderEmptyTrace, renderTrace } from "../src/trace.js";
import { makeTrace } from "./helpers.js";

describe("trace panel rendering", () => {
  it("shows recalled topics, scores, ranking, timings", () => {
    const trace = makeTrace(2);
    const el = renderTrace(document, trace);
    expect(el.dataset.turn).toBe("2");
    const chips = [...el.querySelectorAll(".chip")].map((c) => c.textContent);
    expect(chips).toEqual(["Golden Harbor", "Iron Meadow"]);
    expect(el.querySelector(".chip.best")?.textContent).toBe("Golden Harbor");
    const bars = el.querySelectorAll(".score-row");
    expect(bars).toHaveLength(3);
    expect(el.textContent).toContain("select: 1.5 ms");
  });

  it("renders every score with exactly the API value at 3 decimals", () => {
    const trace = makeTrace(0);
    const el = renderTrace(document, trace);
    for (const [name, score] of trace.topic_scores) {
      const node = el.querySelector(`.score-value[data-topic="${name}"]`);
      expect(node?.textContent).toBe(score.toFixed(3));
    }
    const rankedScores = [...el.querySelectorAll(".knowledge-score")].map((n) => n.textContent);
    expect(rankedScores).toEqual(trace.ranked.map((r) => (r.score as number).toFixed(3)));
  });

  it("highlights exactly the selected triples", () => {
    const trace = makeTrace(0, {
      selected: [
        { head: "Golden Harbor", relation: "genre", tail: "romance", score: 0.91234 },
        { head: "Golden Harbor", relation: "year", tail: "2001", score: 0.40567 },
        { head: "Golden Harbor", relation: "star", tail: "Mira Voss", score: 0.10001 },
      ],
    });
    const el = renderTrace(document, trace);
    expect(el.querySelectorAll('.knowledge-row[data-selected="true"]')).toHaveLength(3);
    const one = renderTrace(document, makeTrace(0));
    expect(one.querySelectorAll('.knowledge-row[data-selected="true"]')).toHaveLength(1);
  });

  it("renders the fallback badge only when the turn took a fallback path", () => {
    const normal = renderTrace(document, makeTrace(0));
    expect(normal.querySelector(".badge.fallback")).toBeNull();
    const fb = renderTrace(document, makeTrace(0, { fallback: "global-argmax" }));
    const badge = fb.querySelector(".badge.fallback") as HTMLElement;
    expect(badge).not.toBeNull();
    expect(badge.dataset.fallback).toBe("global-argmax");
    expect(badge.textContent).toContain("global-argmax");
  });

  it("empty state panel renders without a trace", () => {
    const el = renderEmptyTrace(document);
    expect(el.textContent).toContain("No trace yet");
  });
});
