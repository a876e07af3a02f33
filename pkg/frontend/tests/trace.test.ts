import { describe, expect, it } from "vitest";

import { renderQueue, renderTraceSvg } from "../src/render.js";
import { toListItem } from "../src/state.js";
import { traceGeometry, traceWindow } from "../src/trace.js";
import type { AlarmRecord, TraceRow } from "../src/types.js";

function alarm(tauStart: number, tauEnd: number | null, detection = tauStart + 2): AlarmRecord {
  return {
    id: "s0-1",
    stream_id: "s0",
    tau_start: tauStart,
    detection_frame: detection,
    tau_end: tauEnd,
    peak_frame: detection,
    peak_statistic: 40,
    status: tauEnd === null ? "open" : "closed",
  };
}

function rampTrace(t0: number, t1: number): TraceRow[] {
  const rows: TraceRow[] = [];
  for (let t = t0; t <= t1; t++) rows.push([t, 1, Math.max(0, t - t0)]);
  return rows;
}

describe("trace windowing", () => {
  it("covers tau bounds plus margin", () => {
    const win = traceWindow(rampTrace(0, 200), alarm(100, 140), 20);
    expect(win.start).toBe(80);
    expect(win.end).toBe(160);
    expect(win.segmentStart).toBe(100);
    expect(win.segmentEnd).toBe(140);
    expect(win.rows.length).toBe(81);
  });

  it("clamps the margin at stream edges", () => {
    const win = traceWindow(rampTrace(95, 150), alarm(100, 140), 20);
    expect(win.start).toBe(95);
    expect(win.end).toBe(150);
  });

  it("handles an empty recorded trace", () => {
    const win = traceWindow([], alarm(5, 9), 10);
    expect(win.rows).toEqual([]);
    expect(win.segmentEnd).toBe(9);
  });

  it("shading matches the record bounds inside the window", () => {
    const win = traceWindow(rampTrace(0, 300), alarm(120, 180), 10, 25);
    const geom = traceGeometry(win, 600, 150);
    const [x0, x1] = geom.shadeX;
    expect(x0).toBeGreaterThan(0);
    expect(x1).toBeGreaterThan(x0);
    expect(geom.thresholdY).not.toBeNull();
  });
});

describe("render guarantees", () => {
  it("never draws the statistic below the axis", () => {
    const rows: TraceRow[] = [
      [0, 0, 0],
      [1, -2, -1e-9],  // defensive: contract says s >= 0, render must clamp
      [2, 5, 5],
    ];
    const win = traceWindow(rows, alarm(0, 2), 5, 4);
    const geom = traceGeometry(win, 100, 100);
    for (const [, y] of geom.points) {
      expect(y).toBeGreaterThanOrEqual(0);
      expect(y).toBeLessThanOrEqual(100);
    }
    const svg = renderTraceSvg(geom);
    expect(svg).toContain("<svg");
    expect(svg).toContain('class="segment"');
  });

  it("queue rows expose labeling only for closed alarms", () => {
    const html = renderQueue([
      toListItem(alarm(0, 5)),
      toListItem(alarm(10, null)),
    ]);
    expect(html).toContain("false alarm");
    expect(html).toContain("still open");
    expect(html).toContain("badge-open");
  });

  it("empty queue says so", () => {
    expect(renderQueue([])).toContain("No alarms");
  });
});
