import type { AlarmRecord, TraceRow } from "./types.js";

export interface TraceWindow {
  rows: TraceRow[];
  /** inclusive frame range actually shown after clamping at stream edges */
  start: number;
  end: number;
  /** alarm segment bounds, clamped into the window */
  segmentStart: number;
  segmentEnd: number;
  threshold: number | null;
  maxS: number;
}

/**
 * Select the trace rows around an alarm: [tau_start - margin, tau_end + margin],
 * clamped to whatever the service actually recorded.
 */
export function traceWindow(
  rows: TraceRow[],
  alarm: AlarmRecord,
  margin = 20,
  threshold: number | null = null,
): TraceWindow {
  if (rows.length === 0) {
    return {
      rows: [],
      start: alarm.tau_start,
      end: alarm.tau_start,
      segmentStart: alarm.tau_start,
      segmentEnd: alarm.tau_end ?? alarm.detection_frame,
      threshold,
      maxS: 0,
    };
  }
  const available = rows.map((r) => r[0]);
  const lo = Math.max(alarm.tau_start - margin, available[0]!);
  const hi = Math.min((alarm.tau_end ?? alarm.detection_frame) + margin, available[available.length - 1]!);
  const windowRows = rows.filter((r) => r[0] >= lo && r[0] <= hi);
  let maxS = 0;
  for (const r of windowRows) maxS = Math.max(maxS, r[2]);
  return {
    rows: windowRows,
    start: lo,
    end: hi,
    segmentStart: Math.max(alarm.tau_start, lo),
    segmentEnd: Math.min(alarm.tau_end ?? alarm.detection_frame, hi),
    threshold,
    maxS,
  };
}

export interface TraceGeometry {
  points: Array<[number, number]>;
  thresholdY: number | null;
  shadeX: [number, number];
  width: number;
  height: number;
}

/**
 * Map a trace window to plot coordinates. The statistic is non-negative by
 * contract, so the y axis is pinned at 0; any negative input is clamped
 * rather than silently drawn below the axis.
 */
export function traceGeometry(win: TraceWindow, width = 640, height = 160): TraceGeometry {
  const span = Math.max(win.end - win.start, 1);
  const yTop = Math.max(win.maxS, win.threshold ?? 0) || 1;
  const x = (t: number) => ((t - win.start) / span) * width;
  const y = (s: number) => height - (Math.max(s, 0) / yTop) * height;
  return {
    points: win.rows.map((r) => [x(r[0]), y(r[2])]),
    thresholdY: win.threshold === null ? null : y(win.threshold),
    shadeX: [x(win.segmentStart), x(win.segmentEnd)],
    width,
    height,
  };
}
