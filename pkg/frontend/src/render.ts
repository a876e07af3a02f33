// HTML/SVG string builders, kept free of DOM access so they unit-test cleanly.

import type { TraceGeometry } from "./trace.js";
import type { AlarmListItem, ModelStats } from "./types.js";

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

export function renderQueue(items: AlarmListItem[]): string {
  if (items.length === 0) {
    return `<p class="empty">No alarms. The stream looks nominal.</p>`;
  }
  const rows = items
    .map((item) => {
      const r = item.record;
      const label = item.labelable
        ? `<button data-action="false_alarm" data-alarm="${esc(r.id)}">false alarm</button>
           <button data-action="true_anomaly" data-alarm="${esc(r.id)}">true anomaly</button>`
        : item.pending !== null
          ? `<em>saving…</em>`
          : `<em>still open</em>`;
      return `<tr data-alarm-row="${esc(r.id)}">
        <td><a href="#" data-select="${esc(r.id)}">${esc(r.id)}</a></td>
        <td>${esc(r.stream_id)}</td>
        <td>${r.tau_start}–${r.tau_end ?? "…"}</td>
        <td>${r.peak_statistic.toPrecision(4)}</td>
        <td><span class="badge badge-${esc(r.status)}">${esc(item.badge)}</span></td>
        <td>${label}</td>
      </tr>`;
    })
    .join("\n");
  return `<table class="queue">
    <thead><tr><th>alarm</th><th>stream</th><th>frames</th><th>peak</th><th>status</th><th></th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}

export function renderTraceSvg(geom: TraceGeometry): string {
  const path = geom.points.map(([x, y], i) => `${i === 0 ? "M" : "L"}${x.toFixed(2)},${y.toFixed(2)}`).join(" ");
  const [x0, x1] = geom.shadeX;
  const threshold =
    geom.thresholdY === null
      ? ""
      : `<line class="threshold" x1="0" y1="${geom.thresholdY.toFixed(2)}" x2="${geom.width}" y2="${geom.thresholdY.toFixed(2)}" stroke-dasharray="6 4"/>`;
  return `<svg viewBox="0 0 ${geom.width} ${geom.height}" class="trace">
    <rect class="segment" x="${x0.toFixed(2)}" y="0" width="${Math.max(x1 - x0, 1).toFixed(2)}" height="${geom.height}"/>
    ${threshold}
    <path class="statistic" d="${path}" fill="none"/>
  </svg>`;
}

export function renderStats(stats: ModelStats | null, delta: number | null): string {
  if (stats === null) return `<p class="empty">loading…</p>`;
  const growth = delta === null || delta === 0 ? "" : ` <span class="delta">(+${delta} just learned)</span>`;
  return `<dl class="stats">
    <dt>reference vectors</dt><dd>${stats.reference_size}${growth}</dd>
    <dt>baseline d<sub>α</sub></dt><dd>${stats.d_alpha.toPrecision(5)}</dd>
    <dt>k / α / m</dt><dd>${stats.k} / ${stats.alpha} / ${stats.m}</dd>
    <dt>inserts since training</dt><dd>${stats.insert_count}</dd>
    <dt>alarms</dt><dd>${stats.total_alarms}</dd>
  </dl>`;
}

/** Grouped block magnitudes of a feature vector: motion / location / appearance. */
export function renderFeatureGroups(vector: number[]): string {
  const groups: Array<[string, number[]]> = [
    ["motion", vector.slice(0, 4)],
    ["location", vector.slice(4, 7)],
    ["appearance", vector.slice(7)],
  ];
  const bars = groups
    .map(([name, vals]) => {
      const mag = Math.sqrt(vals.reduce((a, v) => a + v * v, 0));
      return `<div class="group"><span>${name}</span><meter value="${mag.toFixed(3)}" max="${Math.max(mag * 1.5, 1).toFixed(3)}"></meter>${mag.toPrecision(3)}</div>`;
    })
    .join("\n");
  return `<div class="feature-groups">${bars}</div>`;
}
