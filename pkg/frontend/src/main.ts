// Browser entry point: wires the pure state/render layers to the DOM and
// polls the service. All logic worth testing lives in the imported modules.

import { ApiClient } from "./api.js";
import { renderQueue, renderStats, renderTraceSvg } from "./render.js";
import { ReviewStore } from "./state.js";
import { traceGeometry, traceWindow } from "./trace.js";
import type { AlarmStatus, Verdict } from "./types.js";

const POLL_MS = 2000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

async function selectAlarm(client: ApiClient, store: ReviewStore, alarmId: string): Promise<void> {
  const detail = await client.alarmDetail(alarmId);
  const h = Number((el<HTMLInputElement>("threshold")).value) || null;
  const win = traceWindow(detail.trace, detail.record, 20, h);
  el("trace-panel").innerHTML = renderTraceSvg(traceGeometry(win));
  el("trace-caption").textContent =
    `${alarmId}: frames ${win.start}–${win.end}, segment ${win.segmentStart}–${win.segmentEnd}, ` +
    `${detail.segment_vector_count} vectors stored`;
}

function redraw(store: ReviewStore): void {
  const statusFilter = (el<HTMLSelectElement>("status-filter").value || undefined) as AlarmStatus | undefined;
  el("queue-panel").innerHTML = renderQueue(store.queueView(statusFilter).items);
  el("stats-panel").innerHTML = renderStats(store.stats, store.referenceDelta());
  el("error-panel").textContent = store.lastError ?? "";
}

async function start(): Promise<void> {
  const base = el<HTMLInputElement>("base-url").value;
  const client = new ApiClient(base);
  const store = new ReviewStore();

  el("queue-panel").addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const alarmId = target.dataset.alarm;
    const action = target.dataset.action as Verdict | undefined;
    if (alarmId && action) {
      const fraction = Number(el<HTMLInputElement>("sample-fraction").value) || undefined;
      void store.submitLabel(client, alarmId, action, fraction).then(() => redraw(store));
    }
    const selected = target.dataset.select;
    if (selected) {
      ev.preventDefault();
      void selectAlarm(client, store, selected);
    }
  });

  const tick = async () => {
    try {
      await store.refresh(client);
      store.lastError = null;
    } catch (err) {
      store.lastError = err instanceof Error ? err.message : String(err);
    }
    redraw(store);
  };
  await tick();
  setInterval(() => void tick(), POLL_MS);
}

el("connect").addEventListener("click", () => void start());
