import type { ApiClient } from "./api.js";
import type {
  AlarmListItem,
  AlarmRecord,
  AlarmStatus,
  LabelResult,
  ModelStats,
  Verdict,
} from "./types.js";

const BADGES: Record<AlarmStatus, string> = {
  open: "OPEN",
  closed: "NEEDS REVIEW",
  labeled_false: "FALSE ALARM",
  labeled_true: "CONFIRMED",
};

/** Only a closed (or already labeled) alarm may receive a verdict. */
export function isLabelable(record: AlarmRecord): boolean {
  return record.status !== "open";
}

export function toListItem(record: AlarmRecord, pending: Verdict | null = null): AlarmListItem {
  return {
    record,
    badge: BADGES[record.status],
    labelable: isLabelable(record) && pending === null,
    pending,
  };
}

/**
 * Alarm queue ordering: most confident first (peak statistic descending),
 * with the id as a stable tiebreak so refreshes never reshuffle.
 */
export function sortByPeak(records: AlarmRecord[]): AlarmRecord[] {
  return [...records].sort(
    (a, b) => b.peak_statistic - a.peak_statistic || a.id.localeCompare(b.id),
  );
}

export function filterByStatus(records: AlarmRecord[], status?: AlarmStatus): AlarmRecord[] {
  return status === undefined ? records : records.filter((r) => r.status === status);
}

export interface QueuePage {
  items: AlarmListItem[];
  page: number;
  pageCount: number;
  total: number;
}

/** The whole review-console state is a pure function of service responses. */
export class ReviewStore {
  alarms = new Map<string, AlarmRecord>();
  stats: ModelStats | null = null;
  previousReferenceSize: number | null = null;
  pending = new Map<string, Verdict>();
  lastError: string | null = null;

  ingestAlarms(records: AlarmRecord[]): void {
    for (const r of records) this.alarms.set(r.id, r);
  }

  ingestStats(stats: ModelStats): void {
    if (this.stats !== null) this.previousReferenceSize = this.stats.reference_size;
    this.stats = stats;
  }

  /** Reference-set growth since the previous stats poll (what a label just bought). */
  referenceDelta(): number | null {
    if (this.stats === null || this.previousReferenceSize === null) return null;
    return this.stats.reference_size - this.previousReferenceSize;
  }

  queueView(status?: AlarmStatus, page = 0, pageSize = 20): QueuePage {
    const filtered = filterByStatus(sortByPeak([...this.alarms.values()]), status);
    const pageCount = Math.max(1, Math.ceil(filtered.length / pageSize));
    const clamped = Math.min(Math.max(page, 0), pageCount - 1);
    const items = filtered
      .slice(clamped * pageSize, (clamped + 1) * pageSize)
      .map((r) => toListItem(r, this.pending.get(r.id) ?? null));
    return { items, page: clamped, pageCount, total: filtered.length };
  }

  /**
   * Optimistically mark the alarm, submit, and roll back on failure.
   * Returns the server result when accepted, null when rejected.
   */
  async submitLabel(
    client: ApiClient,
    alarmId: string,
    verdict: Verdict,
    sampleFraction?: number,
  ): Promise<LabelResult | null> {
    const record = this.alarms.get(alarmId);
    if (record === undefined) throw new Error(`unknown alarm in store: ${alarmId}`);
    if (!isLabelable(record)) throw new Error(`alarm ${alarmId} is open and cannot be labeled`);
    const before = record.status;
    this.pending.set(alarmId, verdict);
    this.alarms.set(alarmId, {
      ...record,
      status: verdict === "false_alarm" ? "labeled_false" : "labeled_true",
    });
    try {
      const result = await client.submitLabel({
        alarmId,
        verdict,
        sampleFraction,
        requestId: crypto.randomUUID(),
      });
      this.alarms.set(alarmId, { ...record, status: result.status });
      this.lastError = null;
      return result;
    } catch (err) {
      // roll the optimistic update back; the server stays authoritative
      this.alarms.set(alarmId, { ...record, status: before });
      this.lastError = err instanceof Error ? err.message : String(err);
      return null;
    } finally {
      this.pending.delete(alarmId);
    }
  }

  async refresh(client: ApiClient, status?: AlarmStatus): Promise<void> {
    const [alarms, stats] = await Promise.all([client.listAlarms(status), client.stats()]);
    this.ingestAlarms(alarms);
    this.ingestStats(stats);
  }
}
