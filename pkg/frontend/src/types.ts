// Wire shapes mirrored from the detection service plus the view models the
// console renders. The server is the source of truth; these types only add
// what the UI needs (badges, labelability, optimistic flags).

export type AlarmStatus = "open" | "closed" | "labeled_false" | "labeled_true";
export type Verdict = "false_alarm" | "true_anomaly";

export interface AlarmRecord {
  id: string;
  stream_id: string;
  tau_start: number;
  detection_frame: number;
  tau_end: number | null;
  peak_frame: number | null;
  peak_statistic: number;
  status: AlarmStatus;
}

/** One (t, delta, s) sample of the running-statistic trace. */
export type TraceRow = [number, number, number];

export interface AlarmDetail {
  record: AlarmRecord;
  trace: TraceRow[];
  segment_vector_count: number;
}

export interface ModelStats {
  reference_size: number;
  calibration_size: number;
  k: number;
  alpha: number;
  m: number;
  d_alpha: number;
  insert_count: number;
  uptime_s: number;
  total_alarms: number;
  alarm_counts: Record<string, number>;
  state_digest?: string;
}

export interface LabelAction {
  alarmId: string;
  verdict: Verdict;
  sampleFraction?: number;
  labeler?: string;
  /** idempotency key; resubmitting the same action must be a no-op */
  requestId: string;
}

export interface LabelResult {
  alarm_id: string;
  verdict: Verdict;
  inserted: number;
  reference_size: number;
  status: AlarmStatus;
}

export interface AlarmListItem {
  record: AlarmRecord;
  badge: string;
  labelable: boolean;
  /** set while a label request is in flight (optimistic rendering) */
  pending: Verdict | null;
}

export interface FrameRecord {
  t: number;
  flow: { mean: number; var: number; skew: number; kurt: number };
  objects: Array<
    | { bbox: [number, number, number, number]; probs: number[] }
    | { loc: [number, number, number]; probs: number[] }
  >;
}

export interface StepRow {
  t: number;
  delta: number;
  s: number;
  opened: string | null;
  closed: string | null;
}

export interface FramesResponse {
  stream_id: string;
  results: StepRow[];
  alarms_closed: AlarmRecord[];
  reference_size: number;
}
