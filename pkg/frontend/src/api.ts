import type {
  AlarmDetail,
  AlarmRecord,
  AlarmStatus,
  FrameRecord,
  FramesResponse,
  LabelAction,
  LabelResult,
  ModelStats,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Thin typed client over the service endpoints; no state of its own. */
export class ApiClient {
  constructor(
    private baseUrl: string,
    private authToken?: string,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private headers(): Record<string, string> {
    const h: Record<string, string> = { "Content-Type": "application/json" };
    if (this.authToken) h["X-Auth-Token"] = this.authToken;
    return h;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await resp.text();
    if (!resp.ok) {
      let message = text;
      try {
        const parsed = JSON.parse(text);
        message = parsed.error ?? parsed.detail ?? text;
      } catch {
        // non-JSON error body, keep the raw text
      }
      throw new ApiError(resp.status, message);
    }
    return JSON.parse(text) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  stats(): Promise<ModelStats> {
    return this.request("GET", "/stats");
  }

  async listAlarms(status?: AlarmStatus): Promise<AlarmRecord[]> {
    const qs = status ? `?status=${encodeURIComponent(status)}` : "";
    const body = await this.request<{ alarms: AlarmRecord[] }>("GET", `/alarms${qs}`);
    return body.alarms;
  }

  alarmDetail(alarmId: string): Promise<AlarmDetail> {
    return this.request("GET", `/alarms/${encodeURIComponent(alarmId)}`);
  }

  submitLabel(action: LabelAction): Promise<LabelResult> {
    return this.request("POST", `/alarms/${encodeURIComponent(action.alarmId)}/label`, {
      verdict: action.verdict,
      sample_fraction: action.sampleFraction ?? null,
      labeler: action.labeler ?? "review-ui",
      request_id: action.requestId,
    });
  }

  submitFrames(streamId: string, frames: FrameRecord[], requestId?: string): Promise<FramesResponse> {
    return this.request("POST", `/streams/${encodeURIComponent(streamId)}/frames`, {
      frames,
      request_id: requestId ?? null,
    });
  }

  finalizeStream(streamId: string): Promise<{ alarm: AlarmRecord | null }> {
    return this.request("POST", `/streams/${encodeURIComponent(streamId)}/finalize`);
  }
}
