// Thin typed client for the service API. All console state originates here
// or from the alarm-stream WebSocket; the client never evaluates rules.

import type { ActionRequest, AlarmDoc, DevicesDoc, FloorplanDoc, ScenarioDoc } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseError(response: Response): Promise<never> {
  let detail = response.statusText;
  try {
    const doc = await response.json();
    if (typeof doc.detail === "string") detail = doc.detail;
    else if (typeof doc.error === "string") detail = doc.error;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export class ConsoleApi {
  constructor(readonly baseUrl: string = "") {}

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`);
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  getAlarms(params: { state?: string; type?: string } = {}): Promise<AlarmDoc[]> {
    const query = new URLSearchParams();
    if (params.state) query.set("state", params.state);
    if (params.type) query.set("type", params.type);
    const suffix = query.size ? `?${query}` : "";
    return this.get<AlarmDoc[]>(`/api/alarms${suffix}`);
  }

  getDevices(): Promise<DevicesDoc> {
    return this.get<DevicesDoc>("/api/devices");
  }

  getFloorplan(): Promise<FloorplanDoc> {
    return this.get<FloorplanDoc>("/api/floorplan");
  }

  getScenario(): Promise<ScenarioDoc> {
    return this.get<ScenarioDoc>("/api/scenario");
  }

  acknowledge(alarmId: string, operator: string): Promise<AlarmDoc> {
    return this.post<AlarmDoc>(`/api/alarms/${alarmId}/ack`, { operator });
  }

  reject(alarmId: string, operator: string): Promise<AlarmDoc> {
    return this.post<AlarmDoc>(`/api/alarms/${alarmId}/reject`, { operator });
  }

  postAction(action: ActionRequest): Promise<{ actor: string; action: string; scheduled_tick: number }> {
    return this.post(`/api/actions`, action);
  }

  alarmStreamUrl(): string {
    const base = this.baseUrl || (typeof location !== "undefined" ? location.origin : "");
    return base.replace(/^http/, "ws") + "/api/alarm-stream";
  }
}
