// Console view model: a pure projection of API documents and stream pushes.
// Every displayed fact traces back to a server response or pushed message.

import type {
  AlarmDoc,
  AlarmPush,
  CameraDoc,
  DevicesDoc,
  SensorDoc,
  SensorPush,
  StreamPush,
} from "./types.js";

export interface CameraTile {
  camera: CameraDoc;
  lastFrameAt: number | null; // ms epoch of the newest multipart frame
}

export interface SensorRow extends SensorDoc {}

export type ConnectionState = "connecting" | "live" | "degraded";

function alarmOrder(a: AlarmDoc, b: AlarmDoc): number {
  // Mirrors the API's raise-time order with stable pagination keys.
  if (a.sim_time !== b.sim_time) return a.sim_time - b.sim_time;
  return a.alarm_id < b.alarm_id ? -1 : a.alarm_id > b.alarm_id ? 1 : 0;
}

export class ConsoleViewModel {
  private alarms = new Map<string, AlarmDoc>();
  private sensors = new Map<string, SensorRow>();
  private tiles = new Map<string, CameraTile>();
  connection: ConnectionState = "connecting";
  inlineErrors = new Map<string, string>(); // alarm_id -> last server error

  setDevices(devices: DevicesDoc): void {
    // Tiles map one-to-one onto configured cameras; stale tiles drop out.
    const nextTiles = new Map<string, CameraTile>();
    for (const camera of devices.cameras) {
      nextTiles.set(camera.camera_id, this.tiles.get(camera.camera_id) ?? { camera, lastFrameAt: null });
    }
    this.tiles = nextTiles;
    for (const sensor of devices.sensors) {
      this.sensors.set(sensor.sensor_id, { ...sensor });
    }
  }

  setAlarms(alarms: AlarmDoc[]): void {
    for (const alarm of alarms) this.alarms.set(alarm.alarm_id, alarm);
  }

  applyPush(push: StreamPush): void {
    if (push.type === "sensor-change") {
      this.applySensorPush(push);
    } else {
      this.applyAlarmPush(push);
    }
  }

  private applySensorPush(push: SensorPush): void {
    const row = this.sensors.get(push.sensor_id);
    if (row === undefined) return; // pulse channels and unknown sensors
    row.value = push.new_value;
    if (!push.snapshot) row.changed_at = push.sim_time;
  }

  private applyAlarmPush(push: AlarmPush): void {
    const existing = this.alarms.get(push.alarm_id);
    if (push.type === "alarm" || push.type === "alarm-snapshot") {
      // Keyed by alarm_id: duplicate pushes replace, never duplicate.
      const doc: AlarmDoc = {
        alarm_id: push.alarm_id,
        alarm_type: push.alarm_type ?? existing?.alarm_type ?? "unknown",
        severity: push.severity ?? existing?.severity ?? 3,
        sim_time: push.sim_time ?? existing?.sim_time ?? 0,
        camera_id: push.camera_id ?? existing?.camera_id ?? null,
        room_id: push.room_id ?? existing?.room_id ?? null,
        source: push.source ?? existing?.source ?? null,
        confidence: push.confidence ?? existing?.confidence ?? null,
        state: push.state ?? existing?.state ?? "open",
        operator: push.operator ?? existing?.operator ?? null,
        evidence: push.evidence ?? existing?.evidence ?? [],
        latency: push.latency ?? existing?.latency ?? 0,
      };
      this.alarms.set(push.alarm_id, doc);
      return;
    }
    // alarm-update: merge onto a known card; updates for unknown alarms are
    // dropped (the next full fetch reconciles).
    if (existing === undefined) return;
    if (push.state) {
      existing.state = push.state;
      existing.operator = push.operator ?? existing.operator;
    }
    if (push.source) existing.source = push.source;
    if (push.confidence !== undefined && push.confidence !== null) {
      existing.confidence = push.confidence;
    }
    if (push.evidence_add) existing.evidence = existing.evidence.concat(push.evidence_add);
  }

  applyCommandResult(doc: AlarmDoc): void {
    this.alarms.set(doc.alarm_id, doc);
    this.inlineErrors.delete(doc.alarm_id);
  }

  setInlineError(alarmId: string, message: string): void {
    this.inlineErrors.set(alarmId, message);
  }

  noteFrame(cameraId: string, at: number): void {
    const tile = this.tiles.get(cameraId);
    if (tile) tile.lastFrameAt = at;
  }

  alarmList(): AlarmDoc[] {
    return [...this.alarms.values()].sort(alarmOrder);
  }

  openAlarms(): AlarmDoc[] {
    return this.alarmList().filter((a) => a.state === "open");
  }

  handledAlarms(): AlarmDoc[] {
    return this.alarmList().filter((a) => a.state !== "open");
  }

  sensorRows(): SensorRow[] {
    return [...this.sensors.values()].sort((a, b) => a.sensor_id.localeCompare(b.sensor_id));
  }

  cameraTiles(): CameraTile[] {
    return [...this.tiles.values()].sort((a, b) =>
      a.camera.camera_id.localeCompare(b.camera.camera_id),
    );
  }

  doorBadges(): { door: string; state: string }[] {
    return this.sensorRows()
      .filter((s) => s.kind === "door_access" && s.door !== null)
      .map((s) => ({ door: s.door as string, state: String(s.value ?? "unknown") }));
  }
}
