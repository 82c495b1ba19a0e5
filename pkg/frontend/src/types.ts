// Wire types of the service API (REST documents and alarm-stream messages).

export type AlarmState = "open" | "acknowledged" | "rejected";

export interface EvidenceRef {
  topic: string;
  offset: number;
  sim_time: number;
}

export interface AlarmDoc {
  alarm_id: string;
  alarm_type: string;
  severity: number;
  sim_time: number;
  camera_id: string | null;
  room_id: string | null;
  source: string | null;
  confidence: number | null;
  state: AlarmState;
  operator: string | null;
  evidence: EvidenceRef[];
  latency: number;
}

export interface AlarmPush {
  type: "alarm" | "alarm-snapshot" | "alarm-update";
  alarm_id: string;
  alarm_type?: string;
  severity?: number;
  sim_time?: number;
  camera_id?: string | null;
  room_id?: string | null;
  source?: string | null;
  confidence?: number | null;
  state?: AlarmState;
  operator?: string | null;
  evidence?: EvidenceRef[];
  evidence_add?: EvidenceRef[];
  latency?: number;
}

export interface SensorPush {
  type: "sensor-change";
  sensor_id: string;
  kind: string;
  old_value: unknown;
  new_value: unknown;
  sim_time: number;
  seq: number;
  snapshot: boolean;
}

export type StreamPush = AlarmPush | SensorPush;

export interface CameraDoc {
  camera_id: string;
  room: string | null;
  port: number;
  stream_url: string;
  snapshot_url: string;
  fps: number;
}

export interface SensorDoc {
  sensor_id: string;
  kind: string;
  room: string | null;
  door: string | null;
  value: unknown;
  changed_at: number | null;
}

export interface DevicesDoc {
  cameras: CameraDoc[];
  sensors: SensorDoc[];
}

export interface FloorplanDoc {
  rooms: { room_id: string; rect: [number, number, number, number] }[];
  doors: { door_id: string; segment: [[number, number], [number, number]]; connects: string[] }[];
  zones: { zone_id: string; room: string; rect: [number, number, number, number]; purpose: string }[];
  cameras: { camera_id: string; position: [number, number, number]; room: string | null }[];
}

export interface ScenarioDoc {
  name: string;
  seed: number;
  dt: number;
  duration: number;
  tick: number;
  fire_emitters: string[];
  doors: string[];
}

export interface ActionRequest {
  id: string;
  name: string;
  value: string;
}
