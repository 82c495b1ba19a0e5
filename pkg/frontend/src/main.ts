// Console bootstrap: fetch static documents, keep the alarm-stream WebSocket
// alive with retry, and paint camera streams into the tiles.

import { ConsoleApi, ApiError } from "./api.js";
import { ConsoleViewModel } from "./model.js";
import { multipartParts } from "./stream.js";
import {
  renderAlarms,
  renderBanner,
  renderFloorplan,
  renderScenarioControls,
  renderSensors,
  renderTiles,
  type ViewCallbacks,
} from "./view.js";
import type { StreamPush } from "./types.js";

const RETRY_MS = 2000;
const OPERATOR = "console-operator";

const api = new ConsoleApi("");
const model = new ConsoleViewModel();

const root = document.getElementById("app") as HTMLElement;
const planPane = root.querySelector(".pane-plan .plan-box") as HTMLElement;
const sensorPane = root.querySelector(".pane-plan .sensor-box") as HTMLElement;
const controlsPane = root.querySelector(".pane-plan .controls-box") as HTMLElement;
const tilesPane = root.querySelector(".pane-tiles") as HTMLElement;
const alarmsPane = root.querySelector(".pane-alarms") as HTMLElement;

let floorplanDoc: Awaited<ReturnType<typeof api.getFloorplan>> | null = null;

const callbacks: ViewCallbacks = {
  onAcknowledge: (alarmId) => runCommand(alarmId, () => api.acknowledge(alarmId, OPERATOR)),
  onReject: (alarmId) => runCommand(alarmId, () => api.reject(alarmId, OPERATOR)),
  onAction: async (action) => {
    try {
      await api.postAction(action);
    } catch (error) {
      alert(error instanceof ApiError ? error.detail : String(error));
    }
  },
};

async function runCommand(alarmId: string, command: () => Promise<unknown>): Promise<void> {
  try {
    const doc = await command();
    model.applyCommandResult(doc as never);
  } catch (error) {
    // Server errors (e.g. illegal transitions) surface inline on the card.
    model.setInlineError(alarmId, error instanceof ApiError ? error.detail : String(error));
  }
  paintAlarms();
}

function paintAlarms(): void {
  renderAlarms(alarmsPane, model, callbacks);
}

function paintAll(): void {
  renderBanner(root, model);
  if (floorplanDoc) renderFloorplan(planPane, floorplanDoc, model);
  renderSensors(sensorPane, model);
  renderTiles(tilesPane, model);
  paintAlarms();
}

async function attachCameraStream(cameraId: string, url: string): Promise<void> {
  const card = tilesPane.querySelector<HTMLElement>(`[data-camera="${cameraId}"]`);
  const img = card?.querySelector("img");
  if (!img) return;
  for (;;) {
    try {
      const response = await fetch(url);
      if (!response.ok || response.body === null) throw new Error(`stream ${response.status}`);
      for await (const part of multipartParts(response.body)) {
        const blob = new Blob([part.slice()], { type: "image/png" });
        const next = URL.createObjectURL(blob);
        const previous = img.src;
        img.src = next;
        if (previous.startsWith("blob:")) URL.revokeObjectURL(previous);
        model.noteFrame(cameraId, Date.now());
      }
    } catch {
      // camera restarting or unreachable; retry below
    }
    await new Promise((resolve) => setTimeout(resolve, RETRY_MS));
  }
}

function connectAlarmStream(): void {
  const socket = new WebSocket(api.alarmStreamUrl());
  socket.onopen = () => {
    model.connection = "live";
    paintAll();
  };
  socket.onmessage = (event) => {
    model.applyPush(JSON.parse(event.data) as StreamPush);
    paintAll();
  };
  socket.onclose = () => {
    model.connection = "degraded";
    paintAll();
    setTimeout(connectAlarmStream, RETRY_MS);
  };
}

async function bootstrap(): Promise<void> {
  paintAll();
  for (;;) {
    try {
      const [devices, alarms, plan, scenario] = await Promise.all([
        api.getDevices(),
        api.getAlarms(),
        api.getFloorplan(),
        api.getScenario(),
      ]);
      model.setDevices(devices);
      model.setAlarms(alarms);
      floorplanDoc = plan;
      renderScenarioControls(controlsPane, scenario, callbacks);
      paintAll();
      for (const tile of model.cameraTiles()) {
        void attachCameraStream(tile.camera.camera_id, tile.camera.stream_url);
      }
      connectAlarmStream();
      setInterval(() => renderTiles(tilesPane, model), 1000); // frame-age labels
      return;
    } catch {
      model.connection = "degraded";
      paintAll();
      await new Promise((resolve) => setTimeout(resolve, RETRY_MS));
    }
  }
}

void bootstrap();
