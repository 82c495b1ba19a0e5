// DOM rendering. Three panes: floorplan left, camera tiles center, alarm
// queue right, with the sensor panel and scenario controls under the plan.

import type { ConsoleViewModel } from "./model.js";
import type { ActionRequest, AlarmDoc, FloorplanDoc, ScenarioDoc } from "./types.js";

export interface ViewCallbacks {
  onAcknowledge(alarmId: string): void;
  onReject(alarmId: string): void;
  onAction(action: ActionRequest): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderBanner(root: HTMLElement, model: ConsoleViewModel): void {
  const banner = root.querySelector(".banner") as HTMLElement;
  banner.dataset.state = model.connection;
  banner.textContent =
    model.connection === "live"
      ? "live"
      : model.connection === "connecting"
        ? "connecting…"
        : "API unreachable — retrying";
}

export function renderFloorplan(container: HTMLElement, plan: FloorplanDoc, model: ConsoleViewModel): void {
  const xs = plan.rooms.flatMap((r) => [r.rect[0], r.rect[2]]);
  const ys = plan.rooms.flatMap((r) => [r.rect[1], r.rect[3]]);
  const maxX = Math.max(...xs);
  const maxY = Math.max(...ys);
  const svgNs = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNs, "svg");
  svg.setAttribute("viewBox", `-0.5 -0.5 ${maxX + 1} ${maxY + 1}`);
  svg.classList.add("plan");

  for (const room of plan.rooms) {
    const [x0, y0, x1, y1] = room.rect;
    const rect = document.createElementNS(svgNs, "rect");
    rect.setAttribute("x", String(x0));
    rect.setAttribute("y", String(y0));
    rect.setAttribute("width", String(x1 - x0));
    rect.setAttribute("height", String(y1 - y0));
    rect.classList.add("room");
    svg.appendChild(rect);
    const label = document.createElementNS(svgNs, "text");
    label.setAttribute("x", String((x0 + x1) / 2));
    label.setAttribute("y", String((y0 + y1) / 2));
    label.classList.add("room-label");
    label.textContent = room.room_id;
    svg.appendChild(label);
  }
  for (const zone of plan.zones) {
    const [x0, y0, x1, y1] = zone.rect;
    const rect = document.createElementNS(svgNs, "rect");
    rect.setAttribute("x", String(x0));
    rect.setAttribute("y", String(y0));
    rect.setAttribute("width", String(x1 - x0));
    rect.setAttribute("height", String(y1 - y0));
    rect.classList.add("zone", zone.purpose);
    svg.appendChild(rect);
  }
  const doorStates = new Map(model.doorBadges().map((badge) => [badge.door, badge.state]));
  for (const door of plan.doors) {
    const [[x1, y1], [x2, y2]] = door.segment;
    const line = document.createElementNS(svgNs, "line");
    line.setAttribute("x1", String(x1));
    line.setAttribute("y1", String(y1));
    line.setAttribute("x2", String(x2));
    line.setAttribute("y2", String(y2));
    line.classList.add("door");
    line.dataset.state = doorStates.get(door.door_id) ?? "unknown";
    svg.appendChild(line);
    const label = document.createElementNS(svgNs, "text");
    label.setAttribute("x", String((x1 + x2) / 2));
    label.setAttribute("y", String((y1 + y2) / 2 - 0.4));
    label.classList.add("door-label");
    label.textContent = `${door.door_id}: ${doorStates.get(door.door_id) ?? "?"}`;
    svg.appendChild(label);
  }
  for (const camera of plan.cameras) {
    const dot = document.createElementNS(svgNs, "circle");
    dot.setAttribute("cx", String(camera.position[0]));
    dot.setAttribute("cy", String(camera.position[1]));
    dot.setAttribute("r", "0.3");
    dot.classList.add("camera-dot");
    svg.appendChild(dot);
  }
  container.replaceChildren(svg);
}

export function renderSensors(container: HTMLElement, model: ConsoleViewModel): void {
  const list = el("ul", "sensors");
  for (const sensor of model.sensorRows()) {
    const item = el("li", "sensor");
    item.dataset.kind = sensor.kind;
    const value = sensor.value === null ? "—" : String(sensor.value);
    const changed = sensor.changed_at === null ? "" : ` (t=${sensor.changed_at.toFixed(1)}s)`;
    item.append(
      el("span", "sensor-id", sensor.sensor_id),
      el("span", "sensor-kind", sensor.kind),
      el("span", "sensor-value", value + changed),
    );
    if (sensor.kind === "smoke_fire" && sensor.value === true) item.classList.add("alerting");
    if (sensor.kind === "power" && sensor.value === false) item.classList.add("alerting");
    list.appendChild(item);
  }
  container.replaceChildren(el("h2", undefined, "Sensors"), list);
}

export function renderTiles(container: HTMLElement, model: ConsoleViewModel): void {
  for (const tile of model.cameraTiles()) {
    let card = container.querySelector<HTMLElement>(`[data-camera="${tile.camera.camera_id}"]`);
    if (!card) {
      card = el("div", "tile");
      card.dataset.camera = tile.camera.camera_id;
      const img = el("img");
      img.alt = tile.camera.camera_id;
      card.append(
        el("div", "tile-title", `${tile.camera.camera_id} — ${tile.camera.room ?? "?"}`),
        img,
        el("div", "tile-age", "no frames yet"),
      );
      container.appendChild(card);
    }
    const age = card.querySelector(".tile-age") as HTMLElement;
    age.textContent =
      tile.lastFrameAt === null
        ? "no frames yet"
        : `last frame ${((Date.now() - tile.lastFrameAt) / 1000).toFixed(1)}s ago`;
  }
}

function alarmCard(alarm: AlarmDoc, model: ConsoleViewModel, callbacks: ViewCallbacks): HTMLElement {
  const card = el("div", "alarm-card");
  card.dataset.alarmId = alarm.alarm_id;
  card.dataset.state = alarm.state;
  card.dataset.type = alarm.alarm_type;
  const title = el("div", "alarm-title");
  title.append(
    el("span", `severity s${alarm.severity}`, `S${alarm.severity}`),
    el("span", "alarm-type", alarm.alarm_type),
    el("span", "alarm-id", alarm.alarm_id),
  );
  const meta: string[] = [`t=${alarm.sim_time.toFixed(1)}s`];
  if (alarm.room_id) meta.push(`room ${alarm.room_id}`);
  if (alarm.camera_id) meta.push(`camera ${alarm.camera_id}`);
  if (alarm.source) meta.push(`source ${alarm.source}`);
  if (alarm.confidence !== null) meta.push(`conf ${alarm.confidence.toFixed(2)}`);
  meta.push(`${alarm.evidence.length} evidence`);
  card.append(title, el("div", "alarm-meta", meta.join(" · ")));

  if (alarm.state === "open") {
    const actions = el("div", "alarm-actions");
    const ack = el("button", "ack", "Acknowledge");
    ack.addEventListener("click", () => callbacks.onAcknowledge(alarm.alarm_id));
    const reject = el("button", "reject", "Reject");
    reject.addEventListener("click", () => callbacks.onReject(alarm.alarm_id));
    actions.append(ack, reject);
    card.appendChild(actions);
  } else {
    card.appendChild(el("div", "alarm-handled", `${alarm.state} by ${alarm.operator ?? "?"}`));
  }
  const error = model.inlineErrors.get(alarm.alarm_id);
  if (error) card.appendChild(el("div", "alarm-error", error));
  return card;
}

export function renderAlarms(container: HTMLElement, model: ConsoleViewModel, callbacks: ViewCallbacks): void {
  const open = el("div", "alarm-section");
  open.append(el("h2", undefined, `Open alarms (${model.openAlarms().length})`));
  for (const alarm of model.openAlarms()) open.appendChild(alarmCard(alarm, model, callbacks));
  if (model.openAlarms().length === 0) open.appendChild(el("div", "idle", "No open alarms"));

  const handled = el("div", "alarm-section handled");
  handled.append(el("h2", undefined, "Handled"));
  for (const alarm of model.handledAlarms()) handled.appendChild(alarmCard(alarm, model, callbacks));

  container.replaceChildren(open, handled);
}

export function renderScenarioControls(
  container: HTMLElement,
  scenario: ScenarioDoc,
  callbacks: ViewCallbacks,
): void {
  const box = el("div", "controls");
  box.appendChild(el("h2", undefined, `Scenario: ${scenario.name}`));
  const addButton = (label: string, action: ActionRequest) => {
    const button = el("button", "control", label);
    button.dataset.action = `${action.name}:${action.value}`;
    button.addEventListener("click", () => callbacks.onAction(action));
    box.appendChild(button);
  };
  for (const emitter of scenario.fire_emitters) {
    addButton(`Start fire (${emitter})`, { id: emitter, name: "fire", value: "startFire" });
  }
  for (const door of scenario.doors) {
    addButton(`Open ${door}`, { id: door, name: "door", value: "open" });
    addButton(`Badge in ${door}`, { id: door, name: "door", value: "grant:console-badge" });
  }
  addButton("Cut power", { id: "power", name: "power", value: "cut" });
  addButton("Restore power", { id: "power", name: "power", value: "restore" });
  container.replaceChildren(box);
}
