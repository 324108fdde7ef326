/** Browser wiring: keyboard + control panel drive the adjustment state,
 * every accepted change requests a /project refresh (latest-wins), and the
 * overlay canvas repaints from the verbatim response. */

import { ApiClient, ProjectQueue, SessionInfo } from "./client.js";
import { EXTRINSIC_KEYMAP, INTRINSIC_KEYMAP, KEYMAP } from "./keymap.js";
import { canvasSink, renderOverlay, OverlayMode, ProjectedPixel }
  from "./overlay.js";
import { StateStore, initialState, stateFromExtrinsic } from "./state.js";
import { CLOUD_COLORS, defaultOrbit, projectOrbit } from "./view3d.js";

const client = new ApiClient("");
let info: SessionInfo;
const store = new StateStore();
let lastPixels: ProjectedPixel[] = [];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function mode(): OverlayMode {
  return store.state.intensityColor ? "intensity" : "depth";
}

async function repaintImageMode(): Promise<void> {
  const canvas = el<HTMLCanvasElement>("view");
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const img = el<HTMLImageElement>("camera-image");
  ctx.drawImage(img, 0, 0);
  renderOverlay(canvasSink(ctx), lastPixels, mode());
}

const queue = new ProjectQueue(async (state) => {
  const resp = await client.project(state, info.intrinsics);
  lastPixels = resp.pixels;
  await repaintImageMode();
  el<HTMLSpanElement>("status").textContent =
    `${resp.pixels.length} points`;
});

let orbitPoints: Record<string, number[][]> = {};

async function repaintCloudMode(): Promise<void> {
  const canvas = el<HTMLCanvasElement>("view");
  const ctx = canvas.getContext("2d")!;
  ctx.fillStyle = "#101318";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const all = Object.values(orbitPoints).flat();
  const cam = defaultOrbit(all);
  cam.yaw = orbitYaw;
  cam.pitch = orbitPitch;
  for (const [name, pts] of Object.entries(orbitPoints)) {
    ctx.fillStyle = CLOUD_COLORS[name];
    for (const [u, v] of projectOrbit(cam, pts, canvas.width,
                                      canvas.height)) {
      ctx.fillRect(u, v, 2, 2);
    }
  }
}

let orbitYaw = Math.PI / 4;
let orbitPitch = 0.5;

function updatePanel(): void {
  const s = store.state;
  el<HTMLSpanElement>("state-rot").textContent =
    `rot xyz deg: ${s.rotationDeg.x.toFixed(2)}, ` +
    `${s.rotationDeg.y.toFixed(2)}, ${s.rotationDeg.z.toFixed(2)}`;
  el<HTMLSpanElement>("state-trans").textContent =
    `t xyz m: ${s.translationM.x.toFixed(3)}, ` +
    `${s.translationM.y.toFixed(3)}, ${s.translationM.z.toFixed(3)}`;
  el<HTMLSpanElement>("state-focal").textContent =
    `fx ${s.fx.toFixed(1)} fy ${s.fy.toFixed(1)}`;
}

function onChanged(): void {
  updatePanel();
  if (info.mode === "lidar2camera") {
    queue.request(store.state);
  }
}

function bindControls(): void {
  window.addEventListener("keydown", (ev) => {
    if (ev.key === "z" && (ev.ctrlKey || ev.metaKey)) {
      if (store.undo()) onChanged();
      return;
    }
    if (store.handleKey(ev.key)) {
      onChanged();
    }
  });
  const panel = el<HTMLDivElement>("buttons");
  for (const [key, action] of Object.entries(KEYMAP)) {
    const btn = document.createElement("button");
    const table = key in EXTRINSIC_KEYMAP ? EXTRINSIC_KEYMAP
      : INTRINSIC_KEYMAP;
    btn.textContent = `${key}: ${describe(table[key])}`;
    btn.addEventListener("click", () => {
      store.handleKey(key);
      onChanged();
    });
    panel.appendChild(btn);
  }
  el<HTMLInputElement>("toggle-intensity").addEventListener("change",
    (ev) => {
      const next = JSON.parse(JSON.stringify(store.state));
      next.intensityColor = (ev.target as HTMLInputElement).checked;
      store.push(next);
      onChanged();
    });
  el<HTMLInputElement>("toggle-overlap").addEventListener("change",
    (ev) => {
      const next = JSON.parse(JSON.stringify(store.state));
      next.overlapFilter = (ev.target as HTMLInputElement).checked;
      store.push(next);
      onChanged();
    });
  el<HTMLButtonElement>("save").addEventListener("click", async () => {
    const out = await client.save(store.state);
    el<HTMLSpanElement>("status").textContent = `saved to ${out.path}`;
  });
  el<HTMLButtonElement>("reload").addEventListener("click", async () => {
    const saved = await client.result();
    store.push(stateFromExtrinsic(saved.extrinsic, store.state));
    onChanged();
  });
  const canvas = el<HTMLCanvasElement>("view");
  let dragging = false;
  canvas.addEventListener("mousedown", () => { dragging = true; });
  window.addEventListener("mouseup", () => { dragging = false; });
  window.addEventListener("mousemove", (ev) => {
    if (!dragging || info.mode !== "lidar2lidar") return;
    orbitYaw += ev.movementX * 0.01;
    orbitPitch = Math.max(-1.4, Math.min(1.4,
      orbitPitch + ev.movementY * 0.01));
    void repaintCloudMode();
  });
}

function describe(action: { kind: string; axis: string; sign: number }):
    string {
  const sign = action.sign > 0 ? "+" : "-";
  if (action.kind === "rotate") return `${sign}${action.axis} deg`;
  if (action.kind === "translate") return `${sign}${action.axis} m`;
  return `${sign}${action.axis}`;
}

async function boot(): Promise<void> {
  info = await client.session();
  store.push(stateFromExtrinsic(
    {
      euler_zyx_deg: info.extrinsic.euler_zyx_deg ?? [0, 0, 0],
      translation_m: info.extrinsic.translation_m ?? [0, 0, 0],
    },
    initialState({
      fx: info.intrinsics?.fx ?? 1000,
      fy: info.intrinsics?.fy ?? 1000,
    })));
  const canvas = el<HTMLCanvasElement>("view");
  if (info.mode === "lidar2camera" && info.image) {
    canvas.width = info.image.width;
    canvas.height = info.image.height;
    const img = el<HTMLImageElement>("camera-image");
    img.src = info.image.url;
    await new Promise((resolve) => { img.onload = resolve; });
  } else {
    canvas.width = 960;
    canvas.height = 640;
    orbitPoints.master = (await client.cloud("master")).points;
    try {
      orbitPoints.slave = (await client.cloud("slave")).points;
    } catch {
      orbitPoints.slave = [];
    }
    await repaintCloudMode();
  }
  bindControls();
  updatePanel();
  onChanged();
}

void boot();
