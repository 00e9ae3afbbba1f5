// Browser entry point: mirrors the bridge stream over the proxy's SSE
// endpoint, renders on a canvas, and turns frontier clicks into intervene
// commands (debounced, reconciled on ack/error).

import type { ErrorMsg, ServerMessage } from "./protocol.js";
import { applyMessage, emptyViewModel, ViewModel } from "./state.js";
import { legendEntries, pickFrontier, render } from "./render.js";

const CELL_PX = 7;
const DEBOUNCE_MS = 250;

const vm: ViewModel = emptyViewModel();
let clientId = "";
let lastClickAt = 0;
let pendingSelect: number | null = null;
let dirty = true;

const canvas = document.getElementById("map") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const toastEl = document.getElementById("toast")!;
const legendEl = document.getElementById("legend")!;
const summaryEl = document.getElementById("summary")!;
const hoverEl = document.getElementById("hover")!;

function toast(text: string): void {
  toastEl.textContent = text;
  toastEl.classList.add("show");
  setTimeout(() => toastEl.classList.remove("show"), 2500);
}

async function sendCommand(cmd: Record<string, unknown>): Promise<void> {
  await fetch(`/cmd?client=${encodeURIComponent(clientId)}`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(cmd),
  });
}

function onMessage(msg: ServerMessage): void {
  if (msg.type === "ack" && msg.cmd === "intervene") {
    vm.selected = pendingSelect;
    pendingSelect = null;
  } else if (msg.type === "error") {
    const e = msg as ErrorMsg;
    toast(`${e.error}: ${e.message}`);
    pendingSelect = null;
    vm.selected = null;
  } else {
    applyMessage(vm, msg);
    if (msg.type === "snapshot") {
      canvas.width = vm.gridSize * CELL_PX;
      canvas.height = vm.gridSize * CELL_PX;
      legendEl.innerHTML = legendEntries(vm)
        .map((e) => `<span class="chip" style="background:${e.color}">${e.name}</span>`)
        .join(" ");
    }
    if (msg.type === "episode_end") {
      summaryEl.textContent =
        `episode ${msg.status}: steps=${msg.steps} ` +
        `traveled=${msg.traveled.toFixed(1)} m ` +
        `interventions=${msg.interventions}`;
      canvas.classList.add("disabled");
    }
  }
  dirty = true;
}

function frame(): void {
  if (dirty) {
    render(ctx, vm, CELL_PX);
    statusEl.textContent =
      `${vm.scenarioId} | mode=${vm.mode} | step=${vm.steps} ` +
      `| traveled=${vm.traveled.toFixed(1)} m | rev=${vm.revision} ` +
      `| frontiers=${vm.frontiers.length} | ${vm.status}`;
    dirty = false;
  }
  requestAnimationFrame(frame);
}

canvas.addEventListener("click", (ev) => {
  if (vm.end) return; // input disabled after episode_end
  const now = Date.now();
  if (now - lastClickAt < DEBOUNCE_MS) return; // rapid double click: one command
  lastClickAt = now;
  const rect = canvas.getBoundingClientRect();
  const gx = (ev.clientX - rect.left) / CELL_PX;
  const gy = (ev.clientY - rect.top) / CELL_PX;
  const id = pickFrontier(vm, gy, gx);
  if (id === null) return;
  pendingSelect = id;
  vm.selected = id; // optimistic highlight, reconciled on ack/error
  dirty = true;
  void sendCommand({ cmd: "intervene", frontier_id: id, id: `ui-${now}` });
});

canvas.addEventListener("mousemove", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const gx = (ev.clientX - rect.left) / CELL_PX;
  const gy = (ev.clientY - rect.top) / CELL_PX;
  const id = pickFrontier(vm, gy, gx);
  if (id === null) {
    hoverEl.textContent = "";
    return;
  }
  const f = vm.frontiers.find((x) => x[0] === id);
  hoverEl.textContent = f ? `frontier ${id}: gain=${f[3].toFixed(2)}` : "";
});

for (const [btn, cmd] of [
  ["btn-pause", { cmd: "pause" }],
  ["btn-resume", { cmd: "resume" }],
  ["btn-step", { cmd: "step", n: 1 }],
  ["btn-reset", { cmd: "reset" }],
] as const) {
  document.getElementById(btn)!.addEventListener("click", () => {
    canvas.classList.remove("disabled");
    summaryEl.textContent = "";
    void sendCommand(cmd as Record<string, unknown>);
  });
}

const events = new EventSource("/events");
events.addEventListener("client", (ev) => {
  clientId = (ev as MessageEvent).data;
});
events.onmessage = (ev) => {
  onMessage(JSON.parse(ev.data) as ServerMessage);
};
events.onerror = () => {
  statusEl.textContent = "disconnected; retrying...";
};

requestAnimationFrame(frame);
