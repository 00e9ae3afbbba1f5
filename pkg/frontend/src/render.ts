// Canvas renderer: occupancy underlay, graph frontier markers sized by
// priority weight and colored by semantic score, robot trail, tour polyline.

import type { ViewModel } from "./state.js";

export const PALETTE = {
  unexplored: "#202228",
  free: "#e8e4d8",
  occupied: "#3a3f4a",
  robot: "#1f77ff",
  trail: "rgba(31,119,255,0.55)",
  tour: "rgba(255,160,0,0.8)",
  subgoal: "#ff2d2d",
  frontier: "#111111",
  selected: "#00c853",
};

// stable class color from a hash of the name
export function classColor(name: string): string {
  let h = 0;
  for (let i = 0; i < name.length; i++) h = (h * 31 + name.charCodeAt(i)) >>> 0;
  return `hsl(${h % 360}, 70%, 45%)`;
}

export function frontierRadius(gain: number, cellPx: number): number {
  return Math.max(2, Math.min(5 * cellPx, (1 + Math.sqrt(gain)) * cellPx * 0.6));
}

// frontier hit test in grid coordinates; returns the frontier id or null
export function pickFrontier(
  vm: ViewModel,
  gy: number,
  gx: number,
  maxDist = 3.0,
): number | null {
  let best: number | null = null;
  let bestD = maxDist;
  for (const [id, fy, fx] of vm.frontiers) {
    const d = Math.hypot(fy - gy, fx - gx);
    if (d < bestD) {
      bestD = d;
      best = id;
    }
  }
  return best;
}

export function render(
  ctx: CanvasRenderingContext2D,
  vm: ViewModel,
  cellPx: number,
): void {
  const n = vm.gridSize;
  if (!n) return;
  ctx.save();
  ctx.fillStyle = PALETTE.unexplored;
  ctx.fillRect(0, 0, n * cellPx, n * cellPx);
  const img = ctx.createImageData(n, n);
  const colFree = [232, 228, 216, 255];
  const colOcc = [58, 63, 74, 255];
  const colUnk = [32, 34, 40, 255];
  for (let i = 0; i < n * n; i++) {
    const v = vm.occupancy[i];
    const c = v === 1 ? colFree : v === -1 ? colOcc : colUnk;
    img.data.set(c, i * 4);
  }
  // draw the low-res grid then scale it up
  const off = new OffscreenCanvas(n, n);
  const octx = off.getContext("2d")!;
  octx.putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, n * cellPx, n * cellPx);

  // objects as small class-colored squares
  for (const [y, x, cls] of vm.objects.values()) {
    ctx.fillStyle = classColor(cls);
    ctx.fillRect((x - 0.35) * cellPx, (y - 0.35) * cellPx, 0.7 * cellPx, 0.7 * cellPx);
  }

  // robot trail
  if (vm.trail.length > 1) {
    ctx.strokeStyle = PALETTE.trail;
    ctx.lineWidth = Math.max(1, cellPx * 0.35);
    ctx.beginPath();
    ctx.moveTo(vm.trail[0][1] * cellPx, vm.trail[0][0] * cellPx);
    for (const [y, x] of vm.trail) ctx.lineTo(x * cellPx, y * cellPx);
    ctx.stroke();
  }

  // planned tour polyline: robot -> frontier positions in tour order
  const byId = new Map(vm.frontiers.map((f) => [f[0], f]));
  ctx.strokeStyle = PALETTE.tour;
  ctx.lineWidth = Math.max(1, cellPx * 0.2);
  ctx.setLineDash([cellPx, cellPx * 0.6]);
  ctx.beginPath();
  ctx.moveTo(vm.robot[1] * cellPx, vm.robot[0] * cellPx);
  for (const id of vm.tour) {
    const f = byId.get(id);
    if (f) ctx.lineTo(f[2] * cellPx, f[1] * cellPx);
  }
  ctx.stroke();
  ctx.setLineDash([]);

  // frontier markers
  for (const [id, fy, fx, gain] of vm.frontiers) {
    const r = frontierRadius(gain, cellPx);
    ctx.beginPath();
    ctx.arc(fx * cellPx, fy * cellPx, r, 0, 2 * Math.PI);
    ctx.fillStyle =
      id === vm.selected || id === vm.subgoal ? PALETTE.selected : PALETTE.frontier;
    ctx.fill();
    if (id === vm.subgoal) {
      ctx.strokeStyle = PALETTE.subgoal;
      ctx.lineWidth = 2;
      ctx.stroke();
    }
  }

  // robot
  ctx.beginPath();
  ctx.arc(vm.robot[1] * cellPx, vm.robot[0] * cellPx, cellPx * 0.9, 0, 2 * Math.PI);
  ctx.fillStyle = PALETTE.robot;
  ctx.fill();
  ctx.restore();
}

export function legendEntries(vm: ViewModel): { name: string; color: string }[] {
  return vm.classNames.map((name) => ({ name, color: classColor(name) }));
}
