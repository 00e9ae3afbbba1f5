// Mirrored session state, reconstructed purely from the message stream.
// Applying the same log twice yields an identical ViewModel, which is what
// makes recorded sessions replayable.

import type {
  Delta,
  EpisodeEnd,
  FrontierEntry,
  ServerMessage,
  Snapshot,
} from "./protocol.js";

export interface ViewModel {
  revision: number;
  scenarioId: string;
  gridSize: number;
  cellSize: number;
  classNames: string[];
  mode: string;
  status: string;
  runMode: string;
  // occupancy: -1 occupied, 0 unexplored, 1 free (Int8Array, row-major)
  occupancy: Int8Array;
  objects: Map<string, [number, number, string]>;
  robot: [number, number];
  trail: [number, number][];
  traveled: number;
  steps: number;
  frontiers: FrontierEntry[];
  priorities: Map<number, number>; // frontier id -> last known gain
  tour: number[];
  subgoal: number | null;
  selected: number | null;
  interventionLog: { step: number; frontier: number }[];
  end: EpisodeEnd | null;
}

export function emptyViewModel(): ViewModel {
  return {
    revision: -1,
    scenarioId: "",
    gridSize: 0,
    cellSize: 1,
    classNames: [],
    mode: "",
    status: "running",
    runMode: "paused",
    occupancy: new Int8Array(0),
    objects: new Map(),
    robot: [0, 0],
    trail: [],
    traveled: 0,
    steps: 0,
    frontiers: [],
    priorities: new Map(),
    tour: [],
    subgoal: null,
    selected: null,
    interventionLog: [],
    end: null,
  };
}

function applySpans(vm: ViewModel, spans: [number, number, number, number][]) {
  for (const [y, x0, len, v] of spans) {
    const base = y * vm.gridSize;
    for (let k = 0; k < len; k++) vm.occupancy[base + x0 + k] = v;
  }
}

function applyObjects(vm: ViewModel, objs: [number, number, string][]) {
  for (const [y, x, c] of objs) vm.objects.set(`${y},${x},${c}`, [y, x, c]);
}

export function applySnapshot(vm: ViewModel, m: Snapshot): ViewModel {
  vm.revision = m.revision;
  vm.scenarioId = m.scenario_id;
  vm.gridSize = m.grid_size;
  vm.cellSize = m.cell_size;
  vm.classNames = m.class_names;
  vm.mode = m.mode;
  vm.status = m.status;
  vm.runMode = m.run_mode;
  vm.occupancy = new Int8Array(m.grid_size * m.grid_size);
  vm.objects = new Map();
  vm.trail = [m.robot];
  vm.robot = m.robot;
  vm.traveled = m.traveled;
  vm.steps = m.steps;
  vm.frontiers = m.frontiers;
  vm.priorities = new Map(m.frontiers.map((f) => [f[0], f[3]]));
  vm.tour = m.tour;
  vm.subgoal = m.subgoal;
  vm.end = null;
  applySpans(vm, m.cells);
  applyObjects(vm, m.objects);
  return vm;
}

export function applyDelta(vm: ViewModel, m: Delta): ViewModel {
  if (m.revision <= vm.revision) return vm; // stale or duplicate
  vm.revision = m.revision;
  vm.status = m.status;
  vm.robot = m.robot;
  vm.trail.push(m.robot);
  vm.traveled = m.traveled;
  vm.steps = m.step;
  vm.frontiers = m.frontiers;
  for (const f of m.frontiers) vm.priorities.set(f[0], f[3]);
  vm.tour = m.tour;
  vm.subgoal = m.subgoal;
  if (m.intervention !== null) {
    vm.interventionLog.push({ step: m.step, frontier: m.intervention });
  }
  applySpans(vm, m.cells);
  applyObjects(vm, m.objects);
  if (vm.selected !== null && !m.frontiers.some((f) => f[0] === vm.selected)) {
    vm.selected = null; // the selected frontier vanished
  }
  return vm;
}

export function applyMessage(vm: ViewModel, m: ServerMessage): ViewModel {
  switch (m.type) {
    case "snapshot":
      return applySnapshot(vm, m);
    case "delta":
      return applyDelta(vm, m);
    case "episode_end":
      vm.revision = m.revision;
      vm.status = m.status;
      vm.end = m;
      return vm;
    default:
      return vm;
  }
}

export function replayLog(lines: string[]): ViewModel {
  const vm = emptyViewModel();
  for (const line of lines) {
    const t = line.trim();
    if (!t) continue;
    applyMessage(vm, JSON.parse(t) as ServerMessage);
  }
  return vm;
}
