// Bridge protocol v1: newline-delimited JSON messages.
// Server -> client: snapshot, delta, ack, error, episode_end.
// Client -> server: {cmd, id?, ...} with cmd in
//   pause | resume | step | reset | intervene | set_mode.

export type CellSpan = [number, number, number, number]; // y, x0, len, value
export type ObjectEntry = [number, number, string];      // y, x, class name
export type FrontierEntry = [number, number, number, number]; // id, y, x, gain

export interface Snapshot {
  type: "snapshot";
  format_version: number;
  revision: number;
  scenario_id: string;
  grid_size: number;
  cell_size: number;
  class_names: string[];
  mode: string;
  seed: number;
  status: string;
  robot: [number, number];
  traveled: number;
  steps: number;
  cells: CellSpan[];
  objects: ObjectEntry[];
  frontiers: FrontierEntry[];
  tour: number[];
  subgoal: number | null;
  run_mode: string;
}

export interface Delta {
  type: "delta";
  revision: number;
  step: number;
  status: string;
  robot: [number, number];
  traveled: number;
  cells: CellSpan[];
  objects: ObjectEntry[];
  frontiers: FrontierEntry[];
  tour: number[];
  subgoal: number | null;
  replanned: boolean;
  intervention: number | null;
}

export interface Ack {
  type: "ack";
  revision: number;
  id?: string;
  cmd: string;
}

export interface ErrorMsg {
  type: "error";
  revision: number;
  id?: string;
  error: string;
  message: string;
}

export interface EpisodeEnd {
  type: "episode_end";
  revision: number;
  status: string;
  steps: number;
  traveled: number;
  interventions: number;
  map_sha256: string;
  objects_sha256: string;
}

export type ServerMessage = Snapshot | Delta | Ack | ErrorMsg | EpisodeEnd;

export interface Command {
  cmd: "pause" | "resume" | "step" | "reset" | "intervene" | "set_mode";
  id?: string;
  n?: number;
  seed?: number;
  frontier_id?: number;
  run_mode?: string;
}

export function parseMessage(line: string): ServerMessage | null {
  const t = line.trim();
  if (!t) return null;
  return JSON.parse(t) as ServerMessage;
}
