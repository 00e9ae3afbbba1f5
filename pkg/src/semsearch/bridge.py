"""Live-episode service over a newline-delimited JSON TCP protocol.

One session owns one episode and a single event loop thread: client commands
are queued and applied in arrival order between simulation steps, so a human
in the loop never races the simulator. Every state change bumps a revision;
clients get a full snapshot on connect and deltas afterwards (broadcast),
while command acks/errors go only to the issuing client.

The delta stream is replayable: applying all cell spans and object reveals on
top of the snapshot reconstructs the final belief exactly, verified by the
occupancy/object checksums published in the episode_end message.
"""

from __future__ import annotations

import hashlib
import json
import queue
import socket
import threading
from dataclasses import dataclass

import numpy as np

from . import expert as exp
from .planner import Episode, EpisodeConfig
from .scenario import Scenario

PROTOCOL_VERSION = 1


class BridgeError(Exception):
    pass


class PortUnavailable(BridgeError):
    pass


class IllegalCommand(BridgeError):
    pass


def map_checksum(occupancy: np.ndarray) -> str:
    return hashlib.sha256(occupancy.astype("<i1").tobytes()).hexdigest()


def objects_checksum(entries) -> str:
    """entries: iterable of (y, x, class_name)."""
    canon = "\n".join(sorted(f"{y},{x},{c}" for (y, x, c) in entries))
    return hashlib.sha256(canon.encode()).hexdigest()


def cells_to_spans(cells) -> list:
    """Compress (y, x, val) triples into [y, x0, length, val] row spans."""
    spans = []
    for (y, x, v) in sorted(cells):
        if spans and spans[-1][0] == y and spans[-1][3] == v \
                and spans[-1][1] + spans[-1][2] == x:
            spans[-1][2] += 1
        else:
            spans.append([y, x, 1, v])
    return spans


def occupancy_spans(occupancy: np.ndarray) -> list:
    cells = [(int(y), int(x), int(occupancy[y, x]))
             for y, x in np.argwhere(occupancy != 0)]
    return cells_to_spans(cells)


@dataclass
class SessionConfig:
    mode: str = "coverage"
    seed: int = 0
    tick_interval: float = 0.05   # free-running pacing
    record_path: str | None = None    # message log for replay
    dataset_path: str | None = None   # human ChoiceRecords as a dataset


class Session:
    """Event loop around one Episode; thread-safe only via its queue."""

    def __init__(self, scenario: Scenario, ecfg: EpisodeConfig,
                 cfg: SessionConfig, model=None):
        self.scenario = scenario
        self.ecfg = ecfg
        self.cfg = cfg
        self.model = model
        self.revision = 0
        self.run_mode = "paused"
        self.pending_steps = 0
        self.commands: queue.Queue = queue.Queue()
        self.clients: list = []
        self.human_records: list = []
        self._record_file = open(cfg.record_path, "w") if cfg.record_path else None
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._ended_published = False
        self._reset_episode(cfg.seed)
        if self._record_file is not None:
            # the message log must start from a replayable full snapshot
            self._record_file.write(
                json.dumps(self.snapshot_message(), sort_keys=True) + "\n")
            self._record_file.flush()

    # -- episode management -------------------------------------------------

    def _reset_episode(self, seed: int) -> None:
        self.episode = Episode(self.scenario, self.ecfg, seed=seed,
                               model=self.model)
        self.seed = seed
        self._ended_published = False

    def snapshot_message(self) -> dict:
        ep = self.episode
        s = self.scenario
        return {
            "type": "snapshot",
            "format_version": PROTOCOL_VERSION,
            "revision": self.revision,
            "scenario_id": s.id,
            "grid_size": s.grid_size,
            "cell_size": s.cell_size,
            "class_names": list(s.class_names),
            "mode": self.cfg.mode,
            "seed": self.seed,
            "status": ep.status,
            "robot": list(ep.belief.robot_cell),
            "traveled": ep.belief.traveled,
            "steps": ep.steps,
            "cells": occupancy_spans(ep.belief.occupancy),
            "objects": self._object_entries(),
            "frontiers": self._frontier_entries(),
            "tour": list(ep.tour_ids),
            "subgoal": ep.subgoal,
            "run_mode": self.run_mode,
        }

    def _object_entries(self) -> list:
        s = self.scenario
        return [[int(s.obj_pos[i, 0]), int(s.obj_pos[i, 1]),
                 s.class_names[int(s.obj_class[i])]]
                for i in self.episode.belief.observed_order]

    def _frontier_entries(self) -> list:
        ep = self.episode
        return [[int(i), int(ep.graph.positions[i][0]),
                 int(ep.graph.positions[i][1]), round(ep.graph.gains[i], 6)]
                for i in sorted(set(ep._frontier_ids) - {ep.graph.robot_node})]

    # -- messaging ------------------------------------------------------------

    def _send(self, client, doc: dict) -> None:
        data = (json.dumps(doc, sort_keys=True) + "\n").encode()
        try:
            client.sendall(data)
        except OSError:
            self._drop(client)

    def _broadcast(self, doc: dict) -> None:
        if self._record_file is not None:
            self._record_file.write(json.dumps(doc, sort_keys=True) + "\n")
            self._record_file.flush()
        for c in list(self.clients):
            self._send(c, doc)

    def _drop(self, client) -> None:
        if client in self.clients:
            self.clients.remove(client)
        try:
            client.close()
        except OSError:
            pass

    # -- command handling -----------------------------------------------------

    def handle_command(self, doc: dict, client=None) -> None:
        cmd = doc.get("cmd")
        cid = doc.get("id")
        try:
            if cmd == "pause":
                self.run_mode = "paused"
            elif cmd == "resume":
                self._require_running()
                self.run_mode = "free_running"
            elif cmd == "step":
                self._require_running()
                self.run_mode = "stepping"
                self.pending_steps = int(doc.get("n", 1))
            elif cmd == "set_mode":
                mode = doc.get("run_mode")
                if mode not in ("paused", "stepping", "free_running"):
                    raise IllegalCommand(f"unknown run mode {mode!r}")
                if mode != "paused":
                    self._require_running()
                self.run_mode = mode
            elif cmd == "reset":
                self._reset_episode(int(doc.get("seed", self.seed)))
                self.run_mode = "paused"
                self.revision += 1
                self._broadcast(self.snapshot_message())
            elif cmd == "intervene":
                self._require_running()
                record = self.episode.intervene(int(doc["frontier_id"]),
                                                provenance="human",
                                                revision=self.revision)
                self.human_records.append(record)
            else:
                raise IllegalCommand(f"unknown command {cmd!r}")
        except (exp.InvalidIntervention, IllegalCommand, KeyError, ValueError) as e:
            if client is not None:
                self._send(client, {"type": "error", "revision": self.revision,
                                    "id": cid, "error": type(e).__name__,
                                    "message": str(e)})
            return
        if client is not None:
            self._send(client, {"type": "ack", "revision": self.revision,
                                "id": cid, "cmd": cmd})

    def _require_running(self) -> None:
        if self.episode.status != "running":
            raise IllegalCommand(f"episode is {self.episode.status}")

    # -- stepping -------------------------------------------------------------

    def _publish_step(self, rep) -> None:
        self.revision += 1
        doc = {
            "type": "delta",
            "revision": self.revision,
            "step": rep.step,
            "status": rep.status,
            "robot": list(rep.position),
            "traveled": self.episode.belief.traveled,
            "cells": cells_to_spans(rep.new_cells),
            "objects": [[int(self.scenario.obj_pos[i, 0]),
                         int(self.scenario.obj_pos[i, 1]),
                         self.scenario.class_names[int(self.scenario.obj_class[i])]]
                        for i in rep.new_objects],
            "frontiers": self._frontier_entries(),
            "tour": rep.tour,
            "subgoal": rep.subgoal,
            "replanned": rep.replanned,
            "intervention": rep.intervention,
        }
        self._broadcast(doc)

    def _publish_end(self) -> None:
        ep = self.episode
        self.revision += 1
        self._broadcast({
            "type": "episode_end",
            "revision": self.revision,
            "status": ep.status,
            "steps": ep.steps,
            "traveled": ep.belief.traveled,
            "interventions": ep.interventions,
            "map_sha256": map_checksum(ep.belief.occupancy),
            "objects_sha256": objects_checksum(
                (y, x, c) for (y, x, c) in self._object_entries()),
        })
        self._ended_published = True
        if self.cfg.dataset_path and self.human_records:
            exp.write_dataset(self.cfg.dataset_path, self.human_records, {
                "class_names": list(self.scenario.class_names),
                "provenance": "human",
                "scenario_id": self.scenario.id,
            })

    def loop_once(self, timeout: float = 0.05) -> None:
        """Process queued commands, then advance the episode if unpaused."""
        try:
            kind, payload = self.commands.get(timeout=timeout)
        except queue.Empty:
            kind, payload = None, None
        if kind == "command":
            doc, client = payload
            self.handle_command(doc, client)
        elif kind == "join":
            self.clients.append(payload)
            self._send(payload, self.snapshot_message())
        elif kind == "leave":
            self._drop(payload)

        advance = self.episode.status == "running" and (
            self.run_mode == "free_running"
            or (self.run_mode == "stepping" and self.pending_steps > 0))
        if advance:
            rep = self.episode.step()
            self._publish_step(rep)
            if self.run_mode == "stepping":
                self.pending_steps -= 1
                if self.pending_steps <= 0:
                    self.run_mode = "paused"
            if self._stop.wait(self.cfg.tick_interval):
                return
        if self.episode.status != "running" and not self._ended_published:
            self._publish_end()

    def run(self) -> None:
        while not self._stop.is_set():
            self.loop_once()

    def start(self) -> None:
        self._thread = threading.Thread(target=self.run, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
        if self._record_file is not None:
            self._record_file.close()


class BridgeServer:
    """TCP acceptor wiring client sockets into a session's event loop."""

    def __init__(self, session: Session, port: int = 0, host: str = "127.0.0.1"):
        self.session = session
        try:
            self._sock = socket.create_server((host, port))
        except OSError as e:
            raise PortUnavailable(f"cannot bind {host}:{port}: {e}") from e
        self.port = self._sock.getsockname()[1]
        self._accept_thread: threading.Thread | None = None
        self._stopping = threading.Event()

    def start(self) -> None:
        self.session.start()
        self._accept_thread = threading.Thread(target=self._accept_loop,
                                               daemon=True)
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                client, _addr = self._sock.accept()
            except OSError:
                return
            self.session.commands.put(("join", client))
            threading.Thread(target=self._reader, args=(client,),
                             daemon=True).start()

    def _reader(self, client) -> None:
        buf = b""
        while not self._stopping.is_set():
            try:
                chunk = client.recv(65536)
            except OSError:
                break
            if not chunk:
                break
            buf += chunk
            while b"\n" in buf:
                line, buf = buf.split(b"\n", 1)
                if not line.strip():
                    continue
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError:
                    continue
                self.session.commands.put(("command", (doc, client)))
        self.session.commands.put(("leave", client))

    def stop(self) -> None:
        self._stopping.set()
        try:
            self._sock.close()
        except OSError:
            pass
        self.session.stop()


def serve(scenario: Scenario, ecfg: EpisodeConfig, session_cfg: SessionConfig,
          port: int, model=None) -> BridgeServer:
    """Start a paused session listening on `port` (0 picks a free port)."""
    session = Session(scenario, ecfg, session_cfg, model=model)
    server = BridgeServer(session, port=port)
    server.start()
    return server


# ------------------------------------------------------------------- replay

def replay_messages(lines) -> dict:
    """Rebuild the belief from a snapshot + delta message stream.

    Returns the reconstructed occupancy checksum, object checksum, and the
    episode_end message (if present) for comparison.
    """
    occupancy = None
    objects = set()
    end = None
    for line in lines:
        if isinstance(line, (bytes, str)):
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
        else:
            doc = line
        if doc["type"] == "snapshot":
            occupancy = np.zeros((doc["grid_size"], doc["grid_size"]),
                                 dtype=np.int8)
            objects = set()
            for (y, x0, length, v) in doc["cells"]:
                occupancy[y, x0:x0 + length] = v
            for (y, x, c) in doc["objects"]:
                objects.add((y, x, c))
        elif doc["type"] == "delta":
            for (y, x0, length, v) in doc["cells"]:
                occupancy[y, x0:x0 + length] = v
            for (y, x, c) in doc["objects"]:
                objects.add((y, x, c))
        elif doc["type"] == "episode_end":
            end = doc
    return {
        "map_sha256": map_checksum(occupancy) if occupancy is not None else None,
        "objects_sha256": objects_checksum(objects),
        "episode_end": end,
    }
