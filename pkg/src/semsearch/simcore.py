"""Episode state machine: belief maps, sensing, motion, termination.

The belief occupancy grid uses -1 occupied / 0 unexplored / 1 free. Sensing
sweeps a dense fan of equally spaced rays through the ground-truth grid and
marks every swept cell within the sensing radius; objects become observed when
their cell is swept. Region labels of explored free cells are revealed from
ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .raycast import build_ray_fan, sweep_visible
from .scenario import Scenario


class SimError(Exception):
    pass


class IllegalMove(SimError):
    pass


@dataclass
class SimConfig:
    sensing_range: float = 2.5   # meters
    delta_max: float = 1.0       # meters, strict upper bound per action
    max_steps: int = 20000       # policy steps (edge traversals)
    sense_rays: int = 360

    def validate(self, cell_size: float) -> None:
        if self.sensing_range <= 0:
            raise ValueError("sensing_range must be > 0")
        if self.delta_max < cell_size * math.sqrt(2.0):
            raise ValueError("delta_max must be at least one cell diagonal")

    def range_cells(self, cell_size: float) -> float:
        return self.sensing_range / cell_size


@dataclass
class BeliefDelta:
    """What one sense() call revealed."""
    new_cells: list = field(default_factory=list)      # (y, x, value)
    new_objects: list = field(default_factory=list)    # scenario object indices


class WorldBelief:
    def __init__(self, scenario: Scenario):
        m = scenario.grid_size
        self.scenario = scenario
        self.occupancy = np.zeros((m, m), dtype=np.int8)
        self.region_of = np.full((m, m), -1, dtype=np.int32)
        self.observed_mask = np.zeros(len(scenario.objects), dtype=bool)
        self.observed_order: list = []
        self.robot_cell = tuple(scenario.start_cell)
        self.path_log = [self.robot_cell]
        self.traveled = 0.0
        self._sensed_from = np.zeros((m, m), dtype=bool)
        # per-region bookkeeping for semantic features
        self.region_object_count: dict = {}
        self.region_classes: dict = {}

    @property
    def observed_indices(self) -> list:
        return self.observed_order

    def explored_count(self) -> int:
        return int(np.count_nonzero(self.occupancy))

    def observed_objects(self):
        return [self.scenario.objects[i] for i in self.observed_order]


def sense(scenario: Scenario, belief: WorldBelief, position, config: SimConfig) -> BeliefDelta:
    """Reveal all ray-visible cells within range around `position`.

    Deterministic in (scenario, position); repeat senses from the same cell
    are no-ops. Rays are blocked by ground-truth occupied cells, which are
    themselves revealed as the blocker.
    """
    y, x = int(position[0]), int(position[1])
    if scenario.occupied[y, x]:
        raise SimError("sense position occupied in truth")
    delta = BeliefDelta()
    if belief._sensed_from[y, x]:
        return delta
    belief._sensed_from[y, x] = True
    fan = build_ray_fan(config.sense_rays, config.range_cells(scenario.cell_size))
    vis = sweep_visible(fan, scenario.occupied, y, x)
    new = vis & (belief.occupancy == 0)
    ys, xs = np.nonzero(new)
    vals = np.where(scenario.occupied[ys, xs], -1, 1).astype(np.int8)
    belief.occupancy[ys, xs] = vals
    free_sel = vals == 1
    belief.region_of[ys[free_sel], xs[free_sel]] = scenario.region_map[ys[free_sel], xs[free_sel]]
    delta.new_cells = list(zip(ys.tolist(), xs.tolist(), vals.tolist()))

    if len(scenario.objects):
        op = scenario.obj_pos
        r_cells = config.range_cells(scenario.cell_size)
        d = np.hypot(op[:, 0] - y, op[:, 1] - x)
        cand = np.nonzero((d <= r_cells + 1e-9) & ~belief.observed_mask
                          & vis[op[:, 0], op[:, 1]])[0]
        for oi in cand.tolist():
            belief.observed_mask[oi] = True
            belief.observed_order.append(oi)
            rid = int(scenario.region_map[op[oi, 0], op[oi, 1]])
            belief.region_object_count[rid] = belief.region_object_count.get(rid, 0) + 1
            belief.region_classes.setdefault(rid, set()).add(int(scenario.obj_class[oi]))
            delta.new_objects.append(int(oi))
    return delta


def apply_action(belief: WorldBelief, displacement_cells, config: SimConfig) -> tuple:
    """Move the robot by an integer cell displacement.

    The displacement magnitude (meters) must be strictly below delta_max and
    the destination must be known-free in the belief; violations raise
    IllegalMove (a planner bug, not an environment event).
    """
    dy, dx = int(displacement_cells[0]), int(displacement_cells[1])
    cell = belief.scenario.cell_size
    dist = math.hypot(dy, dx) * cell
    if dist >= config.delta_max:
        raise IllegalMove(f"|a| = {dist:.3f} m violates |a| < {config.delta_max} m")
    y, x = belief.robot_cell
    ny, nx = y + dy, x + dx
    m = belief.scenario.grid_size
    if not (0 <= ny < m and 0 <= nx < m) or belief.occupancy[ny, nx] != 1:
        raise IllegalMove(f"destination ({ny}, {nx}) not known-free")
    belief.robot_cell = (ny, nx)
    if (dy, dx) != (0, 0):
        belief.traveled += dist
        belief.path_log.append(belief.robot_cell)
    return belief.robot_cell


def check_termination(scenario: Scenario, belief: WorldBelief, frontier_count: int) -> str:
    """'found' once the target object is observed, 'exhausted' when no
    frontier remains, else 'running'."""
    if belief.observed_mask[scenario.target_object_index()]:
        return "found"
    if frontier_count == 0:
        return "exhausted"
    return "running"
