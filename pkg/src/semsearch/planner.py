"""Weighted minimum-latency frontier planning and the episode policy loop.

The tour objective is the priority-weighted sum of arrival latencies over all
frontiers plus the robot node at position 0. The solver is a large
neighborhood search: random destruction of up to 30% of the tour, cheapest
insertion repair, then best-improvement 2-opt, all with O(1) move evaluation
via prefix sums. A subset-DP exact solver covers small instances for
verification.

The episode loop follows the replan-on-change policy: the tour is re-solved
whenever the frontier set or any frontier's coverage gain changed beyond a
relative threshold; otherwise the robot advances through the current tour,
moving one graph edge per time step as a 4-connected cell walk with sensing
at every cell.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import expert as exp
from . import semantics as sem
from . import topo as topo_mod
from .raycast import walk_line
from .scenario import Scenario
from .simcore import SimConfig, WorldBelief, apply_action, sense

PLANNER_MODES = ("learned", "coverage", "oracle_priorities", "linear_oracle",
                 "oracle_interventions")


@dataclass
class LNSConfig:
    max_iters: int = 80
    destroy_fraction_max: float = 0.3
    stale_limit: int = 15
    time_budget: float | None = None  # seconds; None keeps runs deterministic


@dataclass
class PlannerConfig:
    alpha: float = 0.25
    mode: str = "learned"
    lns: LNSConfig = field(default_factory=LNSConfig)

    def validate(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.mode not in PLANNER_MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.lns.destroy_fraction_max > 0.3 + 1e-9:
            raise ValueError("destroy_fraction_max above 0.3")


@dataclass
class Tour:
    order: list           # node ids, order[0] = robot node
    cost: float
    history: list | None = None  # best-cost-so-far per LNS iteration


def compute_priorities(p: np.ndarray, gains: np.ndarray, alpha: float,
                       mode: str) -> np.ndarray:
    """Eq-style planner priority: (p / p_max + alpha) * gain.

    Coverage mode scores by gain alone; a degenerate all-zero p reduces the
    learned modes to the coverage baseline scaled by alpha.
    """
    gains = np.asarray(gains, dtype=np.float64)
    if mode == "coverage":
        return gains.copy()
    p = np.asarray(p, dtype=np.float64)
    pmax = p.max() if len(p) else 0.0
    pn = p / pmax if pmax > 0 else np.zeros_like(p)
    return (pn + alpha) * gains


def planner_priority(p_value: float, p_max: float, gain: float, alpha: float) -> float:
    """Scalar form of the priority heuristic for a single frontier."""
    pn = p_value / p_max if p_max > 0 else 0.0
    return (pn + alpha) * gain


def tour_cost(order: np.ndarray, D: np.ndarray, P: np.ndarray) -> float:
    """Priority-weighted sum of arrival latencies; order[0] is the start."""
    t = np.asarray(order)
    steps = D[t[:-1], t[1:]]
    lat = np.cumsum(steps)
    return float(np.dot(P[t[1:]], lat))


def solve_exact(D: np.ndarray, P: np.ndarray) -> Tour:
    """Global optimum by subset dynamic programming (start fixed at index 0).

    The remaining-cost of a suffix is affine in the current latency, so
    states (visited set, last node) suffice. Intended for up to 10 frontiers.
    """
    m = D.shape[0]
    if m - 1 > 10:
        raise ValueError("solve_exact is limited to 10 frontiers")
    if m == 1:
        return Tour([0], 0.0)
    nodes = list(range(1, m))
    total_p = P[1:].sum()
    full = (1 << (m - 1)) - 1
    INF = float("inf")
    # g[(mask, last)]: best added cost to visit complement(mask) starting at
    # `last` with zero accumulated latency; every future node's latency grows
    # by each traversed edge, weighted by the priorities still unvisited.
    g = {}

    def rem_p(mask):
        s = 0.0
        for k, v in enumerate(nodes):
            if not mask & (1 << k):
                s += P[v]
        return s

    def best(mask, last):
        if mask == full:
            return 0.0, -1
        key = (mask, last)
        if key in g:
            return g[key]
        res, arg = INF, -1
        rp = rem_p(mask)
        for k, v in enumerate(nodes):
            if mask & (1 << k):
                continue
            step = D[last, v]
            cand = step * rp + best(mask | (1 << k), v)[0]
            if cand < res - 1e-15:
                res, arg = cand, v
        g[key] = (res, arg)
        return g[key]

    # seed: from robot node 0, all nodes unvisited
    res, first = INF, -1
    for k, v in enumerate(nodes):
        cand = D[0, v] * total_p + best(1 << k, v)[0]
        if cand < res - 1e-15:
            res, first = cand, v
    order = [0, first]
    mask = 1 << nodes.index(first)
    last = first
    while mask != full:
        _, nxt = best(mask, last)
        order.append(nxt)
        mask |= 1 << nodes.index(nxt)
        last = nxt
    return Tour(order, tour_cost(np.array(order), D, P))


class _TourState:
    """Mutable tour with prefix sums enabling batched move-delta evaluation."""

    def __init__(self, order, D, P):
        self.D = D
        self.P = P
        self.t = np.asarray(order, dtype=np.intp)
        self._refresh()

    def _refresh(self):
        t, D, P = self.t, self.D, self.P
        self.L = np.zeros(len(t))
        if len(t) > 1:
            self.L[1:] = np.cumsum(D[t[:-1], t[1:]])
        self.PT = P[t]
        self.PT[0] = 0.0
        self.PS = np.cumsum(self.PT)                  # prefix sums of P
        self.PLS = np.cumsum(self.PT * self.L)        # prefix sums of P * latency

    def cost(self) -> float:
        return float(self.PLS[-1])

    def insertion_deltas(self, x: int) -> np.ndarray:
        """Cost delta of inserting node x before each position 1..len(t)."""
        return self.insertion_delta_matrix(np.array([x]))[:, 0]

    def insertion_delta_matrix(self, xs: np.ndarray) -> np.ndarray:
        """deltas[k-1, j]: cost of inserting xs[j] at position k in 1..len(t).

        The inserted node pays its own priority times its arrival latency;
        every node after the insertion point shifts by the detour length.
        """
        t, D, L = self.t, self.D, self.L
        q = len(t)
        d_prev = D[t][:, xs]                      # [q, k]
        new_lat = L[:, None] + d_prev
        deltas = self.P[xs][None, :] * new_lat
        if q > 1:
            shift = d_prev[:-1] + D[xs][:, t[1:]].T - D[t[:-1], t[1:]][:, None]
            deltas[:-1] += shift * (self.PS[-1] - self.PS[:-1])[:, None]
        return deltas

    def insert(self, x: int, pos: int) -> None:
        self.t = np.insert(self.t, pos, x)
        self._refresh()

    def remove_positions(self, positions) -> list:
        removed = self.t[list(positions)].tolist()
        self.t = np.delete(self.t, list(positions))
        self._refresh()
        return removed

    def two_opt_delta_matrix(self) -> np.ndarray:
        """delta[i, j] of reversing t[i..j]; +inf where not a valid move.

        Within the reversed block only arrival latencies permute (the edge
        set is unchanged); nodes after j shift by the two-edge detour.
        """
        t, D, L = self.t, self.D, self.L
        m = len(t)
        Dt = D[t][:, t]
        # row r corresponds to i = r + 1
        base = L[: m - 1, None] + Dt[: m - 1, :]       # L[i-1] + D[t[i-1], t[j]]
        seg_p = self.PS[None, :] - self.PS[: m - 1, None]
        seg_pl = self.PLS[None, :] - self.PLS[: m - 1, None]
        delta = (base + L[None, :]) * seg_p - 2.0 * seg_pl
        # tail shift for j < m-1: nodes after j move by the detour length
        edge_i = Dt[np.arange(m - 1), np.arange(1, m)]  # D[t[i-1], t[i]]
        dd = (Dt[: m - 1, : m - 1] + Dt[1:, 1:]
              - edge_i[:, None] - edge_i[None, :])
        delta[:, : m - 1] += dd * (self.PS[-1] - self.PS[: m - 1])[None, :]
        ii = np.arange(1, m)[:, None]
        jj = np.arange(m)[None, :]
        return np.where(jj >= ii + 1, delta, np.inf)

    def two_opt_pass(self) -> bool:
        """Apply the best improving 2-opt move; False when locally optimal."""
        m = len(self.t)
        if m < 3:
            return False
        delta = self.two_opt_delta_matrix()
        k = int(np.argmin(delta))
        r, j = divmod(k, m)
        i = r + 1
        if delta[r, j] >= -1e-9:
            return False
        self.t[i:j + 1] = self.t[i:j + 1][::-1]
        self._refresh()
        return True

    def two_opt(self, max_passes: int = 400) -> None:
        for _ in range(max_passes):
            if not self.two_opt_pass():
                break


def _cheapest_insertion(state: _TourState, nodes: list) -> None:
    """Insert `nodes` greedily, always applying the globally cheapest
    (node, position); ties resolve by node id then position."""
    pending = sorted(nodes)
    while pending:
        xs = np.array(pending)
        deltas = state.insertion_delta_matrix(xs)   # [positions, nodes]
        k = int(np.argmin(deltas.T))                # node id first, then position
        ji, pos = divmod(k, deltas.shape[0])
        state.insert(int(xs[ji]), pos + 1)
        pending.pop(ji)


def greedy_tour(D: np.ndarray, P: np.ndarray) -> np.ndarray:
    state = _TourState([0], D, P)
    _cheapest_insertion(state, list(range(1, D.shape[0])))
    return state.t.copy()


def solve_lns(D: np.ndarray, P: np.ndarray, cfg: LNSConfig,
              rng: np.random.Generator, warm_order=None,
              track_history: bool = False) -> Tour:
    """Destroy/repair/2-opt search over tours starting at index 0.

    Returns the best tour found; never worse than the greedy construction or
    the (sanitized) warm start, and 2-opt locally optimal.
    """
    m = D.shape[0]
    if m <= 2:
        order = list(range(m))
        return Tour(order, tour_cost(np.array(order), D, P),
                    [tour_cost(np.array(order), D, P)] if track_history else None)

    state = _TourState(greedy_tour(D, P), D, P)
    if warm_order is not None:
        keep = [0] + [v for v in warm_order if 0 < v < m]
        seen = set()
        keep = [v for v in keep if not (v in seen or seen.add(v))]
        missing = [v for v in range(1, m) if v not in seen]
        ws = _TourState(keep, D, P)
        if missing:
            _cheapest_insertion(ws, missing)
        if ws.cost() < state.cost():
            state = ws
    state.two_opt()
    best = state.t.copy()
    best_cost = state.cost()

    history = [best_cost]
    n_free = m - 1
    max_destroy = max(1, int(cfg.destroy_fraction_max * n_free))
    stale = 0
    t0 = time.monotonic()
    for _ in range(cfg.max_iters):
        if cfg.time_budget is not None and time.monotonic() - t0 > cfg.time_budget:
            break
        if stale >= cfg.stale_limit:
            break
        cur = _TourState(best.copy(), D, P)
        q = int(rng.integers(1, max_destroy + 1))
        positions = 1 + rng.permutation(n_free)[:q]
        removed = cur.remove_positions(sorted(int(p) for p in positions))
        _cheapest_insertion(cur, removed)
        cur.two_opt()
        if cur.cost() < best_cost - 1e-12:
            best = cur.t.copy()
            best_cost = cur.cost()
            stale = 0
        else:
            stale += 1
        history.append(best_cost)
    return Tour(best.tolist(), best_cost, history if track_history else None)


# ----------------------------------------------------------------- episode

@dataclass
class EpisodeConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    topo: topo_mod.TopoConfig = field(default_factory=topo_mod.TopoConfig)
    sem: sem.SemanticsConfig = field(default_factory=sem.SemanticsConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)


@dataclass
class StepReport:
    step: int
    position: tuple
    new_cells: list
    new_objects: list
    subgoal: int | None
    tour: list | None
    replanned: bool
    intervention: int | None
    status: str


class Episode:
    """One target-search episode: owns belief, graph, planner state.

    Deterministic for fixed (scenario, mode, weights, seed). The `step`
    method executes one policy iteration (one graph-edge traversal).
    """

    def __init__(self, scenario: Scenario, cfg: EpisodeConfig, seed: int = 0,
                 model: sem.PriorityModel | None = None,
                 oracle_policy: exp.OraclePolicy | None = None,
                 oracle_params: exp.ExpertParams | None = None,
                 target_enabled: bool = True,
                 record_choices: bool = False,
                 snapshot_replans: bool = False):
        cfg.planner.validate()
        cfg.sim.validate(scenario.cell_size)
        mode = cfg.planner.mode
        if mode in ("learned", "linear_oracle") and model is None:
            raise ValueError(f"mode {mode!r} needs a priority model")
        if mode in ("oracle_priorities", "oracle_interventions") and oracle_policy is None:
            raise ValueError(f"mode {mode!r} needs an oracle policy")
        if mode == "oracle_interventions" and oracle_params is None:
            oracle_params = exp.ExpertParams()
        if oracle_params is not None:
            oracle_params.validate()

        if cfg.topo.gain_range is None:
            cfg = replace(cfg, topo=replace(
                cfg.topo, gain_range=cfg.sim.range_cells(scenario.cell_size)))
        self.scenario = scenario
        self.cfg = cfg
        self.mode = mode
        self.model = model
        self.oracle_policy = oracle_policy
        self.oracle_params = oracle_params
        self.target_enabled = target_enabled
        self.record_choices = record_choices
        self.snapshot_replans = snapshot_replans

        self.rng = np.random.default_rng(seed)
        self.seed = seed
        self.belief = WorldBelief(scenario)
        self.graph = topo_mod.TopoGraph()
        self.graph.robot_node = self.graph.add_node(scenario.start_cell)
        self.steps = 0
        self.status = "running"
        self.tour_ids: list = []
        self.subgoal: int | None = None
        self.override_subgoal: int | None = None
        self.interventions = 0
        self.choice_records: list = []
        self.replan_snapshots: list = []   # candidate sets at each replan
        self._prev_frontier_ids: frozenset | None = None
        self._gain_snapshot: dict = {}
        self._frontier_ids: list = []
        self._force_replan = True

        delta = sense(scenario, self.belief, scenario.start_cell, cfg.sim)
        self._perception_update(delta.new_cells)
        self._found_check()

    # -- perception -------------------------------------------------------

    def _perception_update(self, changed_cells) -> None:
        new_free = [(y, x) for (y, x, v) in changed_cells if v == 1]
        added = topo_mod.expand_graph(self.belief, self.graph, self.rng,
                                      self.cfg.topo, new_free)
        topo_mod.update_gains(self.belief, self.graph, self.cfg.topo,
                              changed_cells, added)
        self._frontier_ids = self.graph.frontier_ids(self.cfg.topo.gain_threshold)
        if not self._frontier_ids:
            seeded = topo_mod.seed_boundary_nodes(self.belief, self.graph, self.cfg.topo)
            if seeded:
                topo_mod.update_gains(self.belief, self.graph, self.cfg.topo, [], seeded)
                self._frontier_ids = self.graph.frontier_ids(self.cfg.topo.gain_threshold)

    def _found_check(self) -> bool:
        if self.target_enabled and \
                self.belief.observed_mask[self.scenario.target_object_index()]:
            self.status = "found"
            return True
        return False

    # -- candidate snapshots ------------------------------------------------

    def frontier_candidates(self) -> list:
        """FrontierSnapshots of the current frontier set from the robot node."""
        ids = sorted(set(self._frontier_ids) - {self.graph.robot_node})
        if not ids:
            return []
        fl = topo_mod.frontiers(self.belief, self.graph, self.cfg.topo)
        by_id = {f.node_id: f for f in fl}
        nodes = [self.graph.robot_node] + ids
        D = topo_mod.distance_matrix(self.graph, nodes)
        dists = D[0, 1:]
        params = self.oracle_params or exp.ExpertParams()
        disc = exp.discounts(dists, params)
        out = []
        for k, fid in enumerate(ids):
            f = by_id[fid]
            fv = sem.feature_vector(self.belief, f, self.cfg.sem)
            r_loc_cells = self.cfg.sem.r_loc / self.scenario.cell_size
            loc = sem.local_semantic(self.belief, f.position, r_loc_cells)
            reg = sem.region_semantic(self.belief, f.region_id,
                                      len(self.scenario.class_names))
            out.append(exp.FrontierSnapshot(
                node_id=fid, position=f.position, region_id=f.region_id,
                gain=f.coverage_gain, dist=float(dists[k]),
                discount=float(disc[k]), phi=fv.phi, phi_local=loc,
                phi_region=reg,
                phi_aug=sem.augmented_features(fv, f.coverage_gain, float(disc[k])),
            ))
        self._last_D = D
        self._last_nodes = nodes
        return out

    # -- planning -----------------------------------------------------------

    def _replan_needed(self) -> bool:
        if self._force_replan:
            return True
        cur = frozenset(self._frontier_ids)
        if cur != self._prev_frontier_ids:
            return True
        rel = self.cfg.topo.gain_change_rel
        for fid in self._frontier_ids:
            old = self._gain_snapshot.get(fid)
            if old is None:
                return True
            if abs(self.graph.gains[fid] - old) / old > rel:
                return True
        return False

    def _priorities(self, candidates: list) -> np.ndarray:
        gains = np.array([c.gain for c in candidates])
        if self.mode in ("coverage", "oracle_interventions"):
            return compute_priorities(np.zeros(len(candidates)), gains,
                                      self.cfg.planner.alpha, "coverage")
        if self.mode in ("learned", "linear_oracle"):
            p = np.array([sem.priority(self.model,
                                       sem.FeatureVector(c.phi[:-1], c.phi[-1]))
                          for c in candidates])
        elif self.mode == "oracle_priorities":
            p = self.oracle_policy.priorities(candidates)
        else:
            raise ValueError(f"unhandled mode {self.mode!r}")
        return compute_priorities(p, gains, self.cfg.planner.alpha, self.mode)

    def _replan(self) -> tuple:
        candidates = self.frontier_candidates()
        if not candidates:
            return None, None
        nodes = self._last_nodes
        D = self._last_D
        P = np.zeros(len(nodes))
        P[1:] = self._priorities(candidates)
        warm = None
        if self.tour_ids:
            id_to_idx = {nid: i for i, nid in enumerate(nodes)}
            warm = [id_to_idx[v] for v in self.tour_ids if v in id_to_idx]
        tour = solve_lns(D, P, self.cfg.planner.lns, self.rng, warm_order=warm)
        self.tour_ids = [nodes[i] for i in tour.order]
        self._prev_frontier_ids = frozenset(self._frontier_ids)
        self._gain_snapshot = {fid: self.graph.gains[fid]
                               for fid in self._frontier_ids}
        if self.snapshot_replans:
            self.replan_snapshots.append(candidates)
        return candidates, tour

    def _maybe_intervene(self, candidates: list) -> int | None:
        """Oracle watches each replan; may override the current subgoal.

        While a previous intervention is still being executed the oracle
        holds off (occasional guidance, not step-by-step teleoperation)."""
        if self.mode != "oracle_interventions" or len(candidates) < 2:
            return None
        if self.override_subgoal is not None:
            return None
        planner_choice = self.subgoal
        if planner_choice is None:
            return None
        choice = exp.oracle_decide(candidates, planner_choice, self.oracle_policy,
                                   self.oracle_params, self.rng)
        if choice is None:
            return None
        self.interventions += 1
        if self.record_choices:
            self.choice_records.append(exp.record_choice(
                self.scenario.id, self.steps, choice, candidates,
                provenance="oracle"))
        return choice

    def intervene(self, node_id: int, provenance: str = "human",
                  revision: int | None = None) -> exp.ChoiceRecord:
        """External (human) intervention on the current frontier set."""
        if node_id not in self._frontier_ids:
            raise exp.InvalidIntervention(
                f"node {node_id} is not a current frontier")
        candidates = self.frontier_candidates()
        record = exp.record_choice(self.scenario.id, self.steps, node_id,
                                   candidates, provenance=provenance,
                                   revision=revision)
        self.choice_records.append(record)
        self.interventions += 1
        self.override_subgoal = int(node_id)
        self.subgoal = int(node_id)
        return record

    # -- one policy iteration ----------------------------------------------

    def step(self) -> StepReport:
        if self.status != "running":
            raise RuntimeError(f"episode already terminal: {self.status}")
        replanned = False
        intervention = None

        if not self._frontier_ids:
            self.status = "exhausted"
            return self._report([], [], replanned, intervention)

        if self.override_subgoal is not None:
            if (self.override_subgoal not in self._frontier_ids
                    or self.graph.robot_node == self.override_subgoal):
                self.override_subgoal = None

        if self._replan_needed():
            candidates, tour = self._replan()
            replanned = True
            self._force_replan = False
            if candidates is None:
                self.status = "exhausted"
                return self._report([], [], replanned, intervention)
            if self.override_subgoal is None:
                self.subgoal = self.tour_ids[1] if len(self.tour_ids) > 1 else None
            intervention = self._maybe_intervene(candidates)
            if intervention is not None:
                self.override_subgoal = intervention
                self.subgoal = intervention
        elif self.graph.robot_node == self.subgoal and self.override_subgoal is None:
            if self.subgoal in self.tour_ids:
                pos = self.tour_ids.index(self.subgoal)
            else:  # subgoal was an override; rejoin the tour from its head
                pos = 0
            if pos + 1 < len(self.tour_ids):
                self.subgoal = self.tour_ids[pos + 1]
            else:
                self._force_replan = True
                return self._report([], [], replanned, intervention)

        if self.subgoal is None:
            self._force_replan = True
            return self._report([], [], replanned, intervention)

        path, _ = topo_mod.shortest_path(self.graph, self.graph.robot_node,
                                         self.subgoal, self.scenario.cell_size)
        new_cells: list = []
        new_objects: list = []
        if len(path) > 1:
            new_cells, new_objects = self._traverse_edge(path[0], path[1])
        self.steps += 1
        self._perception_update(new_cells)
        self._found_check()
        if self.status == "running" and self.steps >= self.cfg.sim.max_steps:
            self.status = "budget"
        return self._report(new_cells, new_objects, replanned, intervention)

    def _traverse_edge(self, a: int, b: int) -> tuple:
        """Walk the 4-connected refinement of edge (a, b), sensing per cell."""
        (ya, xa), (yb, xb) = self.graph.positions[a], self.graph.positions[b]
        cells = walk_line(ya, xa, yb, xb)
        new_cells: list = []
        new_objects: list = []
        for (y, x) in cells[1:]:
            cy, cx = self.belief.robot_cell
            apply_action(self.belief, (y - cy, x - cx), self.cfg.sim)
            d = sense(self.scenario, self.belief, (y, x), self.cfg.sim)
            new_cells.extend(d.new_cells)
            new_objects.extend(d.new_objects)
            if self._found_check():
                break
        if self.belief.robot_cell == (yb, xb):
            self.graph.robot_node = b
        return new_cells, new_objects

    def _report(self, new_cells, new_objects, replanned, intervention) -> StepReport:
        return StepReport(
            step=self.steps, position=self.belief.robot_cell,
            new_cells=new_cells, new_objects=new_objects,
            subgoal=self.subgoal, tour=list(self.tour_ids),
            replanned=replanned, intervention=intervention, status=self.status)

    def run(self, trace_sink=None) -> str:
        if trace_sink is not None:
            trace_sink({"type": "header", "scenario_id": self.scenario.id,
                        "mode": self.mode, "seed": self.seed})
        while self.status == "running":
            rep = self.step()
            if trace_sink is not None:
                trace_sink({
                    "type": "step", "step": rep.step,
                    "pos": list(rep.position), "new_cells": len(rep.new_cells),
                    "new_objects": rep.new_objects, "subgoal": rep.subgoal,
                    "tour": rep.tour, "replanned": rep.replanned,
                    "intervention": rep.intervention,
                })
        if trace_sink is not None:
            trace_sink({"type": "end", "status": self.status,
                        "steps": self.steps,
                        "traveled": self.belief.traveled,
                        "interventions": self.interventions})
        return self.status


class TraceWriter:
    """Append-only JSONL episode trace."""

    def __init__(self, path):
        self._f = open(path, "w")

    def __call__(self, doc: dict) -> None:
        self._f.write(json.dumps(doc, sort_keys=True) + "\n")

    def close(self) -> None:
        self._f.close()
