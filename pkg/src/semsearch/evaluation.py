"""Experiment harness: batch episodes, PLR/SPL metrics, ablations.

Episodes across (scenario x mode x training seed) run as independent jobs in
a process pool and are reduced single-threaded. The per-scenario step budget
is derived from a coverage-mode full-exploration probe; probe and episode
results can be cached on disk keyed by the full task signature. Result rows
are sorted before writing so identical seeds give byte-identical tables.
"""

from __future__ import annotations

import collections
import hashlib
import json
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import yaml

from . import expert as exp
from . import semantics as sem
from .planner import Episode, EpisodeConfig
from .raycast import build_ray_fan, sweep_visible
from .scenario import Scenario

RESULTS_FORMAT_VERSION = 1


@dataclass
class EvalConfig:
    jobs: int = 2
    suite_seed: int = 0
    budget_factor: float = 4.0
    default_max_steps: int = 20000
    cache_dir: str | None = None


@dataclass
class EpisodeResult:
    scenario_id: str
    mode: str
    seed: int
    outcome: str
    path_length: float
    shortest: float
    steps: int
    interventions: int
    spl: float = 0.0
    plr: float | None = None


def grid_bfs(free: np.ndarray, start) -> np.ndarray:
    """4-connected BFS cell distances from start; -1 where unreachable."""
    m, n = free.shape
    dist = np.full((m, n), -1, dtype=np.int32)
    dq = collections.deque([start])
    dist[start] = 0
    while dq:
        y, x = dq.popleft()
        d = dist[y, x] + 1
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ny, nx = y + dy, x + dx
            if 0 <= ny < m and 0 <= nx < n and free[ny, nx] and dist[ny, nx] < 0:
                dist[ny, nx] = d
                dq.append((ny, nx))
    return dist


def observation_cells(scenario: Scenario, sim_cfg) -> np.ndarray:
    """Mask of free cells from which the target object is observable.

    Ray visibility is symmetric for the equally spaced fan, so one sweep from
    the target cell suffices.
    """
    oi = scenario.target_object_index()
    o = scenario.objects[oi]
    fan = build_ray_fan(sim_cfg.sense_rays, sim_cfg.range_cells(scenario.cell_size))
    vis = sweep_visible(fan, scenario.occupied, o.y, o.x)
    return vis & scenario.free_mask()


def shortest_observation_distance(scenario: Scenario, sim_cfg) -> float:
    """Meters from start to the nearest target-observing cell (grid BFS)."""
    obs = observation_cells(scenario, sim_cfg)
    dist = grid_bfs(scenario.free_mask(), tuple(scenario.start_cell))
    cand = dist[obs & (dist >= 0)]
    if not len(cand):
        raise ValueError(f"{scenario.id}: target unobservable from start component")
    return float(cand.min()) * scenario.cell_size


def plr(l_sem: float, l_cov: float) -> float:
    """Path length ratio to coverage; below 1 means faster than coverage."""
    if l_sem <= 0 or l_cov <= 0:
        raise ValueError("path lengths must be positive")
    return l_sem / l_cov


def spl(found: bool, l: float, l_star: float) -> float:
    """Success weighted by path length in [0, 1]; 1 is a shortest path."""
    if not found:
        return 0.0
    return l_star / max(l, l_star)


def episode_seed(suite_seed: int, scenario_id: str) -> int:
    """Stable per-scenario stream seed, identical across planner modes."""
    return zlib.crc32(f"{suite_seed}:{scenario_id}".encode()) & 0x7FFFFFFF


def _mode_objects(spec: dict, scenario: Scenario):
    model = None
    policy = None
    params = None
    if "w" in spec:
        model = sem.PriorityModel(np.asarray(spec["w"], dtype=np.float64),
                                  float(spec.get("w_I", 0.0)),
                                  sem.feature_names(scenario.class_names))
    if spec["mode"] in ("oracle_priorities", "oracle_interventions"):
        o = spec.get("oracle", {})
        policy = exp.OraclePolicy(
            kind=o.get("kind", "room_table"),
            table=exp.RoomPriorityTable(**o.get("table", {})),
            w_gain=o.get("w_gain", 0.02),
            class_names=list(scenario.class_names),
            target_class=scenario.target_class,
            characteristic=o.get("characteristic", exp.DEFAULT_CHARACTERISTIC),
            w=np.asarray(o["w"], dtype=np.float64) if "w" in o else None,
        )
        params = exp.ExpertParams(**o.get("params", {}))
    return model, policy, params


def run_episode_task(task: dict) -> dict:
    """One fully described episode; safe to run in a worker process."""
    scenario: Scenario = task["scenario"]
    spec = task["mode_spec"]
    ecfg: EpisodeConfig = task["ecfg"]
    ecfg = replace(ecfg, planner=replace(ecfg.planner, mode=spec["mode"]),
                   sim=replace(ecfg.sim, max_steps=task["max_steps"]))
    model, policy, params = _mode_objects(spec, scenario)
    ep = Episode(scenario, ecfg, seed=task["seed"], model=model,
                 oracle_policy=policy, oracle_params=params,
                 target_enabled=task.get("target_enabled", True),
                 record_choices=task.get("record_choices", False))
    status = ep.run()
    free = scenario.free_mask()
    reach = grid_bfs(free, tuple(scenario.start_cell)) >= 0
    explored = (ep.belief.occupancy == 1) & reach
    out = {
        "scenario_id": scenario.id,
        "mode": spec["name"],
        "mode_kind": spec["mode"],
        "seed": int(spec.get("train_seed", 0)),
        "outcome": status,
        "path_length": round(ep.belief.traveled, 9),
        "steps": ep.steps,
        "interventions": ep.interventions,
        "reachable_free": int(reach.sum()),
        "explored_free": int(explored.sum()),
    }
    if task.get("record_choices"):
        out["records"] = ep.choice_records
    return out


def _task_key(task: dict) -> str:
    spec = dict(task["mode_spec"])
    sig = {
        "scenario": task["scenario"].id,
        "spec": {k: (list(map(float, v)) if isinstance(v, (list, np.ndarray)) else v)
                 for k, v in spec.items() if k != "oracle"},
        "oracle": json.dumps(spec.get("oracle", {}), sort_keys=True, default=str),
        "seed": task["seed"],
        "max_steps": task["max_steps"],
        "target_enabled": task.get("target_enabled", True),
        "ecfg": repr(task["ecfg"]),
    }
    return hashlib.sha1(json.dumps(sig, sort_keys=True, default=str).encode()).hexdigest()


def run_tasks(tasks: list, jobs: int, cache_dir: str | None = None) -> list:
    """Execute episode tasks, optionally memoized on disk; order-preserving."""
    results: list = [None] * len(tasks)
    todo = []
    keys = []
    for i, t in enumerate(tasks):
        key = _task_key(t) if cache_dir else None
        keys.append(key)
        if cache_dir:
            p = os.path.join(cache_dir, key + ".json")
            if os.path.exists(p):
                with open(p) as f:
                    results[i] = json.load(f)
                continue
        todo.append(i)
    if todo:
        if jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for i, res in zip(todo, pool.map(run_episode_task,
                                                 [tasks[i] for i in todo])):
                    results[i] = res
        else:
            for i in todo:
                results[i] = run_episode_task(tasks[i])
        if cache_dir:
            os.makedirs(cache_dir, exist_ok=True)
            for i in todo:
                if "records" in results[i]:
                    continue  # choice records are not JSON-cacheable
                with open(os.path.join(cache_dir, keys[i] + ".json"), "w") as f:
                    json.dump(results[i], f, sort_keys=True)
    return results


def exploration_budgets(scenarios: list, ecfg: EpisodeConfig,
                        cfg: EvalConfig) -> dict:
    """Per-scenario step budget: budget_factor x coverage full exploration."""
    tasks = [{
        "scenario": s,
        "mode_spec": {"name": "coverage_probe", "mode": "coverage"},
        "ecfg": ecfg,
        "seed": episode_seed(cfg.suite_seed, s.id),
        "max_steps": cfg.default_max_steps,
        "target_enabled": False,
    } for s in scenarios]
    probes = run_tasks(tasks, cfg.jobs, cfg.cache_dir)
    out = {}
    for s, p in zip(scenarios, probes):
        out[s.id] = max(50, int(cfg.budget_factor * p["steps"]))
    return out


def run_suite(scenarios: list, mode_specs: list, ecfg: EpisodeConfig,
              cfg: EvalConfig, out_dir: str | None = None) -> tuple:
    """Cross product of scenarios x mode specs; returns (results, summary).

    PLR pairs every non-coverage episode with the coverage episode of the
    same scenario (identical episode seed; only the priority function
    differs). Rows come back sorted by (scenario, mode, seed).
    """
    sims = {s.id: s for s in scenarios}
    budgets = exploration_budgets(scenarios, ecfg, cfg)
    l_star = {s.id: shortest_observation_distance(s, ecfg.sim) for s in scenarios}

    tasks = []
    for s in scenarios:
        for spec in mode_specs:
            tasks.append({
                "scenario": s,
                "mode_spec": spec,
                "ecfg": ecfg,
                "seed": episode_seed(cfg.suite_seed, s.id),
                "max_steps": budgets[s.id],
                "target_enabled": True,
            })
    raw = run_tasks(tasks, cfg.jobs, cfg.cache_dir)

    cov_len: dict = {}
    for r in raw:
        if r["mode_kind"] == "coverage" and r["outcome"] == "found":
            cov_len.setdefault(r["scenario_id"], r["path_length"])

    results = []
    for r in raw:
        s = sims[r["scenario_id"]]
        found = r["outcome"] == "found"
        res = EpisodeResult(
            scenario_id=r["scenario_id"], mode=r["mode"], seed=r["seed"],
            outcome=r["outcome"], path_length=r["path_length"],
            shortest=round(l_star[s.id], 9), steps=r["steps"],
            interventions=r["interventions"],
            spl=round(spl(found, r["path_length"], l_star[s.id]), 9),
        )
        if found and r["scenario_id"] in cov_len:
            res.plr = round(plr(r["path_length"], cov_len[r["scenario_id"]]), 9)
        results.append(res)
    results.sort(key=lambda r: (r.scenario_id, r.mode, r.seed))
    summary = summarize(results)
    if out_dir:
        write_results(out_dir, results, summary)
    return results, summary


def summarize(results: list) -> dict:
    by_mode: dict = collections.defaultdict(list)
    for r in results:
        by_mode[r.mode].append(r)
    out = {"format_version": RESULTS_FORMAT_VERSION, "modes": {}}
    for mode in sorted(by_mode):
        rows = by_mode[mode]
        plrs = sorted(r.plr for r in rows if r.plr is not None)
        spls = [r.spl for r in rows]
        entry = {
            "episodes": len(rows),
            "outcomes": dict(sorted(collections.Counter(r.outcome for r in rows).items())),
            "spl_mean": round(float(np.mean(spls)), 6) if spls else None,
            "spl_std": round(float(np.std(spls)), 6) if spls else None,
            "interventions_total": int(sum(r.interventions for r in rows)),
        }
        if plrs:
            q = np.quantile(plrs, [0.0, 0.25, 0.5, 0.75, 1.0])
            entry.update({
                "plr_median": round(float(q[2]), 6),
                "plr_mean": round(float(np.mean(plrs)), 6),
                "plr_quartiles": [round(float(v), 6) for v in q],
                "frac_plr_lt_1": round(float(np.mean([p < 1.0 for p in plrs])), 6),
                "frac_plr_lt_1_3": round(float(np.mean([p < 1.3 for p in plrs])), 6),
                "plr_values": [round(float(p), 6) for p in plrs],
            })
        out["modes"][mode] = entry
    return out


def write_results(out_dir: str, results: list, summary: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "episodes.jsonl"), "w") as f:
        for r in results:
            f.write(json.dumps({
                "scenario_id": r.scenario_id, "mode": r.mode, "seed": r.seed,
                "outcome": r.outcome, "path_length": r.path_length,
                "shortest": r.shortest, "steps": r.steps,
                "interventions": r.interventions, "spl": r.spl, "plr": r.plr,
            }, sort_keys=True) + "\n")
    with open(os.path.join(out_dir, "summary.yaml"), "w") as f:
        yaml.safe_dump(summary, f, sort_keys=True)


def collect_dataset(scenarios: list, n_episodes: int, policy_spec: dict,
                    params: exp.ExpertParams, ecfg: EpisodeConfig,
                    cfg: EvalConfig) -> tuple:
    """Oracle-intervention data generation: one episode per scenario, first
    n_episodes scenarios. Returns (records, per-episode intervention counts)."""
    chosen = scenarios[:n_episodes]
    spec = {"name": "collect", "mode": "oracle_interventions",
            "oracle": dict(policy_spec, params=vars(params))}
    tasks = [{
        "scenario": s,
        "mode_spec": spec,
        "ecfg": ecfg,
        "seed": episode_seed(cfg.suite_seed, s.id),
        "max_steps": cfg.default_max_steps,
        "target_enabled": True,
        "record_choices": True,
    } for s in chosen]
    raw = run_tasks(tasks, cfg.jobs, cache_dir=None)
    records = []
    counts = []
    for r in raw:
        records.extend(r["records"])
        counts.append(r["interventions"])
    return records, counts


def argmax_agreement(candidate_sets: list, w_aug_a: np.ndarray,
                     w_aug_b: np.ndarray) -> float:
    """Fraction of candidate sets where both weight vectors pick the same
    argmax-utility frontier (ties toward the lowest id)."""
    agree = 0
    for cands in candidate_sets:
        ids = np.array([c[0] for c in cands])
        phis = np.stack([c[1] for c in cands])
        ua = phis @ w_aug_a
        ub = phis @ w_aug_b
        ka = ids[ua >= ua.max() - 1e-12].min()
        kb = ids[ub >= ub.max() - 1e-12].min()
        agree += int(ka == kb)
    return agree / len(candidate_sets)


def ablation_sweep(datasets: dict, scenarios: list, train_config,
                   ecfg: EpisodeConfig, cfg: EvalConfig,
                   train_seeds: tuple = (0, 1), alpha: float | None = None) -> dict:
    """Train per dataset variant and evaluate each family on the suite.

    `datasets` maps variant name -> list of ChoiceRecords. Returns a table
    {variant: summary-entry} plus the per-variant trained seeds used.
    """
    from .learn import train as learn_train

    table = {}
    for name in sorted(datasets):
        records = datasets[name]
        specs = []
        for ts in train_seeds:
            res = learn_train(records, train_config, ts)
            specs.append({"name": f"{name}:s{ts}", "mode": "learned",
                          "w": [float(v) for v in res.model.w],
                          "w_I": res.model.w_I, "train_seed": ts})
        specs.append({"name": "coverage", "mode": "coverage"})
        use_ecfg = ecfg
        if alpha is not None:
            use_ecfg = replace(ecfg, planner=replace(ecfg.planner, alpha=alpha))
        _, summary = run_suite(scenarios, specs, use_ecfg, cfg)
        plrs = []
        for mode, entry in summary["modes"].items():
            if mode.startswith(name + ":"):
                plrs.extend(entry.get("plr_values", []))
        table[name] = {
            "plr_median": round(float(np.median(plrs)), 6) if plrs else None,
            "frac_plr_lt_1": round(float(np.mean([p < 1.0 for p in plrs])), 6)
            if plrs else None,
            "episodes": len(plrs),
        }
    return table
