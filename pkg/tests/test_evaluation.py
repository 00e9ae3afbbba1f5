import math

import numpy as np
import pytest

from semsearch.evaluation import (EvalConfig, argmax_agreement, episode_seed,
                                  grid_bfs, observation_cells, plr, run_suite,
                                  shortest_observation_distance, spl,
                                  summarize)
from semsearch.planner import EpisodeConfig, PlannerConfig
from semsearch.scenario import GeneratorConfig, generate_scenario
from semsearch.simcore import SimConfig

from conftest import two_room_scenario


def test_plr_identities():
    assert plr(5.0, 5.0) == 1.0
    assert plr(5.0, 10.0) == 0.5
    with pytest.raises(ValueError):
        plr(0.0, 1.0)


def test_spl_identities():
    assert spl(True, 4.0, 4.0) == 1.0
    assert spl(True, 8.0, 4.0) == 0.5
    assert spl(False, 1.0, 4.0) == 0.0
    assert spl(True, 2.0, 4.0) == 1.0  # traveled below shortest clips to 1


def test_shortest_observation_distance_two_rooms():
    # target deep in the living room, start in the kitchen; the observation
    # point through the doorway is closer than the target cell itself
    s = two_room_scenario(objects=[(3, 13, "bed"), (3, 7, "door")], start=(3, 2))
    cfg = SimConfig(sensing_range=1.0)  # 4 cells
    l_star = shortest_observation_distance(s, cfg)
    # independent check: BFS to every free cell, minimum over cells that see
    # the target per brute-force supercover visibility
    from semsearch.raycast import supercover_line
    dist = grid_bfs(s.free_mask(), (3, 2))
    best = math.inf
    for y in range(s.grid_size):
        for x in range(s.grid_size):
            if not s.free_mask()[y, x] or dist[y, x] < 0:
                continue
            if math.hypot(y - 3, x - 13) > 4.0:
                continue
            cells = supercover_line(y, x, 3, 13)
            if all(not s.occupied[cy, cx] for cy, cx in cells):
                best = min(best, dist[y, x])
    # ray visibility can only reach cells the supercover oracle also reaches
    # through this doorway geometry
    assert l_star == pytest.approx(best * s.cell_size)
    assert l_star < dist[3, 13] * s.cell_size  # observing beats touching


def test_observation_cells_respect_occlusion():
    s = two_room_scenario(objects=[(1, 12, "bed")], start=(3, 2))
    obs = observation_cells(s, SimConfig(sensing_range=1.5))
    assert obs[1, 10]            # same room, clear line
    assert not obs[1, 4]         # behind the dividing wall


def test_run_suite_empty_modes():
    s = two_room_scenario(start=(3, 2))
    results, summary = run_suite([s], [], EpisodeConfig(
        sim=SimConfig(sensing_range=1.0)), EvalConfig(jobs=1))
    assert results == []
    assert summary["modes"] == {}


def suite_fixture(tmp_path, jobs=1):
    scenarios = [generate_scenario(seed, GeneratorConfig(grid_size=64))
                 for seed in (3, 4)]
    n = len(scenarios[0].class_names) + 1
    specs = [
        {"name": "coverage", "mode": "coverage"},
        {"name": "learned:s0", "mode": "learned", "train_seed": 0,
         "w": [0.0] * n, "w_I": 0.0},
    ]
    ecfg = EpisodeConfig(planner=PlannerConfig(mode="coverage"))
    cfg = EvalConfig(jobs=jobs, suite_seed=5)
    return run_suite(scenarios, specs, ecfg, cfg, out_dir=str(tmp_path))


def test_run_suite_schema_and_pairing(tmp_path):
    results, summary = suite_fixture(tmp_path)
    assert len(results) == 4  # 2 scenarios x 2 modes
    by_mode = {}
    for r in results:
        by_mode.setdefault(r.mode, []).append(r)
    for r in by_mode["coverage"]:
        if r.outcome == "found":
            assert r.plr == 1.0  # coverage against itself
        assert r.path_length >= r.shortest - 1e-9 or r.outcome != "found"
    entry = summary["modes"]["learned:s0"]
    assert {"plr_median", "frac_plr_lt_1", "frac_plr_lt_1_3", "spl_mean",
            "spl_std"} <= set(entry.keys())
    assert (tmp_path / "episodes.jsonl").exists()
    assert (tmp_path / "summary.yaml").exists()


def test_run_suite_deterministic_bytes(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    suite_fixture(a)
    suite_fixture(b)
    assert (a / "episodes.jsonl").read_bytes() == (b / "episodes.jsonl").read_bytes()
    assert (a / "summary.yaml").read_bytes() == (b / "summary.yaml").read_bytes()


def test_episode_seed_stable_across_modes():
    assert episode_seed(0, "s000001") == episode_seed(0, "s000001")
    assert episode_seed(0, "s000001") != episode_seed(1, "s000001")


def test_argmax_agreement():
    sets = []
    rng = np.random.default_rng(0)
    for _ in range(50):
        sets.append([(i, rng.uniform(0, 1, 4)) for i in range(4)])
    w = np.array([1.0, 0.5, 0.0, 0.2])
    assert argmax_agreement(sets, w, w) == 1.0
    w2 = np.array([0.0, 0.0, 1.0, 0.9])
    assert argmax_agreement(sets, w, w2) < 1.0


def test_summarize_counts_interventions():
    from semsearch.evaluation import EpisodeResult
    rows = [EpisodeResult("a", "oracle_interventions", 0, "found", 5.0, 4.0,
                          10, 3, spl=0.8, plr=0.9),
            EpisodeResult("b", "oracle_interventions", 0, "found", 6.0, 4.0,
                          11, 2, spl=0.7, plr=1.1)]
    s = summarize(rows)
    e = s["modes"]["oracle_interventions"]
    assert e["interventions_total"] == 5
    assert e["plr_median"] == pytest.approx(1.0)
    assert e["frac_plr_lt_1"] == pytest.approx(0.5)
