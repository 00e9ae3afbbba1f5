#!/usr/bin/env python3
"""Sweep the priority/coverage trade-off alpha for a trained model against
the coverage baseline and the oracle-priority upper bound."""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from semsearch import evaluation as ev
from semsearch.expert import read_dataset
from semsearch.learn import TrainConfig, train
from semsearch.planner import EpisodeConfig, PlannerConfig
from semsearch.scenario import GeneratorConfig, generate_scenario


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data", required=True)
    ap.add_argument("--cache", required=True)
    ap.add_argument("--eval-first-seed", type=int, default=5000)
    ap.add_argument("--eval-scenarios", type=int, default=8)
    ap.add_argument("--alphas", default="0.1,0.2,0.3,0.5")
    ap.add_argument("--min-ratio", type=float, default=1.3)
    ap.add_argument("--grid", type=int, default=100)
    ap.add_argument("--jobs", type=int, default=2)
    args = ap.parse_args()

    recs, _meta = read_dataset(args.data)
    res = train(recs, TrainConfig(epochs=2000, seeds=(0,)), seed=0)
    w = [float(v) for v in res.model.w]

    gen_cfg = GeneratorConfig(grid_size=args.grid)
    eval_cfg = ev.EvalConfig(jobs=args.jobs, cache_dir=args.cache)
    base = EpisodeConfig(planner=PlannerConfig(mode="coverage"))
    scen = []
    seed = args.eval_first_seed
    while len(scen) < args.eval_scenarios:
        s = generate_scenario(seed, gen_cfg)
        seed += 1
        probe = ev.run_tasks([{
            "scenario": s, "mode_spec": {"name": "coverage", "mode": "coverage"},
            "ecfg": base, "seed": ev.episode_seed(eval_cfg.suite_seed, s.id),
            "max_steps": eval_cfg.default_max_steps, "target_enabled": True,
        }], eval_cfg.jobs, eval_cfg.cache_dir)[0]
        if probe["outcome"] != "found":
            continue
        if probe["path_length"] < args.min_ratio * \
                ev.shortest_observation_distance(s, base.sim):
            continue
        scen.append(s)

    for alpha in [float(a) for a in args.alphas.split(",")]:
        ecfg = EpisodeConfig(planner=PlannerConfig(mode="coverage", alpha=alpha))
        specs = [
            {"name": "coverage", "mode": "coverage"},
            {"name": "learned", "mode": "learned", "w": w, "w_I": res.model.w_I},
            {"name": "oracle_priorities", "mode": "oracle_priorities",
             "oracle": {}},
        ]
        _, summary = ev.run_suite(scen, specs, ecfg, eval_cfg)
        line = [f"alpha={alpha}"]
        for mode in ("learned", "oracle_priorities"):
            e = summary["modes"][mode]
            line.append(f"{mode}: med={e.get('plr_median')} "
                        f"<1={e.get('frac_plr_lt_1')} spl={e.get('spl_mean')}")
        print(" | ".join(line))


if __name__ == "__main__":
    main()
