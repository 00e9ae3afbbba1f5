#!/usr/bin/env python3
"""End-to-end experiment: generate scenarios, collect oracle interventions,
train priority weights, evaluate against the coverage baseline and oracles.

Example:
    python3 scripts/run_pipeline.py --out /tmp/exp --train-scenarios 30 \
        --eval-scenarios 34 --train-seeds 10
"""

import argparse
import json
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from semsearch import evaluation as ev
from semsearch import expert as exp
from semsearch import learn as learn_mod
from semsearch import semantics as sem
from semsearch.planner import EpisodeConfig, PlannerConfig
from semsearch.scenario import GeneratorConfig, generate_scenario
from semsearch.simcore import SimConfig


def curated_scenarios(count, first_seed, gen_cfg, ecfg, eval_cfg, min_ratio):
    """Generate scenarios, keeping those where coverage pays a detour."""
    out = []
    seed = first_seed
    while len(out) < count:
        s = generate_scenario(seed, gen_cfg)
        seed += 1
        if min_ratio > 0:
            probe = ev.run_tasks([{
                "scenario": s,
                "mode_spec": {"name": "coverage", "mode": "coverage"},
                "ecfg": ecfg,
                "seed": ev.episode_seed(eval_cfg.suite_seed, s.id),
                "max_steps": eval_cfg.default_max_steps,
                "target_enabled": True,
            }], eval_cfg.jobs, eval_cfg.cache_dir)[0]
            if probe["outcome"] != "found":
                continue
            l_star = ev.shortest_observation_distance(s, ecfg.sim)
            if probe["path_length"] < min_ratio * l_star:
                continue
        out.append(s)
    return out, seed


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--train-scenarios", type=int, default=30)
    ap.add_argument("--eval-scenarios", type=int, default=34)
    ap.add_argument("--train-seeds", type=int, default=10)
    ap.add_argument("--eval-train-seeds", type=int, default=4,
                    help="how many trained seeds to evaluate")
    ap.add_argument("--alpha", type=float, default=0.3)
    ap.add_argument("--grid", type=int, default=100)
    ap.add_argument("--min-ratio", type=float, default=1.3)
    ap.add_argument("--jobs", type=int, default=2)
    ap.add_argument("--suite-seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=2000)
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    gen_cfg = GeneratorConfig(grid_size=args.grid)
    ecfg = EpisodeConfig(planner=PlannerConfig(mode="coverage",
                                               alpha=args.alpha))
    eval_cfg = ev.EvalConfig(jobs=args.jobs, suite_seed=args.suite_seed,
                             cache_dir=os.path.join(args.out, "cache"))

    t0 = time.time()
    train_scen, next_seed = curated_scenarios(
        args.train_scenarios, 1000, gen_cfg, ecfg, eval_cfg, args.min_ratio)
    eval_scen, _ = curated_scenarios(
        args.eval_scenarios, 5000, gen_cfg, ecfg, eval_cfg, args.min_ratio)
    print(f"[{time.time()-t0:7.1f}s] scenarios ready "
          f"({len(train_scen)} train / {len(eval_scen)} eval)")

    params = exp.ExpertParams()
    records, counts = ev.collect_dataset(
        train_scen, args.train_scenarios, {"kind": "room_table"},
        params, ecfg, eval_cfg)
    print(f"[{time.time()-t0:7.1f}s] collected {len(records)} interventions "
          f"({counts})")
    exp.write_dataset(os.path.join(args.out, "dataset.jsonl"), records, {
        "class_names": train_scen[0].class_names, "lambda": ecfg.sem.lam,
        "oracle": {"params": vars(params)}})

    tcfg = learn_mod.TrainConfig(epochs=args.epochs,
                                 seeds=tuple(range(args.train_seeds)))
    names = sem.feature_names(train_scen[0].class_names)
    trained = learn_mod.train_seeds(records, tcfg, feature_names=names)
    w_mean = np.mean([r.model.w for r in trained], axis=0)
    print(f"[{time.time()-t0:7.1f}s] trained; mean weights:")
    for n, v in sorted(zip(names, w_mean), key=lambda kv: -kv[1]):
        print(f"    {n:16s} {v:.3f}")

    specs = [{"name": "coverage", "mode": "coverage"},
             {"name": "oracle_priorities", "mode": "oracle_priorities",
              "oracle": {}},
             {"name": "oracle_interventions", "mode": "oracle_interventions",
              "oracle": {}}]
    for r in trained[: args.eval_train_seeds]:
        specs.append({"name": f"learned:s{r.seed}", "mode": "learned",
                      "train_seed": r.seed,
                      "w": [float(v) for v in r.model.w], "w_I": r.model.w_I})
    results, summary = ev.run_suite(eval_scen, specs, ecfg, eval_cfg,
                                    out_dir=args.out)
    print(f"[{time.time()-t0:7.1f}s] suite done")
    merged = []
    for mode, entry in sorted(summary["modes"].items()):
        if mode.startswith("learned:"):
            merged.extend(entry.get("plr_values", []))
        print(f"  {mode:22s} med-PLR={entry.get('plr_median')} "
              f"<1={entry.get('frac_plr_lt_1')} "
              f"SPL={entry.get('spl_mean')}±{entry.get('spl_std')} "
              f"outcomes={entry['outcomes']}")
    if merged:
        print(f"  learned (merged {len(merged)} eps): "
              f"med-PLR={float(np.median(merged)):.3f} "
              f"<1={float(np.mean([p < 1 for p in merged])):.3f} "
              f"<1.3={float(np.mean([p < 1.3 for p in merged])):.3f}")
    with open(os.path.join(args.out, "pipeline_summary.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
