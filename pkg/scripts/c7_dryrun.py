#!/usr/bin/env python3
"""Dress rehearsal for the end-to-end comparison: full-size dataset, curated
evaluation suite, learned/coverage/oracle modes at one or two alphas."""

import argparse
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


def curated(count, first_seed, gen_cfg, ecfg, eval_cfg, min_ratio,
            min_lstar=12.0):
    out = []
    seed = first_seed
    while len(out) < count:
        s = generate_scenario(seed, gen_cfg)
        seed += 1
        l_star = ev.shortest_observation_distance(s, ecfg.sim)
        if l_star < min_lstar:
            continue
        probe = ev.run_tasks([{
            "scenario": s, "mode_spec": {"name": "coverage", "mode": "coverage"},
            "ecfg": ecfg, "seed": ev.episode_seed(eval_cfg.suite_seed, s.id),
            "max_steps": eval_cfg.default_max_steps, "target_enabled": True,
        }], eval_cfg.jobs, eval_cfg.cache_dir)[0]
        if probe["outcome"] != "found":
            continue
        if probe["path_length"] < min_ratio * l_star:
            continue
        out.append(s)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--train-eps", type=int, default=30)
    ap.add_argument("--eval-scenarios", type=int, default=24)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--alphas", default="0.2,0.3")
    ap.add_argument("--min-ratio", type=float, default=2.0)
    ap.add_argument("--jobs", type=int, default=2)
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    t0 = time.time()
    gen_cfg = GeneratorConfig()
    ecfg = EpisodeConfig(planner=PlannerConfig(mode="coverage"))
    eval_cfg = ev.EvalConfig(jobs=args.jobs,
                             cache_dir=os.path.join(args.out, "cache"))
    train_scen = curated(args.train_eps, 1000, gen_cfg, ecfg, eval_cfg,
                         args.min_ratio)
    eval_scen = curated(args.eval_scenarios, 5000, gen_cfg, ecfg, eval_cfg,
                        args.min_ratio)
    print(f"[{time.time()-t0:6.0f}s] scenarios ready")

    params = exp.ExpertParams()
    records, counts = ev.collect_dataset(train_scen, args.train_eps,
                                         {"kind": "room_table"}, params, ecfg,
                                         eval_cfg)
    print(f"[{time.time()-t0:6.0f}s] dataset: {len(records)} interventions, "
          f"mean/ep {np.mean(counts):.1f}")
    exp.write_dataset(os.path.join(args.out, "dataset.jsonl"), records, {
        "class_names": train_scen[0].class_names, "lambda": ecfg.sem.lam})

    tcfg = learn_mod.TrainConfig(seeds=tuple(range(args.seeds)))
    names = sem.feature_names(train_scen[0].class_names)
    trained = learn_mod.train_seeds(records, tcfg, feature_names=names)
    w_mean = np.mean([r.model.w for r in trained], axis=0)
    top = sorted(zip(names, w_mean), key=lambda kv: -kv[1])[:8]
    print(f"[{time.time()-t0:6.0f}s] trained; top weights: "
          + ", ".join(f"{n}={v:.2f}" for n, v in top))

    for alpha in [float(a) for a in args.alphas.split(",")]:
        run_ecfg = EpisodeConfig(planner=PlannerConfig(mode="coverage",
                                                       alpha=alpha))
        specs = [{"name": "coverage", "mode": "coverage"},
                 {"name": "oracle_priorities", "mode": "oracle_priorities",
                  "oracle": {}},
                 {"name": "oracle_interventions", "mode": "oracle_interventions",
                  "oracle": {}}]
        for r in trained:
            specs.append({"name": f"learned:s{r.seed}", "mode": "learned",
                          "train_seed": r.seed,
                          "w": [float(v) for v in r.model.w],
                          "w_I": r.model.w_I})
        _, summary = ev.run_suite(eval_scen, specs, run_ecfg, eval_cfg)
        merged = []
        for mode, e in summary["modes"].items():
            if mode.startswith("learned:"):
                merged.extend(e.get("plr_values", []))
        e_cov = summary["modes"]["coverage"]
        e_orc = summary["modes"]["oracle_priorities"]
        spl_learned = [summary["modes"][m]["spl_mean"]
                       for m in summary["modes"] if m.startswith("learned:")]
        e_oi = summary["modes"]["oracle_interventions"]
        print(f"[{time.time()-t0:6.0f}s] alpha={alpha}: learned "
              f"med={float(np.median(merged)):.3f} "
              f"<1={float(np.mean([p < 1 for p in merged])):.3f} "
              f"<1.3={float(np.mean([p < 1.3 for p in merged])):.3f} "
              f"spl={float(np.mean(spl_learned)):.3f} | oracle "
              f"med={e_orc.get('plr_median')} spl={e_orc.get('spl_mean')} | "
              f"oracle_itv med={e_oi.get('plr_median')} "
              f"spl={e_oi.get('spl_mean')} | "
              f"cov spl={e_cov.get('spl_mean')}")


if __name__ == "__main__":
    main()
