"""Command line entry points: gen, collect, train, eval, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
import yaml

from . import evaluation as ev
from . import expert as exp
from . import learn as learn_mod
from . import semantics as sem
from .bridge import SessionConfig, serve
from .planner import EpisodeConfig, PlannerConfig
from .scenario import GeneratorConfig, generate_scenario, load_scenario, save_scenario
from .simcore import SimConfig


def _load_yaml(path):
    with open(path) as f:
        return yaml.safe_load(f) or {}


def _generator_config(path):
    if not path:
        return GeneratorConfig()
    doc = _load_yaml(path)
    if "door_widths" in doc:
        doc["door_widths"] = tuple(doc["door_widths"])
    if "small_objects_per_100_cells" in doc:
        doc["small_objects_per_100_cells"] = tuple(doc["small_objects_per_100_cells"])
    return GeneratorConfig(**doc)


def _expert_params(doc: dict) -> exp.ExpertParams:
    fields = {k: doc[k] for k in ("beta", "rho", "eps", "tau", "discount_kind",
                                  "gamma") if k in doc}
    p = exp.ExpertParams(**fields)
    p.validate()
    return p


def _episode_config(mode: str) -> EpisodeConfig:
    return EpisodeConfig(planner=PlannerConfig(mode=mode))


def cmd_gen(args) -> int:
    cfg = _generator_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    kept = 0
    seed = args.seed
    attempts = 0
    while kept < args.count and attempts < args.count * 40:
        attempts += 1
        s = generate_scenario(seed, cfg)
        seed += 1
        if args.min_coverage_ratio > 0 or args.min_shortest > 0:
            from .planner import Episode
            ecfg = _episode_config("coverage")
            l_star = ev.shortest_observation_distance(s, ecfg.sim)
            if l_star < args.min_shortest:
                continue
            ep = Episode(s, ecfg, seed=ev.episode_seed(args.suite_seed, s.id))
            if ep.run() != "found":
                continue
            if ep.belief.traveled < args.min_coverage_ratio * l_star:
                continue
        save_scenario(s, os.path.join(args.out, f"{s.id}.yaml"))
        kept += 1
    if kept < args.count:
        print(f"gen: only {kept}/{args.count} scenarios passed the filter",
              file=sys.stderr)
        return 1
    print(f"gen: wrote {kept} scenarios to {args.out}")
    return 0


def _load_scenario_dir(path) -> list:
    files = sorted(f for f in os.listdir(path) if f.endswith(".yaml"))
    return [load_scenario(os.path.join(path, f)) for f in files]


def cmd_collect(args) -> int:
    scenarios = _load_scenario_dir(args.scenarios)
    doc = _load_yaml(args.oracle) if args.oracle else {}
    params = _expert_params(doc.get("params", {}))
    policy_spec = {"kind": doc.get("kind", "room_table"),
                   "table": doc.get("table", {}),
                   "w_gain": doc.get("w_gain", 0.02)}
    ecfg = _episode_config("oracle_interventions")
    cfg = ev.EvalConfig(jobs=args.jobs, suite_seed=args.suite_seed)
    records, counts = ev.collect_dataset(scenarios, args.episodes, policy_spec,
                                         params, ecfg, cfg)
    sem_cfg = ecfg.sem
    exp.write_dataset(args.out, records, {
        "class_names": scenarios[0].class_names,
        "lambda": sem_cfg.lam,
        "oracle": {"params": vars(params), **policy_spec},
        "episodes": args.episodes,
        "interventions_per_episode": counts,
    })
    print(f"collect: {len(records)} interventions over {args.episodes} episodes "
          f"-> {args.out}")
    return 0


def cmd_train(args) -> int:
    records, meta = exp.read_dataset(args.data)
    cfg = learn_mod.TrainConfig(epochs=args.epochs, learning_rate=args.lr,
                                seeds=tuple(range(args.seeds)))
    names = sem.feature_names(meta.get("class_names", []))
    os.makedirs(args.out, exist_ok=True)
    data_hash = sem.dataset_sha256(args.data)
    for res in learn_mod.train_seeds(records, cfg, feature_names=names):
        out = os.path.join(args.out, f"weights_seed{res.seed}.yaml")
        sem.save_model(res.model, out, metadata={
            "dataset_sha256": data_hash,
            "seed": res.seed,
            "epochs": cfg.epochs,
            "learning_rate": cfg.learning_rate,
            "train_beta": cfg.train_beta,
            "train_rho": cfg.train_rho,
            "final_nll": round(res.final_nll, 9),
        })
        with open(os.path.join(args.out, f"loss_curve_seed{res.seed}.json"),
                  "w") as f:
            json.dump([round(v, 9) for v in res.loss_curve], f)
    print(f"train: {len(cfg.seeds)} models -> {args.out}")
    return 0


def _weights_specs(weights_dir) -> list:
    specs = []
    for f in sorted(os.listdir(weights_dir)):
        if not f.startswith("weights_") or not f.endswith(".yaml"):
            continue
        m = sem.load_model(os.path.join(weights_dir, f))
        seed = int("".join(c for c in f if c.isdigit()) or 0)
        specs.append({"name": f"learned:s{seed}", "mode": "learned",
                      "train_seed": seed, "w": [float(v) for v in m.w],
                      "w_I": m.w_I})
    return specs


def cmd_eval(args) -> int:
    scenarios = _load_scenario_dir(args.scenarios)
    modes = args.modes.split(",")
    specs = []
    for mode in modes:
        if mode == "learned":
            if not args.weights:
                raise SystemExit("eval: learned mode needs --weights DIR")
            specs.extend(_weights_specs(args.weights))
        elif mode == "coverage":
            specs.append({"name": "coverage", "mode": "coverage"})
        elif mode in ("oracle", "oracle_priorities"):
            specs.append({"name": "oracle_priorities",
                          "mode": "oracle_priorities", "oracle": {}})
        elif mode == "oracle_interventions":
            specs.append({"name": "oracle_interventions",
                          "mode": "oracle_interventions", "oracle": {}})
        elif mode == "linear_oracle":
            if not args.linear_weights:
                raise SystemExit("eval: linear_oracle needs --linear-weights FILE")
            m = sem.load_model(args.linear_weights)
            specs.append({"name": "linear_oracle", "mode": "linear_oracle",
                          "w": [float(v) for v in m.w], "w_I": m.w_I})
        else:
            raise SystemExit(f"eval: unknown mode {mode!r}")
    ecfg = _episode_config("coverage")
    if args.alpha is not None:
        ecfg.planner.alpha = args.alpha
    cfg = ev.EvalConfig(jobs=args.jobs, suite_seed=args.suite_seed,
                        cache_dir=args.cache)
    results, summary = ev.run_suite(scenarios, specs, ecfg, cfg,
                                    out_dir=args.out)
    for mode, entry in summary["modes"].items():
        med = entry.get("plr_median")
        print(f"eval: {mode}: episodes={entry['episodes']} "
              f"plr_median={med} spl_mean={entry['spl_mean']}")
    return 0


def cmd_serve(args) -> int:
    scenario = load_scenario(args.scenario)
    model = None
    if args.mode == "learned":
        if not args.weights:
            raise SystemExit("serve: learned mode needs --weights FILE")
        model = sem.load_model(args.weights)
    ecfg = EpisodeConfig(planner=PlannerConfig(mode=args.mode))
    cfg = SessionConfig(mode=args.mode, seed=args.seed,
                        record_path=args.record, dataset_path=args.dataset,
                        tick_interval=args.tick)
    server = serve(scenario, ecfg, cfg, port=args.port, model=model)
    print(f"serve: listening on port {server.port} (scenario {scenario.id}, "
          f"mode {args.mode}); Ctrl-C to stop", flush=True)
    try:
        while True:
            server.session._stop.wait(3600)
    except KeyboardInterrupt:
        server.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semsearch")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate scenarios")
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--config", default=None)
    g.add_argument("--min-coverage-ratio", type=float, default=0.0,
                   help="curation filter: keep scenarios whose coverage path "
                        "is at least this multiple of the shortest path")
    g.add_argument("--min-shortest", type=float, default=0.0,
                   help="curation filter: minimum shortest-path length in "
                        "meters (drops near-trivial tasks)")
    g.add_argument("--suite-seed", type=int, default=0)
    g.set_defaults(fn=cmd_gen)

    c = sub.add_parser("collect", help="generate oracle intervention data")
    c.add_argument("--scenarios", required=True)
    c.add_argument("--episodes", type=int, required=True)
    c.add_argument("--oracle", default=None, help="oracle params YAML")
    c.add_argument("--out", required=True)
    c.add_argument("--jobs", type=int, default=2)
    c.add_argument("--suite-seed", type=int, default=0)
    c.set_defaults(fn=cmd_collect)

    t = sub.add_parser("train", help="fit priority weights")
    t.add_argument("--data", required=True)
    t.add_argument("--epochs", type=int, default=2000)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--seeds", type=int, default=10)
    t.add_argument("--out", required=True)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="run an evaluation suite")
    e.add_argument("--scenarios", required=True)
    e.add_argument("--modes", default="learned,coverage")
    e.add_argument("--weights", default=None)
    e.add_argument("--linear-weights", default=None)
    e.add_argument("--out", required=True)
    e.add_argument("--jobs", type=int, default=2)
    e.add_argument("--alpha", type=float, default=None)
    e.add_argument("--suite-seed", type=int, default=0)
    e.add_argument("--cache", default=None)
    e.set_defaults(fn=cmd_eval)

    s = sub.add_parser("serve", help="live episode bridge for the UI")
    s.add_argument("--scenario", required=True)
    s.add_argument("--mode", default="coverage",
                   choices=["coverage", "learned"])
    s.add_argument("--weights", default=None)
    s.add_argument("--port", type=int, default=0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--record", default=None)
    s.add_argument("--dataset", default=None)
    s.add_argument("--tick", type=float, default=0.05)
    s.set_defaults(fn=cmd_serve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
