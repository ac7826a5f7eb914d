"""Command-line entry point.

Subcommands::

    dbrl train   --env pendulum --algo tla --seeds 0 1 2      train one cell
    dbrl eval    --run results/pendulum/tla/seed0             re-evaluate a checkpoint
    dbrl sweep   --env pendulum --algo tla --taus 2 4 6 --ps 0.5 1.0
    dbrl plot    --env pendulum                               aggregate + SVG for one env
    dbrl report                                               aggregate every finished env
    dbrl oracle  --env slalom                                 exact planning values

The output root defaults to ``results``; override with --out or the
DBRL_RESULTS environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys

from .harness import (
    DEEP_ALGOS,
    ENV_DEFAULTS,
    TABULAR_ALGOS,
    ExperimentConfig,
    aggregate_and_plot,
    default_output_root,
    evaluate_checkpoint,
    load_run_record,
    oracle_table,
    report,
    run_experiment,
    sweep,
)
from .metrics import summary_table


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="YAML experiment config; flags below override it")
    sub.add_argument("--env", choices=sorted(ENV_DEFAULTS))
    sub.add_argument("--algo", choices=sorted(TABULAR_ALGOS + DEEP_ALGOS))
    sub.add_argument("--seed", type=int, help="single training seed")
    sub.add_argument("--seeds", type=int, nargs="+", help="list of training seeds")
    sub.add_argument("--tau", type=int, help="window length for windowed algorithms")
    sub.add_argument("--p", type=float, help="energy penalty per gated step")
    sub.add_argument("--j", type=float, help="action-consistency penalty weight")
    sub.add_argument("--decision-limit", type=int, help="per-episode decision budget")
    sub.add_argument("--max-steps", type=int, help="total training env steps (continuous tasks)")
    sub.add_argument("--episodes", type=int, help="training episodes (gridworlds)")
    sub.add_argument("--eval-frequency", type=int)
    sub.add_argument("--eval-episodes", type=int)
    sub.add_argument("--warmup-steps", type=int)
    sub.add_argument("--parallel", type=int, help="max concurrent seed runs")
    sub.add_argument("--out", help="output root (default: $DBRL_RESULTS or ./results)")


_CONFIG_FIELDS = (
    "env",
    "algo",
    "tau",
    "p",
    "j",
    "decision_limit",
    "max_steps",
    "episodes",
    "eval_frequency",
    "eval_episodes",
    "warmup_steps",
    "parallel",
    "out",
)


def _build_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_yaml(args.config)
    else:
        if not args.env or not args.algo:
            raise SystemExit("either --config or both --env and --algo are required")
        cfg = ExperimentConfig(env=args.env, algo=args.algo)
    for name in _CONFIG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if args.seeds is not None:
        cfg.seeds = list(args.seeds)
    elif args.seed is not None:
        cfg.seeds = [args.seed]
    return cfg


def _cmd_train(args) -> int:
    cfg = _build_config(args).resolve()
    records = run_experiment(cfg)
    print(f"{cfg.env}/{cfg.algo}: {len(records)} seed(s) complete under {cfg.out}")
    for rec in records:
        row = rec.final.rows[0]
        print(
            f"  seed {rec.seed}: return {row.avg_return:.2f}, "
            f"decisions {row.avg_decisions:.1f}, mmacs {row.avg_mmacs:.3f}"
        )
    return 0


def _cmd_eval(args) -> int:
    rep = evaluate_checkpoint(args.run, episodes=args.episodes, seed=args.seed)
    sys.stdout.write(rep.to_csv_string())
    return 0


def _cmd_sweep(args) -> int:
    cfg = _build_config(args)
    (tau, p), rows = sweep(cfg, args.taus, args.ps, n_seeds=args.n_seeds)
    print("tau,p,mean_return,std_return,mean_decisions,selected")
    for r in rows:
        print(
            f"{r['tau']},{r['p']},{r['mean_return']:.2f},"
            f"{r['std_return']:.2f},{r['mean_decisions']:.2f},{int(r['selected'])}"
        )
    print(f"selected: tau={tau} p={p}")
    return 0


def _cmd_plot(args) -> int:
    root = args.out or default_output_root()
    env_dir = os.path.join(root, args.env)
    if not os.path.isdir(env_dir):
        raise SystemExit(f"no results under {env_dir}")
    groups = []
    for algo in sorted(os.listdir(env_dir)):
        algo_dir = os.path.join(env_dir, algo)
        seed_dirs = [
            os.path.join(algo_dir, d)
            for d in sorted(os.listdir(algo_dir))
            if d.startswith("seed") and os.path.exists(os.path.join(algo_dir, d, "COMPLETE"))
        ]
        if seed_dirs:
            groups.append((algo, [load_run_record(d) for d in seed_dirs]))
    if not groups:
        raise SystemExit(f"no finished runs under {env_dir}")
    out_dir = os.path.join(root, "reports", args.env)
    reports = aggregate_and_plot(groups, out_dir, args.env)
    sys.stdout.write(summary_table([reports[a] for a, _ in groups]))
    print(f"wrote {out_dir}")
    return 0


def _cmd_report(args) -> int:
    root = args.out or default_output_root()
    written = report(root)
    if not written:
        raise SystemExit(f"no finished runs under {root}")
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_oracle(args) -> int:
    rows = oracle_table(args.env, decision_limit=args.decision_limit, repeat_k=args.tau)
    print("macros,optimal_return,min_decisions,goal_reachable")
    for r in rows:
        print(f"{r['macros']},{r['optimal_return']},{r['min_decisions']},{int(r['goal_reachable'])}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dbrl", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("train", help="train one (env, algo) cell over a list of seeds")
    _add_config_flags(sub)
    sub.set_defaults(func=_cmd_train)

    sub = subs.add_parser("eval", help="re-evaluate a saved checkpoint")
    sub.add_argument("--run", required=True, help="seed directory, e.g. results/pendulum/tla/seed0")
    sub.add_argument("--episodes", type=int, default=10)
    sub.add_argument("--seed", type=int, default=0)
    sub.set_defaults(func=_cmd_eval)

    sub = subs.add_parser("sweep", help="grid-search window length and energy penalty")
    _add_config_flags(sub)
    sub.add_argument("--taus", type=int, nargs="+", required=True)
    sub.add_argument("--ps", type=float, nargs="+", required=True)
    sub.add_argument("--n-seeds", type=int, default=5)
    sub.set_defaults(func=_cmd_sweep)

    sub = subs.add_parser("plot", help="aggregate finished seeds for one env and write the SVG")
    sub.add_argument("--env", required=True, choices=sorted(ENV_DEFAULTS))
    sub.add_argument("--out")
    sub.set_defaults(func=_cmd_plot)

    sub = subs.add_parser("report", help="aggregate every finished env under the output root")
    sub.add_argument("--out")
    sub.set_defaults(func=_cmd_report)

    sub = subs.add_parser("oracle", help="exact planning values for a gridworld")
    sub.add_argument("--env", required=True, choices=("straight", "slalom", "combined"))
    sub.add_argument("--decision-limit", type=int)
    sub.add_argument("--tau", type=int, help="repetition factor for the macro sets")
    sub.set_defaults(func=_cmd_oracle)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
