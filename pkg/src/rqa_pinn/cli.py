"""Command line entry point: ``rqa-pinn {solve,sweep,check}``.

Exit codes: 0 success, 1 failed self-test, 2 config error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from rqa_pinn import bench, problems, verify
from rqa_pinn import config as cfgmod
from rqa_pinn.geometry import sample_interior, substream
from rqa_pinn.trainer import TrainingDivergence

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def cmd_solve(args) -> int:
    experiment = cfgmod.load(args.config)
    config = experiment.single()
    out = Path(args.out) if args.out else Path("runs") / bench.cell_name(config)
    dumps = args.dump_weights if args.dump_weights is not None else experiment.dump_weights
    record = bench.run_single(config, out, dumps, experiment.dump_batches)
    print(f"final l2_error={record.final_l2:.6e} max_error={record.final_max:.6e} -> {out / 'history.csv'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    experiment = cfgmod.load(args.config)
    seeds = args.seeds if args.seeds is not None else None
    bench.run_sweep(experiment, args.out, seeds)
    for row in bench.read_csv(Path(args.out) / "summary_agg.csv"):
        print(
            f"{row['strategy']:>8} p={row['p']:<6.6} q_cut={row['q_cut']:<5.5} q_target={row['q_target']:<5.5} "
            f"mean_l2={float(row['mean_l2']):.4e} std_l2={float(row['std_l2']):.2e} (n={row['n_seeds']})"
        )
    return EXIT_OK


def cmd_check(args) -> int:
    experiment = cfgmod.load(args.config)
    base = experiment.base
    problem = problems.get_problem(base.problem, base.d)
    print(f"config OK: {len(experiment.cells())} cell(s), problem={problem.name}, d={problem.d}")
    results = verify.manufactured_selftest(problem, seed=base.seed)
    for res in results:
        print(res)
    batch = sample_interior(100, problem.d, problem.horizon, substream(base.seed, "test"))
    print("info:", problems.source_crosscheck(problem, batch))
    return EXIT_OK if all(r.ok for r in results) else EXIT_SELFTEST


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rqa-pinn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="train one configuration")
    solve.add_argument("--config", required=True)
    solve.add_argument("--out")
    solve.add_argument("--dump-weights", type=_int_list, metavar="ITERS")
    solve.set_defaults(func=cmd_solve)

    sweep = sub.add_parser("sweep", help="run a strategy/p/quantile grid over several seeds")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--seeds", type=_int_list)
    sweep.add_argument("--out", required=True)
    sweep.set_defaults(func=cmd_sweep)

    check = sub.add_parser("check", help="validate a config and run the manufactured-solution self-test")
    check.add_argument("--config", required=True)
    check.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergence as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
