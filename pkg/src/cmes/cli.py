"""Command line entry point: ``cmes {run,rank,bias-study,plot,toy2d-eval}``.

Exit codes: 0 success, 1 configuration or argument error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .gp import NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which is reserved for numerical failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _cmd_run(args):
    from .suite import load_config, run_suite
    cfg = load_config(args.config)
    res = run_suite(cfg, args.out_dir, workers=args.workers, resume=args.resume)
    print(f"executed {len(res.executed)} cells ({res.evaluations} evaluations), "
          f"skipped {len(res.skipped)}, quarantined {len(res.quarantined)}")


def _cmd_rank(args):
    from .ranking import average_rank
    from .suite import load_results
    table = average_rank(load_results(args.inp), bootstrap=args.bootstrap)
    doc = table.to_dict()
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    for s in table.strategies:
        lo, hi = table.ci.get(s, (float("nan"), float("nan")))
        print(f"{s:24s} {table.mean_rank[s]:.3f}  [{lo:.3f}, {hi:.3f}]")


def _cmd_bias(args):
    from .bias import bias_study
    report = bias_study(args.m_values, n_draws=args.draws, seed=args.seed)
    doc = report.to_dict()
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    for name in ("joint", "marginal"):
        for m, s in getattr(report, name).items():
            print(f"{name:8s} m={m:<6d} mean={s.mean:.4f} sd={s.std:.4f}")
    if report.divergence is not None:
        print(f"marginal divergence {report.divergence:.4f} (one-sided p={report.divergence_p:.3g}); "
              f"joint shift {report.joint_shift:.4f} = {100 * report.joint_shift_fraction:.1f}% of range")


def _cmd_plot(args):
    from .plotting import plot_rank_curves, plot_ystar_histograms
    inp, out = Path(args.inp), Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    made = []
    bias_file = inp if inp.is_file() else inp / "bias.json"
    if bias_file.is_file():
        plot_ystar_histograms(json.loads(bias_file.read_text()), out / "ystar_histograms.png")
        made.append(out / "ystar_histograms.png")
    if inp.is_dir() and (inp / "cells").is_dir():
        from .ranking import average_rank
        from .suite import load_results
        table = average_rank(load_results(inp), bootstrap=0)
        plot_rank_curves(table.per_iteration, out / "rank_vs_iteration.png")
        made.append(out / "rank_vs_iteration.png")
    if not made:
        raise ValueError(f"nothing to plot in {inp} (expected a results directory or a bias-study JSON)")
    for p in made:
        print(p)


def _cmd_toy2d(args):
    from .problems import toy2d
    value, feasible = toy2d(args.x, args.y)
    print(f"value={value:.6g} feasible={str(feasible).lower()}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cmes", description="Constrained max-value entropy search benchmarks")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="execute a benchmark grid from a YAML config")
    r.add_argument("--config", required=True)
    r.add_argument("--out-dir", required=True)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--resume", action=argparse.BooleanOptionalAction, default=True,
                   help="skip cells that already have complete results (default)")
    r.set_defaults(fn=_cmd_run)

    k = sub.add_parser("rank", help="average ranks with bootstrap intervals")
    k.add_argument("--in", dest="inp", required=True, help="results directory written by 'run'")
    k.add_argument("--out", help="JSON file for the rank table")
    k.add_argument("--bootstrap", type=int, default=1000)
    k.set_defaults(fn=_cmd_rank)

    b = sub.add_parser("bias-study", help="joint vs marginal y* sampling on the fixed toy2d posterior")
    b.add_argument("--m-values", type=int, nargs="+", default=[200, 2000])
    b.add_argument("--draws", type=int, default=5000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", help="JSON report path")
    b.set_defaults(fn=_cmd_bias)

    g = sub.add_parser("plot", help="rank-vs-iteration and y* histogram figures")
    g.add_argument("--in", dest="inp", required=True)
    g.add_argument("--out", required=True, help="output directory for PNG files")
    g.set_defaults(fn=_cmd_plot)

    t = sub.add_parser("toy2d-eval", help="evaluate the toy2d problem at one point")
    t.add_argument("--x", type=float, required=True)
    t.add_argument("--y", type=float, required=True)
    t.set_defaults(fn=_cmd_toy2d)
    return p


def main(argv=None) -> int:
    from .suite import ConfigError
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.fn(args)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
