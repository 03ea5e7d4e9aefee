"""Rank cMES runs that differ only in the number of y* samples."""
import argparse
import logging

from cmes.experiments import write_json, ystar_ablation


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out-dir", default="results/ystar_ablation")
    p.add_argument("--sizes", type=int, nargs="+", default=[2, 10, 40])
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--budget", type=int, default=20)
    p.add_argument("--problems", nargs="+", help="defaults to every bundled problem")
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    table = ystar_ablation(args.out_dir, args.sizes, args.seeds, args.budget, args.problems, args.workers)
    write_json(table.to_dict(), f"{args.out_dir}/ranks.json")
    for s in table.strategies:
        lo, hi = table.ci[s]
        print(f"{s:10s} mean rank {table.mean_rank[s]:.3f}  [{lo:.3f}, {hi:.3f}]")


if __name__ == "__main__":
    main()
