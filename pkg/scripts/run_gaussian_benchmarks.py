"""Membrane and plate benchmarks: relaxation vs loopy BP vs block solves."""

import argparse
import json

from lagrelax.experiments import run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--outdir", default="results/gaussian")
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--K", type=int, nargs="+", default=[4, 8])
    p.add_argument("--L", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    for kind in ["gaussian-membrane", "gaussian-plate"]:
        config = {
            "experiment": kind,
            "m": args.m,
            "eps": args.eps,
            "K": args.K,
            "L": args.L,
            "seed": args.seed,
            "max_iters": 2000,
        }
        summary = run_experiment(config, f"{args.outdir}/{kind}")
        print(json.dumps(summary, indent=1))


if __name__ == "__main__":
    main()
