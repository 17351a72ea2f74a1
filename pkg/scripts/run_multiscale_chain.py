"""Long-correlation 1D chain: multiscale vs single-scale vs block solves."""

import argparse

from lagrelax.experiments import run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--outdir", default="results/multiscale-1d")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--block", type=int, default=8)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    config = {
        "experiment": "multiscale-1d",
        "n": args.n,
        "eps": args.eps,
        "block": args.block,
        "levels": args.levels,
        "tol": args.tol,
        "seed": args.seed,
        "max_iters": 8000,
    }
    summary = run_experiment(config, args.outdir)
    iters = summary["iterations_to_tol"]
    print(
        f"iterations to {args.tol:g}: multiscale={iters['multiscale']} "
        f"single-scale={iters['single_scale']} block-GS={iters['block_gs']}"
    )


if __name__ == "__main__":
    main()
