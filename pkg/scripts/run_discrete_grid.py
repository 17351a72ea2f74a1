"""Grid sweep over field strengths: dual convergence and gap summaries.

Writes per-run traces plus gap_summary.csv into the output directory.
"""

import argparse

from lagrelax.experiments import run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--outdir", default="results/discrete-grid")
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--sigmas", type=float, nargs="+", default=[2.0, 1.0, 1.5, 0.7]
    )
    p.add_argument("--mode", default="both", choices=["attractive", "frustrated", "both"])
    args = p.parse_args()

    config = {
        "experiment": "discrete-grid",
        "m": args.m,
        "seed": args.seed,
        "sigmas": args.sigmas,
        "mode": args.mode,
    }
    summary = run_experiment(config, args.outdir)
    for run in summary["runs"]:
        print(
            f"sigma={run['sigma']:<4} mode={run['mode']:<10} "
            f"g={run['g']:.6f} best={run['best_primal']:.6f} gap_flag={run['gap_flag']}"
        )


if __name__ == "__main__":
    main()
