"""Performance against circuit complexity: band and stem over the width q."""

import argparse

from bdris.channel import ScenarioConfig
from bdris.experiment import ExperimentSpec, run_sweep, write_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--objective", default="sum_channel_gain", choices=["sum_channel_gain", "sum_rate"])
    ap.add_argument("--values", default="0,1,3,5,7,9,11,15")
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--restarts", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="pareto.csv")
    args = ap.parse_args()
    spec = ExperimentSpec(
        scenario=ScenarioConfig(seed=args.seed),
        architectures=["band", "stem"],
        objective=args.objective,
        sweep_axis="q",
        sweep_values=[int(v) for v in args.values.split(",")],
        trials=args.trials,
        equalize=True,
        restarts=args.restarts,
    )
    res = run_sweep(spec, threads=args.threads)
    write_sweep(res, args.out)
    for r in res.records:
        print(f"{r.architecture_label:<12} complexity={r.complexity_count:>4} mean={r.mean_value:.4e}")


if __name__ == "__main__":
    main()
