"""Mean objective vs. number of RIS elements for the standard architectures."""

import argparse
import logging

from bdris.channel import ScenarioConfig
from bdris.experiment import ExperimentSpec, run_sweep, write_sweep

ARCHS = ["single", "tridiagonal", "group:group_size=4", "band:q=2L-1", "stem:q=2L-1", "fully"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--objective", default="sum_channel_gain", choices=["sum_channel_gain", "sum_rate"])
    ap.add_argument("--values", default="8,16,24,32")
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--restarts", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="perf_vs_nris.csv")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)
    spec = ExperimentSpec(
        scenario=ScenarioConfig(seed=args.seed),
        architectures=ARCHS,
        objective=args.objective,
        sweep_axis="n_ris",
        sweep_values=[int(v) for v in args.values.split(",")],
        trials=args.trials,
        equalize=True,
        restarts=args.restarts,
    )
    res = run_sweep(spec, threads=args.threads)
    write_sweep(res, args.out)
    for r in res.records:
        print(f"N_I={r.sweep_value:>3} {r.architecture_label:<14} {r.mean_value:.4e} +- {r.std_value:.1e}")


if __name__ == "__main__":
    main()
