"""Count seeds in which the MLE mean squared error of every parameter drops from n=50 to n=500."""

import argparse
from dataclasses import dataclass

from skegtd.simlab import ExperimentSpec, run_recovery


@dataclass(frozen=True)
class MonotoneConfig:
    seeds: int = 10
    replicates: int = 100
    first_seed: int = 100
    workers: int = 1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    for name, default in vars(MonotoneConfig()).items():
        ap.add_argument("--" + name.replace("_", "-"), type=int, default=default)
    cfg = MonotoneConfig(**vars(ap.parse_args()))
    good = 0
    print("seed,param,mse_50,mse_500,nonconverged_50,nonconverged_500")
    for s in range(cfg.first_seed, cfg.first_seed + cfg.seeds):
        spec = ExperimentSpec(sample_sizes=(50, 500), replicates=cfg.replicates, estimators=("mle",), seed=s)
        t = run_recovery(spec, workers=cfg.workers)
        ok = True
        for k in ("r", "alpha", "beta"):
            a, b = t.lookup(n=50, parameter=k)[0], t.lookup(n=500, parameter=k)[0]
            ok &= b["mse"] < a["mse"]
            print(f"{s},{k},{a['mse']:.6g},{b['mse']:.6g},{a['nonconverged']},{b['nonconverged']}")
        good += ok
    print(f"# monotone in {good} of {cfg.seeds} seeds")


if __name__ == "__main__":
    main()
