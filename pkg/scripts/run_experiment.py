"""Run an experiment spec file and write the table as CSV and JSON."""

import argparse
import os
import time
from dataclasses import dataclass

from skegtd.simlab import load_spec, run_experiment


@dataclass(frozen=True)
class RunConfig:
    spec: str
    out_dir: str = "results"
    workers: int = 1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("spec")
    ap.add_argument("--out-dir", default=RunConfig.out_dir)
    ap.add_argument("--workers", type=int, default=RunConfig.workers)
    cfg = RunConfig(**vars(ap.parse_args()))
    spec = load_spec(cfg.spec)
    start = time.perf_counter()
    table = run_experiment(spec, workers=cfg.workers)
    elapsed = time.perf_counter() - start
    os.makedirs(cfg.out_dir, exist_ok=True)
    stem = os.path.join(cfg.out_dir, os.path.splitext(os.path.basename(cfg.spec))[0])
    with open(stem + ".csv", "w", encoding="utf-8") as fh:
        fh.write(table.to_csv())
    with open(stem + ".json", "w", encoding="utf-8") as fh:
        fh.write(table.to_json())
    print(table.to_csv(), end="")
    print(f"# {elapsed:.1f} s -> {stem}.csv")


if __name__ == "__main__":
    main()
