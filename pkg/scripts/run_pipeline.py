"""Run datagen, train and benchmark back to back and record stage wall times."""

import argparse
import json
import logging
import time
from pathlib import Path

from fcuc.pipeline import DATA, cmd_benchmark, cmd_datagen, cmd_train, load_config


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=DATA / "desk_config.json")
    ap.add_argument("--out", type=Path, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    cfg = load_config(args.config)
    if args.out is not None:
        cfg.out = str(args.out)
    if args.seed is not None:
        cfg.seed = args.seed
    stages = {}
    t_all = time.perf_counter()
    for name, fn in (("datagen", cmd_datagen), ("train", cmd_train), ("benchmark", cmd_benchmark)):
        t0 = time.perf_counter()
        fn(cfg)
        stages[name] = time.perf_counter() - t0
        print(f"{name:<10} {stages[name]:8.1f} s", flush=True)
    stages["total"] = time.perf_counter() - t_all
    print(f"{'total':<10} {stages['total']:8.1f} s")
    with open(cfg.out_dir / "pipeline_timing.json", "w") as fh:
        json.dump(stages, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main()
