#!/usr/bin/env python
"""Export the built-in process concepts as standalone pool CSVs.

Useful for inspecting what gen mixes together, or as templates for custom
pools passed to `cnapwp gen --pool name=path.csv`.
"""
import argparse
from pathlib import Path

from cnapwp.synthetic import builtin_processes, sample_pool, write_pool_csv


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="pools", help="output directory")
    parser.add_argument("--traces", type=int, default=200, help="traces per concept")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, spec in builtin_processes().items():
        traces = sample_pool(spec, args.traces, args.seed)
        path = outdir / f"{name}.csv"
        write_pool_csv(path, traces)
        variants = len({t for t in traces})
        print(f"{path}: {len(traces)} traces, {variants} distinct variants")


if __name__ == "__main__":
    main()
