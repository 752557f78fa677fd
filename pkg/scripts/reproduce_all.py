#!/usr/bin/env python3
"""Reproduce every figure's data in one go.

Writes result files, fit reports, and two-column plot data under out/figures.
Pass --scale 0.2 (say) for a quick pass at reduced size; the printed reference
comparisons are then indicative only.

    python scripts/reproduce_all.py --seed 42 --workers 4 [--scale 1.0]
"""

import argparse
import sys
import time

from branchlat.cli import FIGURE_IDS, main as cli_main


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--scale", type=float, default=1.0)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--outdir", default="out/figures")
    ap.add_argument("--only", nargs="*", default=None,
                    help="subset of figure ids to run")
    args = ap.parse_args(argv)

    figures = args.only or FIGURE_IDS
    t0 = time.time()
    for fig in figures:
        print(f"=== {fig} ===", flush=True)
        cli_args = ["reproduce", fig, "--seed", str(args.seed),
                    "--scale", str(args.scale), "--outdir", args.outdir]
        if args.workers is not None:
            cli_args += ["--workers", str(args.workers)]
        code = cli_main(cli_args)
        if code != 0:
            print(f"{fig} exited with {code}", file=sys.stderr)
            return code
    print(f"all figures done in {(time.time() - t0) / 60:.1f} min; "
          f"data under {args.outdir}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
