#!/usr/bin/env python3
"""Run every verifier check back to back and summarize.

Equivalent to calling `levyfield verify <check>` once per check; output
CSVs land in --outdir.  Exits 0 only if everything passes.
"""

import argparse
import sys
import time

from levyfield import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="out/checks")
    ap.add_argument("--n", type=int, default=None,
                    help="override sample count for the Monte Carlo checks")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    results = []
    for check in cli.CHECKS:
        argv = ["verify", check, "--outdir", args.outdir,
                "--seed", str(args.seed)]
        if args.n is not None:
            argv += ["--n", str(args.n)]
        t0 = time.perf_counter()
        code = cli.main(argv)
        results.append((check, code, time.perf_counter() - t0))

    print()
    print(f"{'check':<18} {'status':<6} seconds")
    for check, code, dt in results:
        print(f"{check:<18} {'pass' if code == 0 else 'FAIL':<6} {dt:8.2f}")
    failed = [c for c, code, _ in results if code != 0]
    if failed:
        print(f"\n{len(failed)} check(s) failed: {', '.join(failed)}")
        return 2
    print(f"\nall {len(results)} checks passed; CSVs in {args.outdir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
