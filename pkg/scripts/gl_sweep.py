"""Average NS/AS/SS bounds over random rotations for random polynomials.

Writes one CSV row per bound report.

    python scripts/gl_sweep.py --d 1,2,3,4 --n 6,8,10,12 --out gl.csv
"""
import argparse
import csv
import sys
import time

from heatcube.experiments import REPORT_CSV_COLUMNS, gotsman_linial_sweep, with_config


def ints(text):
    return [int(x) for x in text.split(",")]


def floats(text):
    return [float(x) for x in text.split(",")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=ints, default=[1, 2, 3, 4])
    ap.add_argument("--n", type=ints, default=[6, 8, 10, 12])
    ap.add_argument("--eps", type=floats, default=[0.02, 0.05, 0.1])
    ap.add_argument("--t", type=floats, default=[0.001, 0.01])
    ap.add_argument("--rotations", type=int, default=200)
    ap.add_argument("--polys", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    start = time.perf_counter()
    reports = gotsman_linial_sweep(
        args.d, args.n, args.eps, args.rotations, args.seed, args.t, args.polys, with_config(workers=args.workers)
    )
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(REPORT_CSV_COLUMNS)
    for r in reports:
        writer.writerow(r.csv_row())
    if fh is not sys.stdout:
        fh.close()
    failed = sum(not r.passed for r in reports)
    print(f"{len(reports)} reports, {failed} failed, {time.perf_counter() - start:.1f}s", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
