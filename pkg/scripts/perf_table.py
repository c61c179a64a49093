"""Pipeline model for both parameter sets and both kernel styles, as CSV."""

import argparse
import sys

from fxpbs import perf


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--clock-mhz", type=float, default=200.0)
    a = ap.parse_args()
    reps = []
    for name in ("I", "II"):
        cfg = perf.preset(name, clock_hz=a.clock_mhz * 1e6)
        reps.append(perf.report(cfg))
        try:
            reps.append(perf.report(perf.iso_throughput(cfg)))
        except ValueError as e:
            print(f"# set {name}: no iso-throughput dot-product layout ({e})", file=sys.stderr)
    sys.stdout.write(perf.reports_to_csv(reps))


if __name__ == "__main__":
    main()
