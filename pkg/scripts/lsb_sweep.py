"""Output approximation noise against fractional bits for each knob; writes CSVs and a summary."""

import argparse
import json
from pathlib import Path

from fxpbs.noise import KNOBS, NoiseLab, sweep_lsb, total_budget
from fxpbs.params import PARAM_SETS

RANGES = {
    "I": {"bk": range(15, 25), "fft": range(10, 19), "ifft": range(2, 11)},
    "II": {"bk": range(15, 25), "fft": range(8, 18), "ifft": range(1, 10)},
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--param-set", nargs="+", default=["I", "II"])
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--metric", default="coefficient", choices=("coefficient", "phase"))
    ap.add_argument("--rounding", default="truncate")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results/lsb")
    a = ap.parse_args()
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for name in a.param_set:
        lab = NoiseLab(PARAM_SETS[name], seed=0, rounding=a.rounding)
        budget = total_budget(lab.params)
        summary[name] = {"per_source_budget": budget.per_source}
        for knob in KNOBS:
            res = sweep_lsb(lab, knob, RANGES[name][knob], budget, a.trials, a.seed, metric=a.metric, jobs=a.jobs)
            (out / f"sweep_{name}_{knob}.csv").write_text(res.to_csv())
            summary[name][knob] = {**res.summary(), "monotone": res.is_monotone(), "floor_visible": res.floor_visible()}
            print(f"set {name} {knob}: selected {res.selected} fractional bits")
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=str))


if __name__ == "__main__":
    main()
