"""Integer bits needed so a Gaussian of given sigma overflows with probability below a target."""

import argparse

import numpy as np

from fxpbs.noise import overflow_probability_log2, select_msb


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--log2-target", type=float, default=-64)
    ap.add_argument("--octaves", type=int, default=10)
    a = ap.parse_args()
    print("log2_sigma,msb,log2_overflow_at_msb")
    for k in range(a.octaves + 1):
        sigma = 2.0 ** k
        p = select_msb(sigma, 2.0 ** a.log2_target)
        print(f"{k},{p},{overflow_probability_log2(p, sigma):.2f}")
    print(f"# growth per octave: {np.diff([select_msb(2.0 ** k, 2.0 ** a.log2_target) for k in range(a.octaves + 1)]).tolist()}")


if __name__ == "__main__":
    main()
