"""Bootstrapped NAND over all four input pairs, fixed and reference datapaths."""

import argparse
import json
import time

import numpy as np

from fxpbs.datapath import PRESET_FORMATS, DatapathConfig
from fxpbs.fixed_point import Rounding
from fxpbs.params import PARAM_SETS, rng_stream
from fxpbs.pbs import BootstrappingKey, Engine, decode_bit, encode_bit, gate_nand
from fxpbs.torus import TlweCiphertext, keygen, tlwe_decrypt, tlwe_encrypt


def run(name, per_pair, seed, rounding, batch):
    params = PARAM_SETS[name]
    keys = keygen(params, seed)
    bk = BootstrappingKey.generate(keys, seed)
    rng = rng_stream(seed, "nand-script")
    x = np.repeat([False, False, True, True], per_pair)
    y = np.tile(np.repeat([False, True], per_pair), 2)
    c1 = tlwe_encrypt(encode_bit(x), keys.tlwe_key, params.sigma_tlwe, rng)
    c2 = tlwe_encrypt(encode_bit(y), keys.tlwe_key, params.sigma_tlwe, rng)
    rows = {}
    configs = {
        "reference": DatapathConfig(),
        "fixed": DatapathConfig.fixed(PRESET_FORMATS[name], rounding=Rounding(rounding)),
    }
    for label, cfg in configs.items():
        eng = Engine(params, cfg)
        t0, outs, over = time.time(), [], 0
        for s in range(0, x.size, batch):
            o, rep = gate_nand(c1[s:s + batch], c2[s:s + batch], bk, engine=eng)
            outs.append(o.data)
            over += rep.overflow_count
        got = decode_bit(tlwe_decrypt(TlweCiphertext(np.concatenate(outs)), keys.extracted_key))
        ok = got == ~(x & y)
        rows[label] = {
            "correct": int(ok.sum()), "total": int(ok.size), "overflow_events": over,
            "per_pair": {f"{a}{b}": int(ok[i * per_pair:(i + 1) * per_pair].sum())
                         for i, (a, b) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)])},
            "seconds": round(time.time() - t0, 1),
        }
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--param-set", default="I", choices=sorted(PARAM_SETS))
    ap.add_argument("--per-pair", type=int, default=250)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--rounding", default="truncate", choices=[r.value for r in Rounding])
    ap.add_argument("--batch", type=int, default=100)
    a = ap.parse_args()
    print(json.dumps(run(a.param_set, a.per_pair, a.seed, a.rounding, a.batch), indent=2))


if __name__ == "__main__":
    main()
