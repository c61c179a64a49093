"""Command-line front end: keys, ciphertexts, bootstraps, sweeps and reports."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import perf, serialize
from .datapath import PRESET_FORMATS, DatapathConfig, DatapathFormats
from .fixed_point import FixedPointFormat, Overflow, Rounding
from .noise import KNOBS, NoFeasibleWidth, NoiseLab, SweepResult, points_from_csv, select_fractional_bits, \
    select_msb, sweep_lsb, total_budget
from .params import PARAM_SETS, TfheParams, rng_stream
from .pbs import EIGHTH, BootstrappingKey, Engine, build_lut, constant_lut, decode_bit, decode_message, \
    encode_bit, encode_message
from .torus import SecretKeys, TggswCiphertext, TlweCiphertext, keygen, tggsw_encrypt, tlwe_decrypt, tlwe_encrypt

EXIT_USAGE = 2
EXIT_FILE = 3
EXIT_PARSE = 4
EXIT_PARAM = 5
EXIT_INFEASIBLE = 6
EXIT_INTERNAL = 1

SECRET_FILE = "secret.key"
BK_FILE = "bootstrapping.key"


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, "usage", message)


@dataclass
class RunConfig:
    params: TfheParams
    formats: DatapathFormats | None
    fft_mode: str
    seed: int
    trials: int
    out: str | None
    rounding: str = "truncate"
    overflow: str = "wrap"

    def datapath(self) -> DatapathConfig:
        if self.fft_mode == "reference":
            return DatapathConfig()
        if self.formats is None:
            raise CliError(EXIT_PARAM, "parameter", "fixed mode needs formats for a custom parameter set")
        return DatapathConfig.fixed(self.formats, rounding=Rounding(self.rounding), overflow=Overflow(self.overflow))


def parse_formats(text: str, base: DatapathFormats | None) -> DatapathFormats:
    """"bk=26:7:19,fft=29:15:14,ifft=29:23:6"; missing knobs keep the preset."""
    fm = {} if base is None else {"bk": base.bk, "fft": base.fft, "ifft": base.ifft}
    for part in filter(None, (s.strip() for s in text.split(","))):
        key, sep, val = part.partition("=")
        if not sep or key not in KNOBS:
            raise CliError(EXIT_PARSE, "parse", f"bad format item {part!r}")
        try:
            fm[key] = FixedPointFormat.parse(val)
        except ValueError as e:
            raise CliError(EXIT_PARSE, "parse", str(e)) from None
    if set(fm) != set(KNOBS):
        raise CliError(EXIT_PARSE, "parse", "formats need bk, fft and ifft")
    return DatapathFormats(**fm)


def load_param_set(spec: str) -> tuple[TfheParams, DatapathFormats | None]:
    if spec.upper() in PARAM_SETS:
        return PARAM_SETS[spec.upper()], PRESET_FORMATS[spec.upper()]
    path = Path(spec)
    if not path.exists():
        raise CliError(EXIT_FILE, "file", f"no parameter set or file named {spec!r}")
    try:
        doc = json.loads(path.read_text())
        fm = doc.pop("formats", None)
        params = TfheParams(**doc)
        formats = None if fm is None else parse_formats(",".join(f"{k}={v}" for k, v in fm.items()), None)
    except (json.JSONDecodeError, TypeError) as e:
        raise CliError(EXIT_PARSE, "parse", f"{path}: {e}") from None
    return params, formats


def run_config(args) -> RunConfig:
    params, formats = load_param_set(args.param_set)
    if args.formats:
        formats = parse_formats(args.formats, formats)
    return RunConfig(params, formats, args.fft_mode, args.seed, args.trials, args.out,
                     args.rounding, args.overflow)


# ------------------------------------------------------------- file I/O

def _read(path: str) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_FILE, "file", f"missing file {path}")
    return p.read_bytes()


def _load(path: str, params: TfheParams, kind):
    try:
        obj = serialize.loads(_read(path), params)
    except (ValueError, EOFError) as e:
        raise CliError(EXIT_PARSE, "parse", f"{path}: {e}") from None
    if not isinstance(obj, kind):
        raise CliError(EXIT_PARSE, "parse", f"{path} holds {type(obj).__name__}, expected {kind.__name__}")
    return obj


def _keydir(args) -> Path:
    return Path(args.keys)


def _load_bk(args, params) -> BootstrappingKey:
    ggsw = _load(str(_keydir(args) / BK_FILE), params, TggswCiphertext)
    return BootstrappingKey.from_tggsw(ggsw, params)


def _write_bytes(path: str | None, blob: bytes) -> None:
    if path is None:
        raise CliError(EXIT_USAGE, "usage", "--out is required for binary output")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(blob)


def _emit(doc, out: str | None, text: str | None = None) -> None:
    text = text if text is not None else json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


# --------------------------------------------------------------- verbs

def cmd_keygen(args):
    rc = run_config(args)
    if rc.out is None:
        raise CliError(EXIT_USAGE, "usage", "--out must name the key directory")
    keys = keygen(rc.params, rc.seed)
    ggsw = tggsw_encrypt(keys.tlwe_key, keys, rc.params.sigma_tglwe, rc.params, rng_stream(rc.seed, "bootstrapping-key"))
    d = Path(rc.out)
    d.mkdir(parents=True, exist_ok=True)
    (d / SECRET_FILE).write_bytes(serialize.dumps(keys, rc.params))
    (d / BK_FILE).write_bytes(serialize.dumps(ggsw, rc.params))
    sys.stdout.write(json.dumps({"keys": str(d / SECRET_FILE), "bootstrapping_key": str(d / BK_FILE)}) + "\n")


def _plaintext(args) -> np.ndarray:
    if args.bit is not None:
        return encode_bit(np.array(args.bit, dtype=bool))
    if args.message is not None:
        return encode_message(np.array(args.message), args.message_bits)
    raise CliError(EXIT_USAGE, "usage", "give --bit or --message")


def cmd_encrypt(args):
    rc = run_config(args)
    keys = _load(str(_keydir(args) / SECRET_FILE), rc.params, SecretKeys)
    mu = _plaintext(args)
    ct = tlwe_encrypt(mu, keys.tlwe_key, rc.params.sigma_tlwe, rng_stream(rc.seed, "encrypt"))
    _write_bytes(rc.out, serialize.dumps(ct, rc.params))


def cmd_decrypt(args):
    rc = run_config(args)
    keys = _load(str(_keydir(args) / SECRET_FILE), rc.params, SecretKeys)
    ct = _load(args.ct, rc.params, TlweCiphertext)
    key = keys.tlwe_key if ct.dim == rc.params.n else keys.extracted_key
    if ct.dim != key.size:
        raise CliError(EXIT_PARAM, "parameter", f"ciphertext dimension {ct.dim} matches no key")
    ph = np.atleast_1d(tlwe_decrypt(ct, key))
    doc = {
        "phase": [int(x) for x in ph],
        "bit": [int(x) for x in decode_bit(ph)],
        "message": [int(x) for x in decode_message(ph, args.message_bits)],
    }
    _emit(doc, rc.out)


LUTS = {
    "identity": lambda m, p: m / 2 ** (p + 1),
    "negate": lambda m, p: ((-m) % (1 << p)) / 2 ** (p + 1),
    "square": lambda m, p: (m * m % (1 << p)) / 2 ** (p + 1),
    "relu": lambda m, p: (m if m < (1 << (p - 1)) else 0) / 2 ** (p + 1),
}


def cmd_pbs(args):
    rc = run_config(args)
    if args.lut not in LUTS:
        raise CliError(EXIT_PARAM, "parameter", f"unknown function {args.lut!r}, choose from {sorted(LUTS)}")
    ct = _load(args.ct, rc.params, TlweCiphertext)
    bk = _load_bk(args, rc.params)
    f = LUTS[args.lut]
    lut = build_lut(lambda m: f(m, args.message_bits), rc.params, args.message_bits)
    out, rep = Engine(rc.params, rc.datapath()).bootstrap(ct, lut, bk)
    _write_bytes(rc.out, serialize.dumps(out, rc.params))
    sys.stdout.write(json.dumps({"overflow_count": rep.overflow_count, "bk_reads": rep.bk_reads}) + "\n")


def _gate_input(op: str, c1: TlweCiphertext, c2: TlweCiphertext) -> TlweCiphertext:
    def const(v):
        return TlweCiphertext.trivial(np.full(c1.b.shape, v, np.uint32), c1.dim)
    neg_eighth = np.uint32(2**32 - int(EIGHTH))
    if op == "nand":
        return const(EIGHTH) - c1 - c2
    if op == "and":
        return const(neg_eighth) + c1 + c2
    if op == "or":
        return const(EIGHTH) + c1 + c2
    if op == "xor":
        s = c1 + c2
        return s + s + const(np.uint32(1 << 30))
    raise CliError(EXIT_PARAM, "parameter", f"unknown gate {op!r}")


def cmd_gate(args):
    rc = run_config(args)
    c1 = _load(args.inputs[0], rc.params, TlweCiphertext)
    c2 = _load(args.inputs[1], rc.params, TlweCiphertext)
    lin = _gate_input(args.op, c1, c2)
    bk = _load_bk(args, rc.params)
    out, rep = Engine(rc.params, rc.datapath()).bootstrap(lin, constant_lut(1 / 8, rc.params), bk)
    _write_bytes(rc.out, serialize.dumps(out, rc.params))
    sys.stdout.write(json.dumps({"overflow_count": rep.overflow_count, "bk_reads": rep.bk_reads}) + "\n")


def _range(text: str) -> range:
    lo, sep, hi = text.partition(":")
    try:
        return range(int(lo), int(hi) + 1) if sep else range(int(lo), int(lo) + 1)
    except ValueError:
        raise CliError(EXIT_PARSE, "parse", f"bad range {text!r}, expected lo:hi") from None


def cmd_sweep(args):
    rc = run_config(args)
    budget = total_budget(rc.params, args.target_failure)
    if args.from_csv:
        pts = points_from_csv(_read(args.from_csv).decode())
        sel = select_fractional_bits(pts, budget.per_source if args.budget is None else args.budget)
        _emit({"knob": pts[0].knob if pts else None, "selected_fractional_bits": sel}, rc.out)
        return
    if rc.formats is None:
        raise CliError(EXIT_PARAM, "parameter", "sweeps need integer-bit formats")
    lab = NoiseLab(rc.params, rc.seed, rc.formats, rc.rounding)
    knobs = KNOBS if args.knob == "all" else (args.knob,)
    limit = budget if args.budget is None else args.budget
    summary = {"params": rc.params.name, "per_source_budget": budget.per_source, "knobs": {}}
    outdir = Path(rc.out) if rc.out else None
    for knob in knobs:
        res: SweepResult = sweep_lsb(lab, knob, _range(getattr(args, f"{knob}_range")), limit, rc.trials,
                                     rc.seed + 1, args.base_width, args.metric, args.method,
                                     floor_trials=args.floor_trials, jobs=args.jobs)
        summary["knobs"][knob] = res.summary()
        if outdir is not None:
            outdir.mkdir(parents=True, exist_ok=True)
            (outdir / f"sweep_{rc.params.name or 'custom'}_{knob}.csv").write_text(res.to_csv())
        else:
            sys.stdout.write(res.to_csv())
    _emit(summary, None if outdir is None else str(outdir / "summary.json"))


def cmd_select_msb(args):
    try:
        p = select_msb(args.sigma, 2.0 ** args.log2_target)
    except ValueError as e:
        raise CliError(EXIT_PARAM, "parameter", str(e)) from None
    _emit({"sigma": args.sigma, "log2_target": args.log2_target, "msb": p}, args.out)


def cmd_perf(args):
    rc = run_config(args)
    params, formats = rc.params, rc.formats
    key = args.param_set.upper()
    kw = dict(clock_hz=args.clock_mhz * 1e6, style=args.style, sw_fft=args.sw_fft, n_base=args.n_base,
              packing_factor=args.packing)
    if args.latency_cycles is not None:
        kw["cmux_latency_cycles"] = args.latency_cycles
    if formats is not None:
        kw["bk_width_bits"] = formats.bk.width
    if key in PARAM_SETS:
        cfg = perf.preset(key, **kw)
    else:
        if args.latency_cycles is None:
            raise CliError(EXIT_PARAM, "parameter", "custom parameter sets need --latency-cycles")
        cfg = perf.PipelineConfig(params, **kw)
    try:
        rep = perf.report(cfg)
    except ValueError as e:
        raise CliError(EXIT_PARAM, "parameter", str(e)) from None
    if args.csv:
        _emit(None, args.out, perf.reports_to_csv([rep]))
    else:
        _emit(rep.to_dict(), args.out)


# -------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--param-set", default="I", help="I, II or a JSON parameter file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=1000)
    common.add_argument("--fft-mode", choices=("reference", "fixed"), default="fixed")
    common.add_argument("--formats", default=None, help="bk=26:7:19,fft=29:15:14,ifft=29:23:6")
    common.add_argument("--rounding", choices=[r.value for r in Rounding], default="truncate")
    common.add_argument("--overflow", choices=[o.value for o in Overflow], default="wrap")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--out", default=None)

    ap = _Parser(prog="fxpbs", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("keygen", parents=[common])
    p.set_defaults(fn=cmd_keygen)

    p = sub.add_parser("encrypt", parents=[common])
    p.add_argument("--keys", required=True)
    p.add_argument("--bit", type=int, nargs="+")
    p.add_argument("--message", type=int, nargs="+")
    p.add_argument("--message-bits", type=int, default=1)
    p.set_defaults(fn=cmd_encrypt)

    p = sub.add_parser("decrypt", parents=[common])
    p.add_argument("--keys", required=True)
    p.add_argument("--ct", required=True)
    p.add_argument("--message-bits", type=int, default=1)
    p.set_defaults(fn=cmd_decrypt)

    p = sub.add_parser("pbs", parents=[common])
    p.add_argument("--keys", required=True)
    p.add_argument("--ct", required=True)
    p.add_argument("--lut", default="identity")
    p.add_argument("--message-bits", type=int, default=2)
    p.set_defaults(fn=cmd_pbs)

    p = sub.add_parser("gate", parents=[common])
    p.add_argument("--keys", required=True)
    p.add_argument("--op", default="nand", choices=("nand", "and", "or", "xor"))
    p.add_argument("inputs", nargs=2)
    p.set_defaults(fn=cmd_gate)

    p = sub.add_parser("sweep", parents=[common])
    p.add_argument("--knob", default="all", choices=("all",) + KNOBS)
    p.add_argument("--bk-range", default="15:24")
    p.add_argument("--fft-range", default="10:18")
    p.add_argument("--ifft-range", default="1:10")
    p.add_argument("--base-width", type=int, default=53)
    p.add_argument("--metric", choices=("coefficient", "phase"), default="coefficient")
    p.add_argument("--method", choices=("cmux", "pbs"), default="cmux")
    p.add_argument("--budget", type=float, default=None, help="per-source variance limit")
    p.add_argument("--target-failure", type=float, default=2.0**-32)
    p.add_argument("--floor-trials", type=int, default=200)
    p.add_argument("--from-csv", default=None, help="re-run selection on a saved sweep")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("select-msb", parents=[common])
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--log2-target", type=float, default=-64.0)
    p.set_defaults(fn=cmd_select_msb)

    p = sub.add_parser("perf", parents=[common])
    p.add_argument("--style", choices=perf.STYLES, default="fft_unrolled")
    p.add_argument("--clock-mhz", type=float, default=200.0)
    p.add_argument("--sw-fft", type=int, default=128)
    p.add_argument("--n-base", type=int, default=1)
    p.add_argument("--latency-cycles", type=int, default=None)
    p.add_argument("--packing", type=float, default=1.0)
    p.add_argument("--csv", action="store_true")
    p.set_defaults(fn=cmd_perf)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.fn(args)
        return 0
    except CliError as e:
        err = {"error": e.kind, "message": str(e)}
        code = e.code
    except NoFeasibleWidth as e:
        err, code = {"error": "infeasible", "message": str(e)}, EXIT_INFEASIBLE
    except ValueError as e:
        err, code = {"error": "parameter", "message": str(e)}, EXIT_PARAM
    except OSError as e:
        err, code = {"error": "file", "message": str(e)}, EXIT_FILE
    sys.stderr.write(json.dumps(err) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
