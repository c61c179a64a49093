"""Fixed-point parameter selection: MSB from overflow probability, LSB from noise budgets.

Approximation noise is measured by pairing: the same keys, key spectrum and
inputs go through a reference (double) datapath and a fixed-point one, and
the difference of the outputs is taken, so inherent encryption noise cancels.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import erfcinv, erfcx

from .datapath import PRESET_FORMATS, DatapathConfig, DatapathFormats
from .fft import FftPlan, TapRecorder, fft_forward
from .params import TfheParams, rng_stream
from .pbs import BootstrappingKey, Engine, monomial_mul, rotation_amount
from .torus import (
    TglweCiphertext,
    keygen,
    sample_extract,
    signed,
    tglwe_decrypt,
    tlwe_decrypt,
    tlwe_encrypt,
    uniform_torus,
)

LN2 = math.log(2.0)


# ------------------------------------------------------------------- MSB

def log2_erfc(x: float) -> float:
    """log2(erfc(x)) without underflow for large x."""
    if x < 0:
        return math.log2(math.erfc(x))
    return (math.log(erfcx(x)) - x * x) / LN2


def overflow_probability_log2(p_msb: int, sigma: float) -> float:
    """log2 of P(|X| >= 2^(p-1)) for X ~ N(0, sigma^2): 1 - erf(2^p / (2 sqrt2 sigma))."""
    return log2_erfc(2.0 ** p_msb / (2.0 * math.sqrt(2.0) * sigma))


def select_msb(sigma: float, p_of_target: float = 2.0**-64, min_msb: int = -64) -> int:
    """Smallest integer bit count p (sign included) whose Gaussian overflow
    probability is at most p_of_target."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if p_of_target >= 1:
        return min_msb
    if p_of_target <= 0:
        raise ValueError("target probability must be positive")
    t = math.log2(p_of_target)
    x = float(erfcinv(p_of_target)) if p_of_target > 1e-300 else math.sqrt(-t * LN2)
    p = max(min_msb, math.ceil(math.log2(2.0 * math.sqrt(2.0) * sigma * x)))
    # settle rounding at the boundary with the log-domain tail
    while p > min_msb and overflow_probability_log2(p - 1, sigma) <= t:
        p -= 1
    while overflow_probability_log2(p, sigma) > t:
        p += 1
    return p


# ---------------------------------------------------------------- budget

@dataclass(frozen=True)
class NoiseBudget:
    """Total tolerable output variance and its split.

    The approximation share is approx_fraction of the total variance and
    each of the three sources gets per_source_fraction of that share.
    """

    sigma2_total: float
    approx_fraction: float = 0.5
    per_source_fraction: float = 1.0 / 3.0

    def __post_init__(self):
        for f in (self.approx_fraction, self.per_source_fraction):
            if not 0 < f <= 1:
                raise ValueError("budget fractions must lie in (0, 1]")

    @property
    def approx(self) -> float:
        return self.sigma2_total * self.approx_fraction

    @property
    def per_source(self) -> float:
        return self.approx * self.per_source_fraction


def bucket_half_width(message_bits: int) -> float:
    return 2.0 ** -(message_bits + 3)


def total_budget(params: TfheParams | None = None, target_failure: float = 2.0**-32,
                 message_bits: int = 1) -> NoiseBudget:
    """Largest Gaussian output deviation keeping |e| below the bucket half
    width with probability 1 - target_failure.

    The parameter set does not enter: the bound only depends on the message
    space and the failure target.
    """
    h = bucket_half_width(message_bits)
    sigma = h / (math.sqrt(2.0) * float(erfcinv(target_failure)))
    return NoiseBudget(sigma * sigma)


# ---------------------------------------------------------------- reports

@dataclass
class VarianceReport:
    name: str
    variance: float
    mean: float
    count: int
    groups: int
    ci_low: float
    ci_high: float
    peak: float = 0.0

    @property
    def std(self) -> float:
        return math.sqrt(max(self.variance, 0.0))


def variance_from_moments(m: np.ndarray, name: str = "", resamples: int = 400,
                          seed: int = 0) -> VarianceReport:
    """Unbiased variance and a group-bootstrap 95% interval from (count, sum, sumsq, peak) rows."""
    n = m[:, 0].sum()
    s = m[:, 1].sum()
    q = m[:, 2].sum()
    var = (q - s * s / n) / (n - 1) if n > 1 else 0.0
    var = max(var, 0.0)
    G = m.shape[0]
    if G > 1 and resamples > 0:
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, G, size=(resamples, G))
        nn = m[idx, 0].sum(axis=1)
        ss = m[idx, 1].sum(axis=1)
        qq = m[idx, 2].sum(axis=1)
        vv = np.maximum((qq - ss * ss / nn) / np.maximum(nn - 1, 1), 0.0)
        lo, hi = np.percentile(vv, [2.5, 97.5])
    else:
        lo = hi = var
    return VarianceReport(name, float(var), float(s / n) if n else 0.0, int(n), G, float(lo), float(hi),
                          float(m[:, 3].max(initial=0.0)))


def _report_from_samples(groups: list[np.ndarray], name: str, seed: int = 0) -> VarianceReport:
    m = np.array([(g.size, g.sum(), np.dot(g, g), np.abs(g).max(initial=0.0)) for g in groups])
    return variance_from_moments(m, name, seed=seed)


# --------------------------------------------------------------- workloads

class Workload:
    """Something that drives datapath taps for a number of trials."""

    taps: tuple[str, ...] = ()

    def run(self, trials: int, seed: int, taps: TapRecorder) -> None:
        raise NotImplementedError


@dataclass
class ZeroFftWorkload(Workload):
    """Zero polynomials through the forward transform."""

    params: TfheParams
    config: DatapathConfig = field(default_factory=DatapathConfig)

    def run(self, trials, seed, taps):
        fwd, _ = self.config.plans(self.params.N)
        fft_forward(np.zeros((trials, self.params.N), np.uint32), fwd, taps=taps)


@dataclass
class UniformFftWorkload(Workload):
    """Uniform torus polynomials through the forward transform."""

    params: TfheParams
    config: DatapathConfig = field(default_factory=DatapathConfig)
    plan: FftPlan | None = None

    def run(self, trials, seed, taps):
        plan = self.plan or self.config.plans(self.params.N)[0]
        rng = rng_stream(seed, "uniform-fft")
        for s in range(0, trials, 256):
            p = uniform_torus(rng, (min(256, trials - s), self.params.N))
            fft_forward(p, plan, taps=taps)


@dataclass
class CmuxWorkload(Workload):
    """One CMUX per trial on a uniformly random accumulator with a random key entry."""

    lab: "NoiseLab"
    config: DatapathConfig = field(default_factory=DatapathConfig)

    def run(self, trials, seed, taps):
        eng = Engine(self.lab.params, self.config, taps)
        entries = self.lab.bk.prepared(self.config, eng.policy)
        for acc, r, idx in self.lab.cmux_inputs(trials, seed):
            for i in np.unique(idx):
                sel = idx == i
                entry = entries[i] if not eng.is_fixed else tuple(x[i] for x in entries)
                eng.cmux(acc[sel], entry, r[sel])


@dataclass
class BootstrapWorkload(Workload):
    """Full bootstraps with random test polynomials and random inputs."""

    lab: "NoiseLab"
    config: DatapathConfig = field(default_factory=DatapathConfig)

    def run(self, trials, seed, taps):
        eng = Engine(self.lab.params, self.config, taps)
        ct, luts = self.lab.pbs_inputs(trials, seed)
        eng.bootstrap(ct, luts, self.lab.bk, batch_size=64)


def measure_variance(tap: str, workload: Workload, trials: int, seed: int = 0) -> VarianceReport:
    """Sample variance of values seen at a named datapath point."""
    if trials < 100:
        raise ValueError("need at least 100 trials")
    rec = TapRecorder([tap])
    workload.run(trials, seed, rec)
    return variance_from_moments(rec.moments(tap), tap, seed=seed)


# ------------------------------------------------------------- output noise

@dataclass
class NoiseMeasurement:
    """Paired approximation noise, scaled to one bootstrap output.

    For method "cmux" the per-CMUX variance is multiplied by n (independent
    errors from every blind-rotation iteration add up).
    """

    variance: float
    ci_low: float
    ci_high: float
    per_step_variance: float
    mean: float
    samples: int
    trials: int
    method: str
    metric: str
    overflows: int = 0


class NoiseLab:
    """Keys, key spectrum and paired measurements for one parameter set."""

    def __init__(self, params: TfheParams, seed: int = 0, base_formats: DatapathFormats | None = None,
                 rounding: str = "truncate"):
        self.params = params
        self.seed = seed
        self.keys = keygen(params, seed)
        self.bk = BootstrappingKey.generate(self.keys, seed)
        self.base_formats = base_formats or PRESET_FORMATS.get(params.name)
        self.rounding = rounding
        self.reference = DatapathConfig()
        self._inherent = {}

    # ---- inputs shared by both datapaths

    def cmux_inputs(self, trials: int, seed: int, chunk: int = 128):
        p = self.params
        rng = rng_stream(seed, "cmux-inputs")
        for s in range(0, trials, chunk):
            b = min(chunk, trials - s)
            acc = TglweCiphertext(uniform_torus(rng, (b, p.k + 1, p.N)))
            r = rng.integers(0, 2 * p.N, size=b)
            idx = rng.integers(0, p.n, size=b)
            yield acc, r, idx

    def pbs_inputs(self, trials: int, seed: int):
        p = self.params
        rng = rng_stream(seed, "pbs-inputs")
        mu = uniform_torus(rng, trials)
        ct = tlwe_encrypt(mu, self.keys.tlwe_key, p.sigma_tlwe, rng)
        luts = uniform_torus(rng, (trials, p.N))
        return ct, luts

    def config(self, formats: DatapathFormats | None, **kw) -> DatapathConfig:
        if formats is None:
            return self.reference
        kw.setdefault("rounding", self.rounding)
        return DatapathConfig.fixed(formats, **kw)

    def base(self, width: int = 53) -> DatapathFormats:
        return self.base_formats.with_widths(width, width, width)

    # ---- measurements

    def _cmux_pair(self, cfg_a: DatapathConfig, cfg_b: DatapathConfig, trials: int, seed: int, metric: str):
        p = self.params
        ea, eb = Engine(p, cfg_a), Engine(p, cfg_b)
        pa, pb = self.bk.prepared(cfg_a, ea.policy), self.bk.prepared(cfg_b, eb.policy)
        groups = []
        for acc, r, idx in self.cmux_inputs(trials, seed):
            for i in np.unique(idx):
                sel = idx == i
                xa = pa[i] if not ea.is_fixed else tuple(x[i] for x in pa)
                xb = pb[i] if not eb.is_fixed else tuple(x[i] for x in pb)
                oa = ea.cmux(acc[sel], xa, r[sel])
                ob = eb.cmux(acc[sel], xb, r[sel])
                if metric == "coefficient":
                    d = signed(oa.data - ob.data)
                else:
                    d = signed(tglwe_decrypt(oa, self.keys.tglwe_key) - tglwe_decrypt(ob, self.keys.tglwe_key))
                d = d.astype(np.float64) / 2.0**32
                groups.extend(list(d.reshape(d.shape[0], -1)))
        return groups, ea.policy.count + eb.policy.count

    def expected_outputs(self, ct, luts) -> np.ndarray:
        """Noise-free bootstrap results: LUT coefficient selected by the
        rounded phase, computed in the clear."""
        p = self.params
        N = p.N
        rb = rotation_amount(ct.b, N)
        ra = rotation_amount(ct.a, N)
        r = (rb - (ra * self.keys.tlwe_key.astype(np.int64)).sum(axis=-1)) % (2 * N)
        acc = monomial_mul(TglweCiphertext.trivial(np.asarray(luts, np.uint32), p.k), (2 * N - r) % (2 * N))
        return acc.b[..., 0]

    def inherent_noise(self, trials: int = 200, seed: int = 2, formats: DatapathFormats | None = None,
                       **cfg) -> VarianceReport:
        """Output error of real bootstraps against their noise-free results."""
        key = (trials, seed, formats, tuple(sorted(cfg.items())))
        if key in self._inherent:
            return self._inherent[key]
        ct, luts = self.pbs_inputs(trials, seed)
        out, _ = Engine(self.params, self.config(formats, **cfg)).bootstrap(ct, luts, self.bk, batch_size=64)
        ph = tlwe_decrypt(out, self.keys.extracted_key)
        d = signed(ph - self.expected_outputs(ct, luts)).astype(np.float64) / 2.0**32
        self._inherent[key] = _report_from_samples(list(d.reshape(-1, 1)), "inherent", seed)
        return self._inherent[key]

    def _pbs_pair(self, cfg_a, cfg_b, trials, seed):
        ct, luts = self.pbs_inputs(trials, seed)
        ea, eb = Engine(self.params, cfg_a), Engine(self.params, cfg_b)
        oa, ra = ea.bootstrap(ct, luts, self.bk, batch_size=64)
        ob, rb = eb.bootstrap(ct, luts, self.bk, batch_size=64)
        key = self.keys.extracted_key
        d = signed(tlwe_decrypt(oa, key) - tlwe_decrypt(ob, key)).astype(np.float64) / 2.0**32
        return list(d.reshape(-1, 1)), ra.overflow_count + rb.overflow_count

    def measure_output_noise(self, formats: DatapathFormats | None, trials: int = 1000, seed: int = 1,
                             method: str = "cmux", metric: str = "coefficient",
                             against: DatapathFormats | None = None, **cfg) -> NoiseMeasurement:
        """Variance of (datapath(formats) - datapath(against)) on identical inputs.

        formats/against None mean the double-precision reference. metric
        "coefficient" compares ciphertext components, "phase" decrypted
        phases. A full bootstrap ("pbs") supports only the phase metric:
        component differences decorrelate once the two paths round a
        decomposition digit differently.
        """
        if metric not in ("coefficient", "phase"):
            raise ValueError(f"unknown metric {metric!r}")
        ca = self.config(formats, **cfg)
        cb = self.config(against, **cfg)
        if method == "cmux":
            groups, over = self._cmux_pair(ca, cb, trials, seed, metric)
            scale = self.params.n
        elif method == "pbs":
            if metric != "phase":
                raise ValueError("full-bootstrap pairing supports only the phase metric")
            groups, over = self._pbs_pair(ca, cb, trials, seed)
            scale = 1
        else:
            raise ValueError(f"unknown method {method!r}")
        rep = _report_from_samples(groups, "output", seed)
        return NoiseMeasurement(rep.variance * scale, rep.ci_low * scale, rep.ci_high * scale,
                                rep.variance, rep.mean, rep.count, trials, method, metric, over)


# ------------------------------------------------------------------- sweep

KNOBS = ("bk", "fft", "ifft")


class NoFeasibleWidth(ValueError):
    pass


@dataclass
class SweepPoint:
    knob: str
    fractional_bits: int
    variance: float
    ci_low: float
    ci_high: float
    trials: int


@dataclass
class SweepResult:
    params_name: str
    knob: str
    budget: float
    points: list[SweepPoint]
    selected: int | None
    floor: float | None = None
    metric: str = "coefficient"

    def totals(self) -> list[float]:
        """Total output variance per point: noise floor plus approximation noise."""
        f = self.floor or 0.0
        return [f + p.variance for p in self.points]

    def is_monotone(self, slack: float = 0.0) -> bool:
        """Variance nonincreasing as fractional bits grow, up to a relative slack."""
        v = [p.variance for p in sorted(self.points, key=lambda p: p.fractional_bits)]
        return all(b <= a * (1 + slack) for a, b in zip(v, v[1:]))

    def floor_visible(self, tol: float = 0.1) -> bool:
        """The widest point sits within tol of the floor while the narrowest rises clearly above it."""
        if not self.floor:
            return False
        t = self.totals()
        i_lo = min(range(len(t)), key=lambda i: self.points[i].fractional_bits)
        i_hi = max(range(len(t)), key=lambda i: self.points[i].fractional_bits)
        return t[i_hi] <= self.floor * (1 + tol) and t[i_lo] >= self.floor * (1 + 10 * tol)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["knob", "fractional_bits", "variance", "ci_low", "ci_high", "trials"])
        for p in self.points:
            w.writerow([p.knob, p.fractional_bits, repr(p.variance), repr(p.ci_low), repr(p.ci_high), p.trials])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"params": self.params_name, "knob": self.knob, "budget": self.budget,
                "selected_fractional_bits": self.selected, "floor": self.floor, "metric": self.metric}

    def to_json(self) -> str:
        d = self.summary()
        d["points"] = [asdict(p) for p in self.points]
        return json.dumps(d, indent=2)


def points_from_csv(text: str) -> list[SweepPoint]:
    rows = csv.DictReader(io.StringIO(text))
    return [SweepPoint(r["knob"], int(r["fractional_bits"]), float(r["variance"]), float(r["ci_low"]),
                       float(r["ci_high"]), int(r["trials"])) for r in rows]


def select_fractional_bits(points: list[SweepPoint], budget: float) -> int:
    """Lower the width from the top until the variance first exceeds the budget.

    Returns the last width that met the budget. This equals the smallest
    passing width whenever the curve is monotone.
    """
    pts = sorted(points, key=lambda p: -p.fractional_bits)
    chosen = None
    for p in pts:
        if p.variance <= budget:
            chosen = p.fractional_bits
        else:
            break
    if chosen is None:
        raise NoFeasibleWidth("no candidate width meets the budget")
    return chosen


_worker_lab: NoiseLab | None = None


def _init_worker(lab: NoiseLab) -> None:
    global _worker_lab
    _worker_lab = lab


def _measure_point(args) -> NoiseMeasurement:
    fm, trials, seed, method, metric = args
    return _worker_lab.measure_output_noise(fm, trials, seed, method=method, metric=metric)


def sweep_lsb(lab: NoiseLab, knob: str, fractional_bits, budget: NoiseBudget | float | None = None,
              trials: int = 1000, seed: int = 1, base_width: int = 53, metric: str = "coefficient",
              method: str = "cmux", floor_trials: int = 200, jobs: int = 1) -> SweepResult:
    """Measure output approximation noise for each candidate fractional-bit
    count of one knob, the other knobs held at base_width bits.

    The floor is the inherent output noise of the reference datapath; it is
    skipped when floor_trials is 0. Points run in `jobs` worker processes;
    every point uses the same inputs, so results do not depend on jobs.
    """
    if knob not in KNOBS:
        raise ValueError(f"knob must be one of {KNOBS}")
    cands = sorted(set(int(f) for f in fractional_bits))
    if not cands:
        raise ValueError("empty candidate range")
    if budget is None:
        budget = total_budget(lab.params)
    limit = budget.per_source if isinstance(budget, NoiseBudget) else float(budget)
    base = lab.base(base_width)
    jobs_args = [(base.with_fractional(**{knob: f}), trials, seed, method, metric) for f in cands]
    if jobs > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(lab,)) as ex:
            ms = list(ex.map(_measure_point, jobs_args))
    else:
        ms = [lab.measure_output_noise(*a[:3], method=a[3], metric=a[4]) for a in jobs_args]
    points = [SweepPoint(knob, f, m.variance, m.ci_low, m.ci_high, trials) for f, m in zip(cands, ms)]
    floor = lab.inherent_noise(floor_trials, seed + 1).variance if floor_trials else None
    sel = select_fractional_bits(points, limit) if math.isfinite(limit) else cands[0]
    return SweepResult(lab.params.name, knob, limit, points, sel, floor, metric)
