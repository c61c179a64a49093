"""Analytic model of a streaming, batched CMUX pipeline."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace

from .datapath import PRESET_FORMATS
from .params import PARAM_SETS, TfheParams

STYLES = ("fft_unrolled", "dotproduct_unrolled")


@dataclass(frozen=True)
class PipelineConfig:
    """Pipeline shape. Streaming widths count complex coefficients per cycle.

    In the fft_unrolled style one FFT of width sw_fft serves all (k+1)l
    decomposed polynomials in turn. In the dotproduct_unrolled style there
    are (k+1)l*n_base FFT kernels and (k+1)*n_base IFFT kernels, each of the
    given width. packing_factor scales stored key bytes (1.0 = unpacked).
    """

    params: TfheParams
    clock_hz: float = 200e6
    style: str = "fft_unrolled"
    sw_fft: int = 128
    sw_ifft: int | None = None
    n_base: int = 1
    cmux_latency_cycles: int = 156
    bk_width_bits: int = 26
    packing_factor: float = 1.0

    def __post_init__(self):
        if self.style not in STYLES:
            raise ValueError(f"style must be one of {STYLES}")
        if self.clock_hz <= 0 or self.sw_fft < 1 or self.n_base < 1:
            raise ValueError("clock, streaming width and kernel count must be positive")
        if self.sw_ifft is not None and self.style == "fft_unrolled" and self.sw_fft != self.params.l * self.sw_ifft:
            raise ValueError("fft_unrolled needs sw_fft = l * sw_ifft")
        if not 0 < self.packing_factor <= 1:
            raise ValueError("packing_factor must lie in (0, 1]")

    @property
    def ifft_width(self) -> int:
        if self.sw_ifft is not None:
            return self.sw_ifft
        return self.sw_fft // self.params.l if self.style == "fft_unrolled" else self.sw_fft

    @property
    def n_fft_kernels(self) -> int:
        return 1 if self.style == "fft_unrolled" else self.params.rows * self.n_base

    @property
    def n_ifft_kernels(self) -> int:
        return 1 if self.style == "fft_unrolled" else (self.params.k + 1) * self.n_base

    def with_clock(self, clock_hz: float) -> "PipelineConfig":
        return replace(self, clock_hz=clock_hz)


@dataclass(frozen=True)
class PipelineReport:
    params_name: str
    style: str
    cycles_per_cmux: int
    batch_size: int
    latency_ms: float
    throughput_pbs_per_ms: float
    bk_entry_bytes: float
    onchip_bw_bytes_per_s: float
    offchip_bw_bytes_per_s: float
    full_bk_bytes: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def latency_delta(self, observed_ms: float) -> float:
        """Relative gap between an observed latency and the closed form."""
        return (observed_ms - self.latency_ms) / observed_ms


def cycles_per_cmux(cfg: PipelineConfig) -> int:
    """Cycles between CMUX issues: polynomial count over the FFT bank width."""
    half = cfg.params.N // 2
    width = cfg.sw_fft * (cfg.n_base if cfg.style == "dotproduct_unrolled" else 1)
    if half % width:
        raise ValueError(f"N/2 = {half} is not divisible by the FFT width {width}")
    per_poly = half // width
    if cfg.style == "fft_unrolled":
        return per_poly * cfg.params.rows
    return per_poly


def batch_size(cfg: PipelineConfig) -> int:
    """Ciphertexts interleaved to fill the pipeline."""
    c = cycles_per_cmux(cfg)
    b, rem = divmod(cfg.cmux_latency_cycles, c)
    if rem:
        lo = max(c, b * c)
        raise ValueError(f"latency {cfg.cmux_latency_cycles} is not a multiple of {c} cycles; "
                         f"nearest valid latencies are {lo} and {lo + c}")
    return b


def latency_throughput(cfg: PipelineConfig) -> tuple[float, float]:
    """(latency in ms, bootstraps per ms) for one full batch."""
    b = batch_size(cfg)
    lat_ms = cfg.params.n * b * cycles_per_cmux(cfg) / cfg.clock_hz * 1e3
    return lat_ms, b / lat_ms


def bk_entry_bytes(cfg: PipelineConfig) -> float:
    p = cfg.params
    words = p.rows * (p.k + 1) * (p.N // 2) * 2
    return words * cfg.bk_width_bits / 8 * cfg.packing_factor


def bk_bandwidth(cfg: PipelineConfig) -> tuple[float, float, float, float]:
    """(entry bytes, on-chip bytes/s, off-chip bytes/s, full key bytes)."""
    e = bk_entry_bytes(cfg)
    on = e * cfg.clock_hz / cycles_per_cmux(cfg)
    return e, on, on / batch_size(cfg), cfg.params.n * e


def packing_for(cfg: PipelineConfig, full_bytes: float) -> float:
    """Packing factor that makes the full key occupy full_bytes."""
    return full_bytes / bk_bandwidth(replace(cfg, packing_factor=1.0))[3]


def report(cfg: PipelineConfig) -> PipelineReport:
    lat, thr = latency_throughput(cfg)
    e, on, off, full = bk_bandwidth(cfg)
    return PipelineReport(cfg.params.name, cfg.style, cycles_per_cmux(cfg), batch_size(cfg),
                          lat, thr, e, on, off, full)


def iso_throughput(cfg: PipelineConfig) -> PipelineConfig:
    """dotproduct_unrolled configuration issuing CMUXes at the same rate as an fft_unrolled one."""
    if cfg.style != "fft_unrolled":
        raise ValueError("start from an fft_unrolled configuration")
    rows = cfg.params.rows
    if cfg.sw_fft % rows:
        raise ValueError(f"FFT width {cfg.sw_fft} cannot be split over {rows} kernels")
    return replace(cfg, style="dotproduct_unrolled", sw_fft=cfg.sw_fft // rows, sw_ifft=None, n_base=1)


PIPELINE_LATENCY = {"I": 156, "II": 224}


def preset(name: str, **kw) -> PipelineConfig:
    """Pipeline of the reference design for a named parameter set."""
    key = name.upper()
    params = PARAM_SETS[key]
    kw.setdefault("cmux_latency_cycles", PIPELINE_LATENCY[key])
    kw.setdefault("bk_width_bits", PRESET_FORMATS[key].bk.width)
    return PipelineConfig(params, **kw)


def reports_to_csv(reports: list[PipelineReport]) -> str:
    buf = io.StringIO()
    names = list(PipelineReport.__dataclass_fields__)
    w = csv.DictWriter(buf, fieldnames=names)
    w.writeheader()
    for r in reports:
        w.writerow(r.to_dict())
    return buf.getvalue()
