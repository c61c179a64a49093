"""Datapath configuration: which arithmetic runs the FFT-domain external product."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .fft import FftPlan, default_schedule
from .fixed_point import FixedPointFormat, Overflow, Rounding

F = FixedPointFormat


@dataclass(frozen=True)
class DatapathFormats:
    """Output-referred formats of the three approximation sources.

    bk: bootstrapping-key spectrum; fft: forward-transform output;
    ifft: inverse-transform output before the 1/(N/2) factor.
    """

    bk: FixedPointFormat
    fft: FixedPointFormat
    ifft: FixedPointFormat

    def with_widths(self, bk: int | None = None, fft: int | None = None, ifft: int | None = None):
        """Change precision (LSB) while keeping integer bits (MSB)."""
        return DatapathFormats(
            self.bk if bk is None else self.bk.with_width(bk),
            self.fft if fft is None else self.fft.with_width(fft),
            self.ifft if ifft is None else self.ifft.with_width(ifft),
        )

    def with_fractional(self, **frac):
        fmts = {k: getattr(self, k) for k in ("bk", "fft", "ifft")}
        for k, f in frac.items():
            fmts[k] = F(fmts[k].integer_bits, f)
        return DatapathFormats(**fmts)

    def as_dict(self) -> dict:
        return {"bk": str(self.bk), "fft": str(self.fft), "ifft": str(self.ifft)}

    @classmethod
    def parse(cls, bk: str, fft: str, ifft: str):
        return cls(F.parse(bk), F.parse(fft), F.parse(ifft))


# Reference hardware formats per parameter set.
PRESET_FORMATS = {
    "I": DatapathFormats(bk=F(7, 19), fft=F(15, 14), ifft=F(23, 6)),
    "II": DatapathFormats(bk=F(8, 19), fft=F(18, 12), ifft=F(27, 3)),
}


@dataclass(frozen=True)
class DatapathConfig:
    """arithmetic "reference" ignores formats; "fixed" emulates them bit-accurately."""

    arithmetic: str = "reference"
    formats: DatapathFormats | None = None
    rounding: Rounding = Rounding.TRUNCATE
    overflow: Overflow = Overflow.WRAP
    bk_rounding: Rounding = Rounding.HALF_UP
    fft_schedule: tuple[bool, ...] | None = None
    ifft_schedule: tuple[bool, ...] | None = None
    twiddle_shrink: int = 4
    native_lbeta: bool = False

    def __post_init__(self):
        if self.arithmetic not in ("reference", "fixed"):
            raise ValueError(f"unknown arithmetic {self.arithmetic!r}")
        if self.arithmetic == "fixed" and self.formats is None:
            raise ValueError("fixed datapath needs formats")

    @classmethod
    def fixed(cls, formats: DatapathFormats, **kw):
        return cls("fixed", formats, **kw)

    @classmethod
    def preset(cls, set_name: str, **kw):
        return cls("fixed", PRESET_FORMATS[set_name.upper()], **kw)

    def replace(self, **kw) -> "DatapathConfig":
        return replace(self, **kw)

    def plans(self, N: int) -> tuple[FftPlan, FftPlan]:
        stages = (N // 2).bit_length() - 1
        if self.arithmetic == "reference":
            return (FftPlan(N, False, schedule=self.fft_schedule or default_schedule(stages)),
                    FftPlan(N, True, schedule=self.ifft_schedule or default_schedule(stages)))
        kw = dict(rounding=self.rounding, overflow=self.overflow)
        fw = self.formats.fft
        iw = self.formats.ifft
        return (
            FftPlan.fixed(N, fw, False, self.fft_schedule,
                          F(1, fw.width - self.twiddle_shrink - 1), **kw),
            FftPlan.fixed(N, iw, True, self.ifft_schedule,
                          F(1, iw.width - self.twiddle_shrink - 1), **kw),
        )
