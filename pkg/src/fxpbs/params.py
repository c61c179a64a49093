"""TFHE parameter sets and seeded random streams."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class TfheParams:
    """Scheme parameters over the 32-bit discretized torus.

    n is the TLWE dimension, k the TGLWE dimension, N the ring degree,
    beta/l the gadget base log and level count. Noise deviations are in
    torus units (fractions of 1).
    """

    n: int
    k: int
    N: int
    beta: int
    l: int
    sigma_tlwe: float
    sigma_tglwe: float
    name: str = ""

    def __post_init__(self):
        if self.N < 2 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two, got {self.N}")
        if min(self.n, self.k, self.l, self.beta) < 1:
            raise ValueError("n, k, l and beta must be >= 1")
        if self.l * self.beta > 32:
            raise ValueError("l * beta must not exceed 32")
        if self.sigma_tlwe < 0 or self.sigma_tglwe < 0:
            raise ValueError("noise deviations must be non-negative")

    @property
    def log2_N(self) -> int:
        return self.N.bit_length() - 1

    @property
    def rows(self) -> int:
        """Rows of a TGGSW ciphertext, (k+1)*l."""
        return (self.k + 1) * self.l

    @property
    def extracted_dim(self) -> int:
        return self.k * self.N

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> int:
        """64-bit fingerprint used in serialized headers."""
        d = {k: v for k, v in self.to_dict().items() if k != "name"}
        blob = json.dumps(d, sort_keys=True).encode()
        return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")

    def with_noise(self, sigma_tlwe: float | None = None, sigma_tglwe: float | None = None) -> "TfheParams":
        return TfheParams(
            self.n, self.k, self.N, self.beta, self.l,
            self.sigma_tlwe if sigma_tlwe is None else sigma_tlwe,
            self.sigma_tglwe if sigma_tglwe is None else sigma_tglwe,
            self.name,
        )


# Set I: boolean-gate parameters of the Concrete library (noise from its defaults).
SET_I = TfheParams(
    n=586, k=2, N=512, beta=8, l=2,
    sigma_tlwe=0.00008976167396834998,
    sigma_tglwe=0.00000002989040792967434,
    name="I",
)

# Set II: the classic TFHE gate-bootstrapping parameters.
SET_II = TfheParams(
    n=500, k=1, N=1024, beta=10, l=2,
    sigma_tlwe=2.44e-5,
    sigma_tglwe=7.18e-9,
    name="II",
)

PARAM_SETS = {"I": SET_I, "II": SET_II}


def get_params(name: str) -> TfheParams:
    try:
        return PARAM_SETS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown parameter set {name!r}, expected one of {sorted(PARAM_SETS)}") from None


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named purpose derived from one seed.

    Keys, ciphertext masks and noise draw from separate streams so that
    changing one experiment knob does not reshuffle the others.
    """
    words = np.frombuffer(hashlib.sha256(name.encode()).digest()[:8], dtype=np.uint32)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, words)])))
