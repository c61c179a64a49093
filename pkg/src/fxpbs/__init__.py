"""Bit-accurate emulation of fixed-point TFHE programmable bootstrapping."""

from .datapath import PRESET_FORMATS, DatapathConfig, DatapathFormats
from .fixed_point import FixedPointFormat, Overflow, Rounding
from .params import PARAM_SETS, SET_I, SET_II, TfheParams, get_params
from .pbs import BootstrappingKey, Engine, bootstrap, build_lut, gate_nand
from .torus import keygen

__all__ = [
    "PRESET_FORMATS", "DatapathConfig", "DatapathFormats", "FixedPointFormat", "Overflow", "Rounding",
    "PARAM_SETS", "SET_I", "SET_II", "TfheParams", "get_params", "BootstrappingKey", "Engine",
    "bootstrap", "build_lut", "gate_nand", "keygen",
]
