"""Water and lipid removal for MRSI spectra."""

from ._core import (
    ConfigError,
    DataError,
    FormatError,
    LipidOperator,
    MrsiError,
    NumericError,
    SpectralAxis,
    Volume,
    Weights,
    b0_correct,
    build_phantom,
    encode_and_reconstruct,
    hlsvd_decompose,
    lipid_operator,
    lipid_operator_from_volume,
    load_operator,
    load_weights,
    lowrank_denoise,
    nrmse,
    read_volume,
    remove,
    remove_water,
    residual_map,
    to_frequency,
    to_time,
    write_volume,
)

__all__ = [name for name in dir() if not name.startswith("_")]
