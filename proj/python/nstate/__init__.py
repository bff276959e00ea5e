"""EEG state classification: models, preprocessing and evaluation."""

from ._nstate import (
    ContractError,
    FormatError,
    Model,
    NumericError,
    band_powers,
    bce_loss,
    cogn26_channels,
    compute_metrics,
    design_bandpass,
    filtfilt,
    param_audit,
    ransac_bad_channels,
    read_container,
    run_cli,
    spline_g,
    spline_interpolate,
    stratified_group_kfold,
    synthetic_montage,
    welch_psd,
)

__all__ = [
    "ContractError",
    "FormatError",
    "Model",
    "NumericError",
    "band_powers",
    "bce_loss",
    "cogn26_channels",
    "compute_metrics",
    "design_bandpass",
    "filtfilt",
    "param_audit",
    "ransac_bad_channels",
    "read_container",
    "run_cli",
    "spline_g",
    "spline_interpolate",
    "stratified_group_kfold",
    "synthetic_montage",
    "welch_psd",
]
