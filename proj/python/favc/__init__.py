"""Frequency-calibrated virtual EEG channel generation from four frontal electrodes."""

from ._favc import (
    FavcError,
    Generator,
    bandpass,
    channel_names,
    evaluate,
    idw,
    nni,
    perturb,
    run,
    spherical_spline,
    standard_montage,
    synth_dataset,
    welch_psd,
    wilcoxon_signed_rank,
)

__all__ = [
    "FavcError",
    "Generator",
    "bandpass",
    "channel_names",
    "evaluate",
    "idw",
    "nni",
    "perturb",
    "run",
    "spherical_spline",
    "standard_montage",
    "synth_dataset",
    "welch_psd",
    "wilcoxon_signed_rank",
]

__version__ = "0.1.0"
