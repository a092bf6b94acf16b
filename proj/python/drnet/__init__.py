"""Python bindings for the drnet restoration library."""

from ._drnet import (
    TASKS,
    Config,
    FusedModel,
    Model,
    bench,
    count_params,
    degrade,
    estimate_macs,
    haar_decompose,
    haar_reconstruct,
    psnr,
    ssim,
    synth_clean,
)

__all__ = [
    "TASKS",
    "Config",
    "FusedModel",
    "Model",
    "bench",
    "count_params",
    "degrade",
    "estimate_macs",
    "haar_decompose",
    "haar_reconstruct",
    "psnr",
    "ssim",
    "synth_clean",
]
