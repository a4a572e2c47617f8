"""Spectral fingerprints of image generators.

Arrays are float64 numpy arrays: images are (C, H, W) or (H, W), kernels (out, in, k, k).
"""

from ._specprint import (
    DataError,
    Error,
    attenuation,
    azimuthal_integral,
    best_accuracy,
    conv2,
    cosine,
    dft2,
    extract_fingerprint,
    feature_hp_ratio,
    fftshift,
    hp_ratio,
    identify,
    idft2,
    kernel_spectrum_similarity,
    load_image,
    load_tensor,
    magnitude_spectrum,
    parse_arch,
    power_law_image,
    random_power_law_tensor,
    roc,
    save_image,
    upsample,
)

__all__ = [
    "DataError",
    "Error",
    "attenuation",
    "azimuthal_integral",
    "best_accuracy",
    "conv2",
    "cosine",
    "dft2",
    "extract_fingerprint",
    "feature_hp_ratio",
    "fftshift",
    "hp_ratio",
    "identify",
    "idft2",
    "kernel_spectrum_similarity",
    "load_image",
    "load_tensor",
    "magnitude_spectrum",
    "parse_arch",
    "power_law_image",
    "random_power_law_tensor",
    "roc",
    "save_image",
    "upsample",
]
