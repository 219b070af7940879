"""Image-quality and color-reproduction measurements.

All metrics operate on linear-intensity images. For scaled targets the
caller normalizes by the brightness scale s first (or passes peak = s) so
numbers stay comparable across brightness levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

PSNR_CAP_DB = 100.0


def psnr(reference: np.ndarray, test: np.ndarray, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE), capped at 100 dB for (near-)identical images."""
    reference = np.asarray(reference, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if reference.shape != test.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {test.shape}")
    if not peak > 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = float(np.mean((reference - test) ** 2))
    if mse <= peak**2 * 10.0 ** (-PSNR_CAP_DB / 10.0):
        return PSNR_CAP_DB
    return 10.0 * np.log10(peak**2 / mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def _ssim_single(ref, test, peak, window):
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    mu_x = fftconvolve(ref, window, mode="valid")
    mu_y = fftconvolve(test, window, mode="valid")
    xx = fftconvolve(ref * ref, window, mode="valid") - mu_x * mu_x
    yy = fftconvolve(test * test, window, mode="valid") - mu_y * mu_y
    xy = fftconvolve(ref * test, window, mode="valid") - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def ssim(reference: np.ndarray, test: np.ndarray, peak: float = 1.0) -> float:
    """Structural similarity, 11x11 Gaussian window with sigma 1.5.

    Accepts single-channel (H, W) or multi-channel (C, H, W) images; channels
    are averaged. Stabilizers C1 = (0.01*peak)^2, C2 = (0.03*peak)^2.
    """
    reference = np.asarray(reference, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if reference.shape != test.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {test.shape}")
    window = _gaussian_window()
    if reference.ndim == 2:
        reference = reference[None]
        test = test[None]
    if reference.shape[-2] < 11 or reference.shape[-1] < 11:
        raise ValueError("image smaller than the 11x11 SSIM window")
    return float(
        np.mean([_ssim_single(r, t, peak, window) for r, t in zip(reference, test)])
    )


def michelson_contrast(
    image: np.ndarray, bright_region: np.ndarray, dark_region: np.ndarray
) -> float:
    """(I_max - I_min) / (I_max + I_min) using region means.

    Regions are boolean masks over the image pixels; multi-channel images are
    reduced to mean intensity across channels first.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3:
        image = image.mean(axis=0)
    bright_region = np.asarray(bright_region, dtype=bool)
    dark_region = np.asarray(dark_region, dtype=bool)
    if not bright_region.any() or not dark_region.any():
        raise ValueError("contrast regions must be non-empty")
    i_max = float(image[bright_region].mean())
    i_min = float(image[dark_region].mean())
    if i_max + i_min == 0.0:
        raise ValueError("contrast undefined: both regions have zero intensity")
    return (i_max - i_min) / (i_max + i_min)


def default_contrast_regions(reference: np.ndarray, quantile: float = 0.01):
    """Brightest / darkest `quantile` pixels of the reference, as masks."""
    reference = np.asarray(reference, dtype=np.float64)
    lum = reference.mean(axis=0) if reference.ndim == 3 else reference
    lo, hi = np.quantile(lum, [quantile, 1.0 - quantile])
    return lum >= hi, lum <= lo


def channel_histograms(
    image: np.ndarray, bins: int = 32, value_range: tuple[float, float] = (0.0, 1.0)
) -> np.ndarray:
    """Per-channel histogram counts over value_range, shape (3, bins).

    Values are clipped into the range first so each channel's counts sum to
    the pixel count.
    """
    image = np.asarray(image, dtype=np.float64)
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"expected (3, H, W) image, got shape {image.shape}")
    lo, hi = value_range
    out = np.empty((3, bins), dtype=np.int64)
    for c in range(3):
        clipped = np.clip(image[c], lo, hi)
        out[c], _ = np.histogram(clipped, bins=bins, range=(lo, hi))
    return out


def histogram_bin_edges(bins: int, value_range: tuple[float, float]):
    return np.linspace(value_range[0], value_range[1], bins + 1)


def histogram_intersection_distance(
    reference: np.ndarray,
    test: np.ndarray,
    bins: int = 32,
    value_range: tuple[float, float] = (0.0, 1.0),
) -> float:
    """1 - normalized histogram intersection, averaged over channels.

    0 means identical per-channel distributions, 1 means disjoint. Emitted by
    the compare command in place of a learned perceptual metric.
    """
    h_ref = channel_histograms(reference, bins, value_range).astype(np.float64)
    h_test = channel_histograms(test, bins, value_range).astype(np.float64)
    npix = h_ref[0].sum()
    inter = np.minimum(h_ref, h_test).sum(axis=1) / npix
    return float(1.0 - inter.mean())


@dataclass
class MetricReport:
    """Quality numbers for one reconstruction against its target."""

    psnr_db: float
    ssim: float
    michelson: float
    histograms: np.ndarray = field(repr=False)  # (3, bins) counts
    hist_distance: float = 0.0

    @property
    def identical(self) -> bool:
        return self.psnr_db >= PSNR_CAP_DB


def compute_report(
    reference: np.ndarray, test: np.ndarray, scale: float = 1.0, bins: int = 32
) -> MetricReport:
    """Standard report: metrics on intensities normalized by the scale s."""
    reference = np.asarray(reference, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    ref_n = reference / scale
    test_n = test / scale
    bright, dark = default_contrast_regions(ref_n)
    try:
        mich = michelson_contrast(test_n, bright, dark)
    except ValueError:
        mich = float("nan")
    return MetricReport(
        psnr_db=psnr(ref_n, test_n, peak=1.0),
        ssim=ssim(ref_n, test_n, peak=1.0),
        michelson=mich,
        histograms=channel_histograms(test, bins, (0.0, max(scale, 1e-12))),
        hist_distance=histogram_intersection_distance(
            ref_n, test_n, bins, (0.0, 1.0)
        ),
    )
