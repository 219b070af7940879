"""Procedural target scenes for tests, demos, and benchmarks.

Real photographs are not bundled with the package; these generators produce
deterministic photo-like linear-intensity RGB targets instead. They follow
natural-image statistics where it matters for holography: channels share a
common luminance structure (strong RGB correlation), most energy sits at low
spatial frequencies, and peak intensity stays below 1 so brightness scaling
has meaning.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as _fft
from scipy.special import expit


def _lowpass_noise(shape, band, rng):
    """Unit-amplitude noise band-limited to `band` (fraction of sampling rate)."""
    n = rng.standard_normal(shape)
    spec = _fft.fft2(n, axes=(-2, -1))
    fy = _fft.fftfreq(shape[-2])[:, None]
    fx = _fft.fftfreq(shape[-1])[None, :]
    spec *= (fx**2 + fy**2) < band**2
    out = np.real(_fft.ifft2(spec, axes=(-2, -1)))
    return out / max(np.abs(out).max(), 1e-12)


def _base_luminance(shape, rng, blob_radius, blob_count, blob_amp):
    yy, xx = np.mgrid[0 : shape[0], 0 : shape[1]] / shape[0]
    lum = 0.45 + 0.25 * np.sin(2 * np.pi * (0.7 * xx + 0.25 * yy)) * np.cos(
        2 * np.pi * 0.4 * yy
    )
    for _ in range(blob_count):
        cy, cx = rng.uniform(0.15, 0.85, 2)
        rad = rng.uniform(*blob_radius)
        amp = rng.uniform(-blob_amp, 1.2 * blob_amp)
        lum += amp * np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / rad**2))
    return np.clip(lum, 0.02, None), yy, xx


def _tinted(lum, yy, xx):
    tints = []
    for fx_, fy_, ph in ((0.5, 0.3, 0.0), (0.35, 0.5, 1.3), (0.6, 0.45, 2.1)):
        tints.append(0.75 + 0.25 * np.sin(2 * np.pi * (fx_ * xx + fy_ * yy) + ph))
    return np.stack([lum * t for t in tints])


def meadow(shape=(256, 256), peak=0.85, seed=5) -> np.ndarray:
    """Smooth colorful landscape: soft shapes, gentle texture. (3, H, W)."""
    rng = np.random.default_rng(seed)
    lum, yy, xx = _base_luminance(shape, rng, (0.14, 0.32), 6, 0.3)
    img = _tinted(lum, yy, xx)
    img *= 1.0 + 0.015 * _lowpass_noise((3,) + tuple(shape), 0.06, rng) * lum[None]
    img = np.clip(img, 0.0, None)
    return img * (peak / img.max())


def fruit(shape=(256, 256), peak=0.85, seed=11) -> np.ndarray:
    """Sharp colorful still life: hard edges, saturated patches, fine texture."""
    rng = np.random.default_rng(seed)
    lum, yy, xx = _base_luminance(shape, rng, (0.07, 0.2), 8, 0.35)
    img = _tinted(lum, yy, xx)
    # saturated elliptical patches with hard-ish edges, one color emphasis each
    for c in range(3):
        for _ in range(4):
            cy, cx = rng.uniform(0.2, 0.8, 2)
            ry, rx = rng.uniform(0.04, 0.12, 2)
            d = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2
            patch = expit(-18.0 * (d - 1.0))
            gain = rng.uniform(0.25, 0.55)
            img[c] += gain * patch
            img[(c + 1) % 3] += 0.25 * gain * patch
    img *= 1.0 + 0.05 * _lowpass_noise((3,) + tuple(shape), 0.15, rng)
    img = np.clip(img, 0.0, None)
    return img * (peak / img.max())


def sparse_dots(shape=(256, 256), peak=0.4, seed=23, count=12) -> np.ndarray:
    """Dark scene with a few dim soft dots; trivially renderable, low power."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0 : shape[0], 0 : shape[1]] / shape[0]
    img = np.zeros((3,) + tuple(shape))
    for _ in range(count):
        cy, cx = rng.uniform(0.1, 0.9, 2)
        rad = rng.uniform(0.02, 0.05)
        color = rng.uniform(0.3, 1.0, 3)
        blob = np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / rad**2))
        img += color[:, None, None] * blob
    img = np.clip(img, 0.0, None)
    return img * (peak / img.max())


def full_bright(shape=(256, 256), peak=0.95, seed=31) -> np.ndarray:
    """Busy bright scene pushing the power budget: high mean, strong detail."""
    rng = np.random.default_rng(seed)
    lum, yy, xx = _base_luminance(shape, rng, (0.06, 0.16), 10, 0.4)
    lum += 0.35
    img = _tinted(lum, yy, xx)
    img *= 1.0 + 0.08 * _lowpass_noise((3,) + tuple(shape), 0.18, rng)
    img = np.clip(img, 0.0, None)
    return img * (peak / img.max())


SCENES = {
    "meadow": meadow,
    "fruit": fruit,
    "sparse": sparse_dots,
    "bright": full_bright,
}


def make_scene(name: str, shape=(256, 256), **kwargs) -> np.ndarray:
    """Named deterministic scene as a (3, H, W) linear-intensity array."""
    if name not in SCENES:
        raise ValueError(f"unknown scene {name!r}; choose from {sorted(SCENES)}")
    return SCENES[name](shape=tuple(shape), **kwargs)
