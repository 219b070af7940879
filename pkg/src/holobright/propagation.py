"""Free-space light transport by the band-limited angular spectrum method.

A kernel is the frequency-domain transfer function for one (wavelength,
distance) pair, sampled on the 2x zero-padded grid of the display. Applying
it is a linear convolution: pad, unitary FFT, multiply, inverse FFT, crop.
Padding by 2x per axis suppresses the circular wraparound of the FFT
convolution.

The transfer function is pure phase exp(i*2*pi*d*sqrt(1/lam^2 - fx^2 - fy^2))
inside the band limit and exactly zero outside, where the limit
f_lim = 1/(lam*sqrt((2*d*df)^2 + 1)) (per axis) removes frequencies whose
sampled kernel phase aliases, and evanescent frequencies (fx^2 + fy^2 >
1/lam^2) are dropped. At d = 0 the kernel is the identity on the band.

An optional circular pupil models the aperture of the relay optics that
images the modulator plane. It is what turns the double-phase checkerboard
carrier into amplitude: without a pupil a phase-only field has unit
intensity everywhere at d = 0. The pupil radius is given as a fraction of
the grid Nyquist frequency; the default used by the forward model is 0.5,
which cleanly separates the signal band from the carrier sidebands at the
spectrum corners.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

from .field import ComplexField

_FFT_WORKERS = 2


@dataclass(frozen=True)
class PropagationKernel:
    """Transfer function of one propagation step on the padded grid."""

    wavelength: float
    distance: float
    pitch: float
    shape: tuple[int, int]  # padded grid (2H, 2W)
    transfer_function: np.ndarray
    band_mask: np.ndarray

    @property
    def field_shape(self) -> tuple[int, int]:
        """The unpadded field shape this kernel applies to."""
        return (self.shape[0] // 2, self.shape[1] // 2)


def _frequency_grid(padded_shape, pitch):
    fy = _fft.fftfreq(padded_shape[0], d=pitch)
    fx = _fft.fftfreq(padded_shape[1], d=pitch)
    return np.meshgrid(fy, fx, indexing="ij")


def build_kernel(
    wavelength: float, distance: float, shape: tuple[int, int], pitch: float
) -> PropagationKernel:
    """Build the band-limited ASM kernel for a field of the given shape.

    shape is the unpadded field shape (H, W); the kernel lives on (2H, 2W).
    """
    if not wavelength > 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    if not pitch > 0:
        raise ValueError(f"pitch must be positive, got {pitch}")
    h, w = shape
    if h < 4 or w < 4:
        raise ValueError(f"field shape must be at least 4x4, got {h}x{w}")
    if h % 2 or w % 2:
        raise ValueError(f"field shape must be even, got {h}x{w}")

    padded = (2 * h, 2 * w)
    fyy, fxx = _frequency_grid(padded, pitch)
    f_sq = fxx * fxx + fyy * fyy
    arg = 1.0 / wavelength**2 - f_sq
    propagating = arg > 0.0

    # Matsushima-style band limit against kernel-phase aliasing, per axis.
    dfx = 1.0 / (padded[1] * pitch)
    dfy = 1.0 / (padded[0] * pitch)
    fx_lim = 1.0 / (wavelength * np.sqrt((2.0 * distance * dfx) ** 2 + 1.0))
    fy_lim = 1.0 / (wavelength * np.sqrt((2.0 * distance * dfy) ** 2 + 1.0))
    band = propagating & (np.abs(fxx) <= fx_lim) & (np.abs(fyy) <= fy_lim)

    phase = 2.0 * np.pi * distance * np.sqrt(np.where(propagating, arg, 0.0))
    transfer = np.where(band, np.exp(1j * phase), 0.0 + 0.0j)
    return PropagationKernel(
        wavelength=wavelength,
        distance=distance,
        pitch=pitch,
        shape=padded,
        transfer_function=transfer,
        band_mask=band,
    )


_kernel_cache: dict = {}
_pupil_cache: dict = {}
_cache_lock = threading.Lock()


def get_kernel(wavelength, distance, shape, pitch) -> PropagationKernel:
    """Cached build_kernel; the optimizer hits the same keys thousands of times."""
    key = (float(wavelength), float(distance), int(shape[0]), int(shape[1]), float(pitch))
    kernel = _kernel_cache.get(key)
    if kernel is None:
        kernel = build_kernel(wavelength, distance, shape, pitch)
        with _cache_lock:
            _kernel_cache.setdefault(key, kernel)
        kernel = _kernel_cache[key]
    return kernel


def pupil_mask(shape: tuple[int, int], pitch: float, fraction: float) -> np.ndarray:
    """Circular low-pass mask on the padded grid of a field of the given shape.

    fraction scales the cutoff radius relative to the grid Nyquist frequency
    1/(2*pitch). Frequencies strictly beyond the radius are blocked.
    """
    if not 0 < fraction <= 1.0:
        raise ValueError(f"pupil fraction must be in (0, 1], got {fraction}")
    key = (int(shape[0]), int(shape[1]), float(pitch), float(fraction))
    mask = _pupil_cache.get(key)
    if mask is None:
        padded = (2 * shape[0], 2 * shape[1])
        fyy, fxx = _frequency_grid(padded, pitch)
        radius = fraction / (2.0 * pitch)
        mask = (fxx * fxx + fyy * fyy) <= radius * radius
        with _cache_lock:
            _pupil_cache.setdefault(key, mask)
        mask = _pupil_cache[key]
    return mask


def clear_caches():
    with _cache_lock:
        _kernel_cache.clear()
        _pupil_cache.clear()


def _pad(u: np.ndarray) -> np.ndarray:
    h, w = u.shape[-2:]
    out = np.zeros(u.shape[:-2] + (2 * h, 2 * w), dtype=np.complex128)
    out[..., h // 2 : h // 2 + h, w // 2 : w // 2 + w] = u
    return out


def _crop(u: np.ndarray) -> np.ndarray:
    h2, w2 = u.shape[-2:]
    h, w = h2 // 2, w2 // 2
    return u[..., h // 2 : h // 2 + h, w // 2 : w // 2 + w]


def propagate_array(u: np.ndarray, transfer: np.ndarray) -> np.ndarray:
    """Apply a padded-grid transfer function to (..., H, W) field arrays."""
    padded = _pad(u)
    with _fft.set_workers(_FFT_WORKERS):
        spec = _fft.fft2(padded, axes=(-2, -1), norm="ortho")
        spec *= transfer
        out = _fft.ifft2(spec, axes=(-2, -1), norm="ortho")
    return _crop(out)


def propagate(
    field: ComplexField, kernel: PropagationKernel, pupil: np.ndarray | None = None
) -> ComplexField:
    """Propagate a field through a kernel (and optionally a pupil mask)."""
    if field.shape != kernel.field_shape:
        raise ValueError(
            f"field shape {field.shape} does not match kernel's field shape "
            f"{kernel.field_shape}"
        )
    transfer = kernel.transfer_function if pupil is None else kernel.transfer_function * pupil
    return ComplexField(propagate_array(field.data, transfer), field.pitch)


def adjoint_propagate(
    field: ComplexField, kernel: PropagationKernel, pupil: np.ndarray | None = None
) -> ComplexField:
    """Exact adjoint of propagate under the field inner product.

    Equals propagation with the conjugated transfer function (the pupil is
    real so it is self-adjoint).
    """
    if field.shape != kernel.field_shape:
        raise ValueError(
            f"field shape {field.shape} does not match kernel's field shape "
            f"{kernel.field_shape}"
        )
    transfer = np.conj(kernel.transfer_function)
    if pupil is not None:
        transfer = transfer * pupil
    return ComplexField(propagate_array(field.data, transfer), field.pitch)
