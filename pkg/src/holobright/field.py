"""Complex optical fields on a regular pixel grid.

A field is a 2D array of complex amplitudes with a physical pixel pitch.
Everything downstream (propagation, image formation, gradients) is built on
the小 set of operations defined here: squared modulus, unitary 2D Fourier
transforms, energy, and the field inner product.

The FFTs use orthonormal ("ortho") normalization so that propagation through
a unit-modulus transfer function conserves energy exactly. That makes the
per-subframe brightness budget of the display literal in simulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft


@dataclass(frozen=True)
class ComplexField:
    """A 2D complex wavefront sampled on an even-sized grid.

    data: complex amplitudes, shape (height, width)
    pitch: physical pixel pitch in meters
    """

    data: np.ndarray
    pitch: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        object.__setattr__(self, "data", data)
        if data.ndim != 2:
            raise ValueError(f"field data must be 2D, got shape {data.shape}")
        h, w = data.shape
        if h < 2 or w < 2 or h % 2 or w % 2:
            raise ValueError(
                f"field dimensions must be even and >= 2, got {h}x{w}"
            )
        if not self.pitch > 0:
            raise ValueError(f"pitch must be positive, got {self.pitch}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


def from_phase(phase: np.ndarray, pitch: float) -> ComplexField:
    """Unit-amplitude field e^{i*phase} (a phase-only SLM surface)."""
    return ComplexField(np.exp(1j * np.asarray(phase, dtype=np.float64)), pitch)


def intensity(field: ComplexField) -> np.ndarray:
    """Per-pixel squared modulus |u|^2. Always >= 0."""
    d = field.data
    return (d.real * d.real + d.imag * d.imag)


def energy(field: ComplexField) -> float:
    """Total energy sum(|u|^2)."""
    return float(np.sum(np.abs(field.data) ** 2))


def inner(a: ComplexField, b: ComplexField) -> complex:
    """Field inner product <a, b> = sum(conj(a) * b)."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return complex(np.sum(np.conj(a.data) * b.data))


def fft2(field: ComplexField) -> ComplexField:
    """Unitary 2D FFT of the field."""
    return ComplexField(_fft.fft2(field.data, norm="ortho"), field.pitch)


def ifft2(field: ComplexField) -> ComplexField:
    """Unitary 2D inverse FFT; exact inverse (and adjoint) of fft2."""
    return ComplexField(_fft.ifft2(field.data, norm="ortho"), field.pitch)
