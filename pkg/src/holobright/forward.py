"""Simulated image formation for conventional and multi-color holograms.

Conventional driving displays one single-color hologram per primary: channel
p is |propagate(e^{i*phi_p}, h_p)|^2 with full laser power. The multi-color
scheme displays T subframes, each a phase pattern lit by all three primaries
at once at scheduled amplitudes l[p, t]; channel p of the image is the sum
over subframes of |l[p, t] * propagate(e^{i*kappa_p*phi_t}, h_p)|^2, where
kappa_p = lambda_p / lambda_anchor rescales the phase programmed for the
anchor wavelength.

The propagation kernel is composed with the relay pupil from the display
configuration; see propagation.pupil_mask for why the pupil exists.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass

from .propagation import get_kernel, propagate_array, pupil_mask

DEFAULT_WAVELENGTHS = (639e-9, 515e-9, 473e-9)


@dataclass(frozen=True)
class DisplayConfig:
    """Geometry and illumination of the simulated display.

    shape is (height, width). distances lists the image plane(s) in meters
    measured from the modulator (0 = at the modulator plane, through the
    relay pupil). aperture_fraction sets the relay pupil radius as a
    fraction of the grid Nyquist frequency; None disables the pupil.
    """

    wavelengths: tuple = DEFAULT_WAVELENGTHS
    anchor_index: int = 1
    pitch: float = 8e-6
    shape: tuple = (1080, 1920)
    distances: tuple = (0.0,)
    subframes: int = 3
    aperture_fraction: float | None = 0.5
    phase_scale_inverse: bool = False

    def __post_init__(self):
        object.__setattr__(self, "wavelengths", tuple(float(w) for w in self.wavelengths))
        object.__setattr__(self, "shape", tuple(int(v) for v in self.shape))
        object.__setattr__(self, "distances", tuple(float(d) for d in self.distances))
        if len(self.wavelengths) != 3 or any(w <= 0 for w in self.wavelengths):
            raise ValueError("need three positive wavelengths")
        if self.anchor_index not in (0, 1, 2):
            raise ValueError(f"anchor index must be 0, 1, or 2, got {self.anchor_index}")
        if self.subframes not in (1, 2, 3):
            raise ValueError(f"subframes must be 1, 2, or 3, got {self.subframes}")
        if not self.distances:
            raise ValueError("at least one plane distance is required")
        h, w = self.shape
        if h < 4 or w < 4 or h % 2 or w % 2:
            raise ValueError(f"display shape must be even and >= 4x4, got {h}x{w}")
        if not self.pitch > 0:
            raise ValueError("pitch must be positive")
        if self.aperture_fraction is not None and not 0 < self.aperture_fraction <= 1:
            raise ValueError("aperture fraction must be in (0, 1] or None")

    @property
    def anchor_wavelength(self) -> float:
        return self.wavelengths[self.anchor_index]


@dataclass(frozen=True)
class LaserSchedule:
    """Normalized laser amplitudes, one row per primary, one column per subframe."""

    amplitudes: np.ndarray  # (3, T) in [0, 1]

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=np.float64)
        object.__setattr__(self, "amplitudes", amp)
        if amp.ndim != 2 or amp.shape[0] != 3:
            raise ValueError(f"expected (3, T) amplitudes, got shape {amp.shape}")
        if np.any(amp < 0) or np.any(amp > 1) or not np.all(np.isfinite(amp)):
            raise ValueError("laser amplitudes must lie in [0, 1]")

    @property
    def subframes(self) -> int:
        return self.amplitudes.shape[1]


def phase_scale(p: int, config: DisplayConfig) -> float:
    """Phase multiplier kappa_p for primary p relative to the anchor."""
    ratio = config.wavelengths[p] / config.anchor_wavelength
    return 1.0 / ratio if config.phase_scale_inverse else ratio


def effective_transfer(config: DisplayConfig, p: int, plane: int = 0) -> np.ndarray:
    """Propagation transfer function for primary p at a plane, pupil included."""
    kernel = get_kernel(
        config.wavelengths[p], config.distances[plane], config.shape, config.pitch
    )
    transfer = kernel.transfer_function
    if config.aperture_fraction is not None:
        transfer = transfer * pupil_mask(config.shape, config.pitch, config.aperture_fraction)
    return transfer


def _as_phase_stack(phases, subframes):
    phases = np.asarray(phases, dtype=np.float64)
    if phases.ndim == 2:
        phases = phases[None]
    if phases.ndim != 3 or phases.shape[0] != subframes:
        raise ValueError(
            f"expected {subframes} phase maps, got array of shape {phases.shape}"
        )
    return phases


def reconstruct_multicolor(phases, lasers, config: DisplayConfig, plane: int = 0):
    """Multi-color image at one plane: per primary, subframe intensities summed.

    phases: (T, H, W) interlaced phase maps; lasers: LaserSchedule or (3, T)
    array. Returns a (3, H, W) linear-intensity image.
    """
    amp = lasers.amplitudes if isinstance(lasers, LaserSchedule) else np.asarray(lasers, float)
    phases = _as_phase_stack(phases, amp.shape[1])
    if phases.shape[-2:] != tuple(config.shape):
        raise ValueError(f"phase shape {phases.shape[-2:]} != display {config.shape}")
    out = np.empty((3,) + tuple(config.shape))
    for p in range(3):
        kappa = phase_scale(p, config)
        fields = propagate_array(np.exp(1j * kappa * phases), effective_transfer(config, p, plane))
        out[p] = np.sum((amp[p] ** 2)[:, None, None] * np.abs(fields) ** 2, axis=0)
    return out


def reconstruct_conventional(phases, config: DisplayConfig, plane: int = 0):
    """Field-sequential image: one independent phase map per primary, full power."""
    phases = _as_phase_stack(phases, 3)
    if phases.shape[-2:] != tuple(config.shape):
        raise ValueError(f"phase shape {phases.shape[-2:]} != display {config.shape}")
    out = np.empty((3,) + tuple(config.shape))
    for p in range(3):
        field = propagate_array(np.exp(1j * phases[p]), effective_transfer(config, p, plane))
        out[p] = np.abs(field) ** 2
    return out


def reconstruct_multiplane(phases, lasers, config: DisplayConfig):
    """Multi-color reconstruction at every configured plane, stacked."""
    if not config.distances:
        raise ValueError("no plane distances configured")
    return np.stack(
        [reconstruct_multicolor(phases, lasers, config, plane=k)
         for k in range(len(config.distances))]
    )
