"""Double-phase checkerboard encoding, phase wrapping, and SLM quantization.

A complex amplitude A*e^{i*theta} with A <= 1 can be carried by a phase-only
modulator as two interlaced pure phases theta +/- arccos(A). Here the
optimizer owns the two maps directly (a mean phase and an offset phase) and
this module interlaces them on a checkerboard: pixels with odd index parity
(x + y odd) get mean + offset, even parity gets mean - offset.

Optimization variables stay unconstrained reals; wrapping into [-pi, pi) and
integer quantization happen only at export time so gradients never see the
wrap discontinuity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def checkerboard(shape: tuple[int, int]) -> np.ndarray:
    """Parity sign grid: +1 where (x + y) is odd, -1 where even."""
    yy, xx = np.indices(shape)
    return np.where((xx + yy) % 2 == 1, 1.0, -1.0)


def interlace(mean_phase: np.ndarray, offset_phase: np.ndarray) -> np.ndarray:
    """Interlaced phase map: mean + offset on odd-parity pixels, mean - offset on even."""
    mean_phase = np.asarray(mean_phase, dtype=np.float64)
    offset_phase = np.asarray(offset_phase, dtype=np.float64)
    if mean_phase.shape != offset_phase.shape:
        raise ValueError(
            f"shape mismatch: mean {mean_phase.shape} vs offset {offset_phase.shape}"
        )
    return mean_phase + checkerboard(mean_phase.shape[-2:]) * offset_phase


def interlace_adjoint(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Adjoint of interlace: scatter a residual back to (mean, offset) grads.

    interlace is linear, so the adjoint is exact: d_mean = grad,
    d_offset = parity * grad.
    """
    grad = np.asarray(grad, dtype=np.float64)
    chi = checkerboard(grad.shape[-2:])
    return grad.copy(), chi * grad


def wrap_phase(phase: np.ndarray) -> np.ndarray:
    """Wrap to [-pi, pi), congruent to the input mod 2*pi."""
    return np.mod(np.asarray(phase, dtype=np.float64) + np.pi, 2 * np.pi) - np.pi


def quantize_phase(phase: np.ndarray, bits: int = 8) -> np.ndarray:
    """Map [-pi, pi) linearly onto integer levels [0, 2^bits - 1], round half up.

    The input is wrapped first, so any real phase is accepted.
    """
    if not 1 <= bits <= 16:
        raise ValueError(f"bits must be in [1, 16], got {bits}")
    levels = (1 << bits) - 1
    x = (wrap_phase(phase) + np.pi) / (2 * np.pi) * levels
    q = np.floor(x + 0.5).astype(np.uint16)
    return np.minimum(q, levels)


def dequantize_phase(levels: np.ndarray, bits: int = 8) -> np.ndarray:
    """Inverse of quantize_phase up to the quantization step pi/(2^bits - 1)."""
    if not 1 <= bits <= 16:
        raise ValueError(f"bits must be in [1, 16], got {bits}")
    top = (1 << bits) - 1
    return np.asarray(levels, dtype=np.float64) / top * 2 * np.pi - np.pi


@dataclass
class PhaseVariables:
    """Per-subframe mean/offset phase maps of a multi-color hologram.

    mean, offset: arrays of shape (T, H, W), T in {1, 2, 3}.
    In the "no phase constraint" ablation the mean array holds the raw
    per-pixel phase and offset is identically zero.
    """

    mean: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.offset = np.asarray(self.offset, dtype=np.float64)
        if self.mean.shape != self.offset.shape:
            raise ValueError("mean and offset must share one shape")
        if self.mean.ndim != 3:
            raise ValueError("expected (T, H, W) phase stacks")
        if self.mean.shape[0] not in (1, 2, 3):
            raise ValueError(f"subframe count must be 1, 2, or 3, got {self.mean.shape[0]}")

    @property
    def subframes(self) -> int:
        return self.mean.shape[0]

    def interlaced(self) -> np.ndarray:
        """The T interlaced SLM phase maps."""
        return interlace(self.mean, self.offset)
