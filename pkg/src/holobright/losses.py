"""Loss stack for hologram optimization.

Four terms drive the optimizer: an image term (squared reconstruction error
against the scaled target), a laser term (sum of per-primary subframe powers
matched to the scaled target peak), a variation term (smoothness and spread
of the two double-phase maps plus total variation of the reconstructions
over an image pyramid), and an optional scale bonus used by dynamic
brightness scaling.

All terms are per-pixel normalized so the weights and the image-loss
threshold epsilon transfer across display resolutions: the image term is a
mean over pixels (summed over channels and planes), the phase variation
terms average over difference pairs, and the map-spread (standard deviation)
terms are divided by the pixel count. Gradient companions return exact
analytic gradients used by the reverse-mode engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LossWeights:
    """Weights of the total loss and the dynamic-scale threshold."""

    w1: float = 3.0  # image
    w2: float = 0.05  # laser
    w3: float = 0.1  # variation
    w4: float = 0.1  # scale bonus (dynamic mode)
    epsilon_image: float = 0.01
    laser_floor: float = 0.0  # optional floor penalty, 0 disables

    def __post_init__(self):
        for name in ("w1", "w2", "w3", "w4", "epsilon_image"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


# ---------------------------------------------------------------------------
# image loss


def image_loss(reconstructions, targets, s: float) -> float:
    """Sum over planes and channels of per-pixel mean squared error vs s*target.

    reconstructions, targets: arrays of shape (planes, 3, H, W) (a single
    plane may be passed as (3, H, W)).
    """
    recons = np.asarray(reconstructions, dtype=np.float64)
    targs = np.asarray(targets, dtype=np.float64)
    if recons.shape != targs.shape:
        raise ValueError(f"shape mismatch: {recons.shape} vs {targs.shape}")
    if recons.ndim == 3:
        recons = recons[None]
        targs = targs[None]
    r = recons - s * targs
    return float(np.sum(np.mean(r * r, axis=(-2, -1))))


def image_loss_grad(reconstructions, targets, s: float):
    """(value, d/d reconstruction, d/d s)."""
    recons = np.asarray(reconstructions, dtype=np.float64)
    targs = np.asarray(targets, dtype=np.float64)
    squeeze = recons.ndim == 3
    if squeeze:
        recons = recons[None]
        targs = targs[None]
    npix = recons.shape[-2] * recons.shape[-1]
    r = recons - s * targs
    value = float(np.sum(np.mean(r * r, axis=(-2, -1))))
    g_recon = 2.0 * r / npix
    g_s = float(np.sum(g_recon * (-targs)))
    if squeeze:
        g_recon = g_recon[0]
    return value, g_recon, g_s


# ---------------------------------------------------------------------------
# laser loss


def laser_loss(lasers: np.ndarray, targets, s: float) -> float:
    """Per primary: (sum_t l^2 - max(I_p) * s)^2, summed over primaries."""
    value, _, _ = laser_loss_grad(lasers, targets, s)
    return value


def laser_loss_grad(lasers: np.ndarray, targets, s: float):
    """(value, d/d lasers, d/d s). targets: (planes, P, H, W) or (P, H, W)."""
    lasers = np.asarray(lasers, dtype=np.float64)
    targs = np.asarray(targets, dtype=np.float64)
    if targs.ndim == 3:
        targs = targs[None]
    peak = targs.max(axis=(0, 2, 3))  # per primary, over all planes
    sums = np.sum(lasers * lasers, axis=1)
    diff = sums - peak * s
    value = float(np.sum(diff * diff))
    g_lasers = 2.0 * diff[:, None] * 2.0 * lasers
    g_s = float(np.sum(2.0 * diff * (-peak)))
    return value, g_lasers, g_s


def laser_floor_penalty_grad(lasers: np.ndarray, floor: float):
    """Optional penalty sum max(0, floor - l)^2 keeping subframes powered.

    Disabled by default; stands in for unavailable schedule-balancing terms.
    """
    lasers = np.asarray(lasers, dtype=np.float64)
    short = np.maximum(0.0, floor - lasers)
    return float(np.sum(short * short)), -2.0 * short


# ---------------------------------------------------------------------------
# variation loss (double-phase maps)


def _tv_sq_grad(x: np.ndarray):
    """Mean over forward-difference pairs of squared differences, with gradient."""
    dy = np.diff(x, axis=0)
    dx = np.diff(x, axis=1)
    n = dy.size + dx.size
    value = (np.sum(dy * dy) + np.sum(dx * dx)) / n
    g = np.zeros_like(x)
    g[1:, :] += 2.0 * dy / n
    g[:-1, :] -= 2.0 * dy / n
    g[:, 1:] += 2.0 * dx / n
    g[:, :-1] -= 2.0 * dx / n
    return float(value), g


def _std_grad(x: np.ndarray):
    """Population standard deviation with gradient (zero at a constant map)."""
    m = x.mean()
    dev = x - m
    var = float(np.mean(dev * dev))
    std = np.sqrt(var)
    if std < 1e-30:
        return 0.0, np.zeros_like(x)
    return std, dev / (x.size * std)


def variation_loss(mean_phase: np.ndarray, offset_phase: np.ndarray) -> float:
    """Smoothness/spread penalty on the low and high double-phase maps.

    Per subframe and per branch (mean + offset, mean - offset): the mean
    squared forward difference along both axes plus the map standard
    deviation divided by the pixel count.
    """
    value, _, _ = variation_loss_grad(mean_phase, offset_phase)
    return value


def variation_loss_grad(mean_phase: np.ndarray, offset_phase: np.ndarray):
    """(value, d/d mean, d/d offset) for (T, H, W) phase stacks."""
    mean_phase = np.asarray(mean_phase, dtype=np.float64)
    offset_phase = np.asarray(offset_phase, dtype=np.float64)
    if mean_phase.shape != offset_phase.shape:
        raise ValueError("mean and offset must share one shape")
    if mean_phase.ndim == 2:
        mean_phase = mean_phase[None]
        offset_phase = offset_phase[None]
    npix = mean_phase.shape[-2] * mean_phase.shape[-1]
    total = 0.0
    g_mean = np.zeros_like(mean_phase)
    g_off = np.zeros_like(offset_phase)
    for t in range(mean_phase.shape[0]):
        for sign in (1.0, -1.0):
            branch = mean_phase[t] + sign * offset_phase[t]
            tv, g_tv = _tv_sq_grad(branch)
            sd, g_sd = _std_grad(branch)
            total += tv + sd / npix
            g = g_tv + g_sd / npix
            g_mean[t] += g
            g_off[t] += sign * g
    return float(total), g_mean, g_off


# ---------------------------------------------------------------------------
# pyramid variation loss (reconstructed images)


def _box_down2(x: np.ndarray) -> np.ndarray:
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def _box_up2_adjoint(g: np.ndarray) -> np.ndarray:
    out = np.empty((g.shape[0] * 2, g.shape[1] * 2), dtype=g.dtype)
    out[0::2, 0::2] = g
    out[1::2, 0::2] = g
    out[0::2, 1::2] = g
    out[1::2, 1::2] = g
    return 0.25 * out


def pyramid_variation_loss(images, levels: int = 3) -> float:
    """Total variation of reconstructions over a factor-2 box pyramid."""
    value, _ = pyramid_variation_loss_grad(images, levels)
    return value


def pyramid_variation_loss_grad(images, levels: int = 3):
    """(value, d/d images) for (..., H, W) intensity images."""
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    images = np.asarray(images, dtype=np.float64)
    flat = images.reshape((-1,) + images.shape[-2:])
    h, w = images.shape[-2:]
    if h < (1 << (levels - 1)) * 2 or w < (1 << (levels - 1)) * 2:
        raise ValueError(f"image {h}x{w} too small for a {levels}-level pyramid")
    total = 0.0
    grads = np.zeros_like(flat)
    for i, img in enumerate(flat):
        pyramid = [img]
        for _ in range(levels - 1):
            pyramid.append(_box_down2(pyramid[-1]))
        level_grads = []
        for x in pyramid:
            v, g = _tv_sq_grad(x)
            total += v
            level_grads.append(g)
        g = level_grads[-1]
        for k in range(levels - 2, -1, -1):
            g = level_grads[k] + _box_up2_adjoint(g)
        grads[i] = g
    return float(total), grads.reshape(images.shape)


# ---------------------------------------------------------------------------
# total


def total_loss(
    l_image: float,
    l_laser: float,
    l_variation: float,
    weights: LossWeights,
    s: float = 1.0,
    dynamic_scale_active: bool = False,
) -> float:
    """w1*L_image + w2*L_laser + w3*L_variation, minus w4*s when the dynamic
    branch applies (dynamic scaling on and L_image below epsilon)."""
    value = weights.w1 * l_image + weights.w2 * l_laser + weights.w3 * l_variation
    if dynamic_scale_active and l_image < weights.epsilon_image:
        value -= weights.w4 * s
    return float(value)
