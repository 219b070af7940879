"""Reverse-mode differentiation of the total loss.

The optimization pipeline is a fixed shallow DAG:

    (mean, offset) -> interlace -> phi_t -> kappa_p * phi_t -> e^{i psi}
        -> propagate (ASM x pupil) -> * l[p, t] -> |.|^2 -> sum_t -> losses

so instead of a general tape every stage carries its hand-derived adjoint:
the squared-modulus node back-propagates a real residual r as 2*r*u into the
complex field, linear stages (propagation, interlace, scaling) apply their
exact adjoints, and the complex exponential turns a complex field gradient g
into the real phase gradient kappa * Im(conj(u) * g). Real-valued targets
only (phases, raw laser parameters, scale); complex intermediates follow the
conjugate-residual convention throughout.

A forward pass records the intermediates the adjoints need; backward() then
returns exact gradients, verified against central finite differences by
check_gradients().
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import losses as L
from .encoding import checkerboard
from .forward import DisplayConfig, effective_transfer, phase_scale
from .propagation import propagate_array

log = logging.getLogger(__name__)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


@dataclass
class Variables:
    """Optimization state: phase maps, raw laser parameters, brightness scale."""

    mean: np.ndarray  # (T, H, W)
    offset: np.ndarray  # (T, H, W)
    laser_raw: np.ndarray  # (P, T), amplitudes are sigmoid(laser_raw)
    scale: float = 1.0

    def copy(self) -> "Variables":
        return Variables(self.mean.copy(), self.offset.copy(),
                         self.laser_raw.copy(), self.scale)


@dataclass
class GradientSet:
    """Gradients of the total loss, shapes mirroring Variables."""

    d_mean_phase: np.ndarray
    d_offset_phase: np.ndarray
    d_laser_raw: np.ndarray
    d_scale: float


@dataclass
class LossBreakdown:
    image: float
    laser: float
    variation: float
    total: float
    bonus_active: bool = False


@dataclass
class ForwardRecord:
    """Intermediates of one forward evaluation, consumed by backward()."""

    variables: Variables
    lasers: np.ndarray  # (P, T) amplitudes
    fields: np.ndarray = field(repr=False)  # u = e^{i kappa phi}, (P, T, H, W)
    propagated: np.ndarray = field(repr=False)  # v, (P, planes, T, H, W)
    images: np.ndarray = field(repr=False)  # (planes, P, H, W)
    image_grad: np.ndarray = field(repr=False)  # dL/dI accumulated, same shape
    laser_grad: np.ndarray = field(repr=False)  # dL/dl from laser terms
    var_grads: tuple = field(repr=False, default=None)  # (d_mean, d_offset) of eq-5 term
    loss: LossBreakdown = None
    d_scale_direct: float = 0.0


class HologramProblem:
    """One optimization instance: targets, kernels, weights, and options.

    Covers the multi-color scheme and, with fixed unit lasers and a single
    primary, each leg of the conventional baseline. The "no phase constraint"
    ablation drops the double-phase parameterization: the mean array is then
    the raw per-pixel phase and the offset is ignored.
    """

    def __init__(
        self,
        targets: np.ndarray,  # (planes, P, H, W) linear target intensities
        transfers: np.ndarray,  # (P, planes, 2H, 2W) composed transfer functions
        kappas: np.ndarray,  # (P,) phase scale per primary
        weights: L.LossWeights,
        subframes: int,
        double_phase: bool = True,
        optimize_lasers: bool = True,
        fixed_lasers: np.ndarray | None = None,
        laser_loss_enabled: bool = True,
        variation_enabled: bool = True,
        pyramid_levels: int = 3,
    ):
        self.targets = np.asarray(targets, dtype=np.float64)
        if self.targets.ndim != 4:
            raise ValueError("targets must have shape (planes, P, H, W)")
        self.n_planes, self.n_primaries = self.targets.shape[:2]
        self.shape = self.targets.shape[2:]
        self.transfers = transfers
        self.kappas = np.asarray(kappas, dtype=np.float64)
        self.weights = weights
        self.subframes = subframes
        self.double_phase = double_phase
        self.optimize_lasers = optimize_lasers
        self.fixed_lasers = None if fixed_lasers is None else np.asarray(fixed_lasers, float)
        self.laser_loss_enabled = laser_loss_enabled
        self.variation_enabled = variation_enabled
        self.pyramid_levels = pyramid_levels
        self.chi = checkerboard(self.shape)
        self._warned_variation = False

    @classmethod
    def from_display(
        cls,
        targets: np.ndarray,
        display: DisplayConfig,
        weights: L.LossWeights,
        primaries=(0, 1, 2),
        kappas: np.ndarray | None = None,
        **options,
    ) -> "HologramProblem":
        """Build a problem from a display configuration.

        targets: (planes, len(primaries), H, W) matching display.distances.
        kappas overrides the anchor-relative phase scaling (the conventional
        baseline calibrates each primary to its own wavelength, kappa = 1).
        """
        targets = np.asarray(targets, dtype=np.float64)
        if targets.ndim == 3:
            targets = targets[None]
        if targets.shape[0] != len(display.distances):
            raise ValueError(
                f"{targets.shape[0]} target planes but {len(display.distances)} distances"
            )
        transfers = np.stack(
            [
                np.stack([effective_transfer(display, p, k)
                          for k in range(len(display.distances))])
                for p in primaries
            ]
        )
        if kappas is None:
            kappas = np.array([phase_scale(p, display) for p in primaries])
        return cls(
            targets=targets,
            transfers=transfers,
            kappas=np.asarray(kappas, dtype=np.float64),
            weights=weights,
            subframes=display.subframes,
            **options,
        )

    # -- forward -----------------------------------------------------------

    def lasers_of(self, variables: Variables) -> np.ndarray:
        if self.fixed_lasers is not None:
            return self.fixed_lasers
        return sigmoid(variables.laser_raw)

    def interlaced(self, variables: Variables) -> np.ndarray:
        if self.double_phase:
            return variables.mean + self.chi * variables.offset
        return variables.mean

    def forward(self, variables: Variables, bonus_active: bool = False) -> ForwardRecord:
        w = self.weights
        lasers = self.lasers_of(variables)
        phi = self.interlaced(variables)  # (T, H, W)
        T = self.subframes
        P = self.n_primaries

        fields = np.exp(1j * self.kappas[:, None, None, None] * phi[None])  # (P,T,H,W)
        propagated = np.empty((P, self.n_planes, T) + self.shape, dtype=np.complex128)
        images = np.empty((self.n_planes, P) + self.shape)
        for p in range(P):
            for k in range(self.n_planes):
                v = propagate_array(fields[p], self.transfers[p, k])
                propagated[p, k] = v
                images[k, p] = np.sum(
                    (lasers[p] ** 2)[:, None, None] * (v.real**2 + v.imag**2), axis=0
                )

        l_image, g_images, g_s_image = L.image_loss_grad(images, self.targets, variables.scale)
        image_grad = w.w1 * g_images
        d_scale = w.w1 * g_s_image

        laser_grad = np.zeros_like(lasers)
        l_laser = 0.0
        if self.laser_loss_enabled:
            l_laser, g_lasers, g_s_laser = L.laser_loss_grad(
                lasers, self.targets, variables.scale
            )
            laser_grad += w.w2 * g_lasers
            d_scale += w.w2 * g_s_laser
            if w.laser_floor > 0.0:
                pen, g_pen = L.laser_floor_penalty_grad(lasers, w.laser_floor)
                l_laser += pen
                laser_grad += w.w2 * g_pen

        l_variation = 0.0
        var_grads = None
        if self.variation_enabled:
            if self.double_phase:
                v_phase, g_vm, g_vo = L.variation_loss_grad(variables.mean, variables.offset)
                l_variation += v_phase
                var_grads = (w.w3 * g_vm, w.w3 * g_vo)
            elif not self._warned_variation:
                log.info(
                    "phase-constraint ablation active: phase-domain variation "
                    "loss is undefined and contributes 0"
                )
                self._warned_variation = True
            v_pyr, g_pyr = L.pyramid_variation_loss_grad(images, self.pyramid_levels)
            l_variation += v_pyr
            image_grad += w.w3 * g_pyr

        total = w.w1 * l_image + w.w2 * l_laser + w.w3 * l_variation
        if bonus_active:
            total -= w.w4 * variables.scale
            d_scale -= w.w4

        return ForwardRecord(
            variables=variables,
            lasers=lasers,
            fields=fields,
            propagated=propagated,
            images=images,
            image_grad=image_grad,
            laser_grad=laser_grad,
            var_grads=var_grads,
            loss=LossBreakdown(
                image=l_image,
                laser=l_laser,
                variation=l_variation,
                total=total,
                bonus_active=bonus_active,
            ),
            d_scale_direct=d_scale,
        )

    def loss_value(self, variables: Variables, bonus_active: bool = False) -> float:
        return self.forward(variables, bonus_active).loss.total

    # -- backward ----------------------------------------------------------

    def backward(self, record: ForwardRecord) -> GradientSet:
        if record.fields.shape[2:] != self.shape or record.fields.shape[0] != self.n_primaries:
            raise ValueError("forward record does not match this problem")
        lasers = record.lasers
        T = self.subframes
        P = self.n_primaries

        d_phi = np.zeros((T,) + self.shape)
        d_lasers = record.laser_grad.copy()
        for p in range(P):
            g_u = np.zeros((T,) + self.shape, np.complex128)
            for k in range(self.n_planes):
                v = record.propagated[p, k]
                # |l*v|^2 node: residual r enters the complex field as 2*r*(l*v),
                # and the field-side factor l joins on the way to v.
                g_a = (2.0 * record.image_grad[k, p])[None] * (lasers[p][:, None, None] * v)
                d_lasers[p] += np.sum(
                    np.real(np.conj(g_a) * v), axis=(1, 2)
                )
                g_v = lasers[p][:, None, None] * g_a
                g_u += propagate_array(g_v, np.conj(self.transfers[p, k]))
            d_psi = np.imag(np.conj(record.fields[p]) * g_u)
            d_phi += self.kappas[p] * d_psi

        if self.double_phase:
            d_mean = d_phi.copy()
            d_offset = self.chi * d_phi
            if record.var_grads is not None:
                d_mean += record.var_grads[0]
                d_offset += record.var_grads[1]
        else:
            d_mean = d_phi
            d_offset = np.zeros_like(d_phi)

        if self.optimize_lasers and self.fixed_lasers is None:
            d_raw = d_lasers * lasers * (1.0 - lasers)
        else:
            d_raw = np.zeros_like(record.variables.laser_raw)

        return GradientSet(
            d_mean_phase=d_mean,
            d_offset_phase=d_offset,
            d_laser_raw=d_raw,
            d_scale=float(record.d_scale_direct),
        )


def check_gradients(
    problem: HologramProblem,
    variables: Variables,
    step: float = 1e-4,
    phase_samples: int = 64,
    rng: np.random.Generator | None = None,
    bonus_active: bool = False,
    rel_floor: float = 1e-8,
) -> float:
    """Max relative error of backward() vs central finite differences.

    Samples phase coordinates uniformly (phase_samples of them per stack) and
    sweeps every laser and the scale variable. Relative error uses
    |a - f| / max(|a|, |f|, rel_floor).
    """
    rng = rng or np.random.default_rng(0)
    grads = problem.backward(problem.forward(variables, bonus_active))

    def loss_at(v):
        return problem.loss_value(v, bonus_active)

    def rel_err(analytic, fd):
        return abs(analytic - fd) / max(abs(analytic), abs(fd), rel_floor)

    errors = []
    T, H, W = variables.mean.shape
    n_coords = T * H * W
    stacks = [("mean", variables.mean, grads.d_mean_phase)]
    if problem.double_phase:
        stacks.append(("offset", variables.offset, grads.d_offset_phase))
    for _, array, grad in stacks:
        flat_idx = rng.choice(n_coords, size=min(phase_samples, n_coords), replace=False)
        for idx in flat_idx:
            t, rest = divmod(int(idx), H * W)
            i, j = divmod(rest, W)
            orig = array[t, i, j]
            array[t, i, j] = orig + step
            hi = loss_at(variables)
            array[t, i, j] = orig - step
            lo = loss_at(variables)
            array[t, i, j] = orig
            errors.append(rel_err(grad[t, i, j], (hi - lo) / (2 * step)))

    if problem.optimize_lasers and problem.fixed_lasers is None:
        raw = variables.laser_raw
        for p in range(raw.shape[0]):
            for t in range(raw.shape[1]):
                orig = raw[p, t]
                raw[p, t] = orig + step
                hi = loss_at(variables)
                raw[p, t] = orig - step
                lo = loss_at(variables)
                raw[p, t] = orig
                errors.append(rel_err(grads.d_laser_raw[p, t], (hi - lo) / (2 * step)))

    orig = variables.scale
    variables.scale = orig + step
    hi = loss_at(variables)
    variables.scale = orig - step
    lo = loss_at(variables)
    variables.scale = orig
    errors.append(rel_err(grads.d_scale, (hi - lo) / (2 * step)))

    return float(max(errors))
