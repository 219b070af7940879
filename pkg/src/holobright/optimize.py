"""Adam-driven holography optimization loops.

optimize_multicolor co-optimizes T shared phase patterns, the 3xT laser
schedule (through a sigmoid so amplitudes stay in (0, 1)), and optionally
the brightness scale s. Dynamic scaling follows a conditional update: s
only takes part in the step (and collects its -w4*s bonus) on iterations
where the previous image loss was below the epsilon threshold, and never
decreases; otherwise its value and Adam moments stay frozen.

optimize_conventional runs three independent single-primary problems with
the same double-phase parameterization and full laser power, the
field-sequential baseline.

run_ablation repeats the multi-color optimization with exactly one
component removed at a time (double-phase constraint, variation loss,
laser loss) and reports image quality per variant.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .encoding import PhaseVariables
from .forward import DisplayConfig, LaserSchedule
from .gradients import HologramProblem, LossBreakdown, Variables
from .losses import LossWeights
from .metrics import MetricReport, compute_report

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("step", "L_total", "L_image", "L_laser", "L_variation", "s")


class Adam:
    """Plain Adam with bias correction; state advances only when stepped."""

    def __init__(self, shape, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def step(self, x, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class OptimizerConfig:
    """Optimization hyperparameters and ablation switches."""

    learning_rate: float = 0.015
    steps: int = 1000
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    subframes: int = 3
    scale_mode: str = "fixed"  # "fixed" | "dynamic"
    scale: float = 1.0
    s_init: float = 1.0
    s_max: float = 3.0
    seed: int = 0
    no_phase_constraint: bool = False
    no_tv_loss: bool = False
    no_laser_loss: bool = False
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.scale_mode not in ("fixed", "dynamic"):
            raise ValueError(f"unknown scale mode {self.scale_mode!r}")
        if self.subframes not in (1, 2, 3):
            raise ValueError("subframes must be 1, 2, or 3")
        if self.scale_mode == "dynamic" and self.s_max > self.subframes:
            raise ValueError(
                f"s_max={self.s_max} exceeds the theoretical limit T={self.subframes}"
            )

    @property
    def dynamic(self) -> bool:
        return self.scale_mode == "dynamic"

    def initial_scale(self) -> float:
        return self.s_init if self.dynamic else self.scale


@dataclass
class OptimizationResult:
    """Everything one optimization run produces."""

    phase_variables: PhaseVariables
    phases: np.ndarray  # (T, H, W) SLM phase maps (interlaced, or raw in ablation)
    lasers: LaserSchedule
    scale: float
    history: np.ndarray  # (steps, 6) columns HISTORY_COLUMNS
    reconstructions: np.ndarray  # (planes, 3, H, W)
    report: MetricReport
    final_loss: LossBreakdown
    wall_time: float


def _check_target(target_images: np.ndarray):
    if np.any(target_images < 0) or np.any(target_images > 1) or not np.all(
        np.isfinite(target_images)
    ):
        raise ValueError("target intensities must be finite and in [0, 1] before scaling")


def initial_variables(
    shape, cfg: OptimizerConfig, n_primaries: int = 3, seed_offset: int = 0
) -> Variables:
    """Random phase init, even laser energy split, s at its starting value."""
    rng = np.random.default_rng(cfg.seed + seed_offset)
    T = cfg.subframes
    mean = rng.uniform(-np.pi, np.pi, (T,) + tuple(shape))
    offset = rng.uniform(-0.1, 0.1, (T,) + tuple(shape))
    l0 = float(np.clip(1.0 / np.sqrt(T), 0.05, 0.95))
    raw = np.full((n_primaries, T), np.log(l0 / (1.0 - l0)))
    return Variables(mean=mean, offset=offset, laser_raw=raw, scale=cfg.initial_scale())


def _run_loop(problem: HologramProblem, variables: Variables, cfg: OptimizerConfig):
    """Shared Adam loop; returns (variables, history, final record)."""
    kw = dict(lr=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
    opt_mean = Adam(variables.mean.shape, **kw)
    opt_offset = Adam(variables.offset.shape, **kw)
    opt_raw = Adam(variables.laser_raw.shape, **kw)
    opt_scale = Adam((), **kw)

    history = np.empty((cfg.steps, len(HISTORY_COLUMNS)))
    prev_image_loss = np.inf
    record = None
    for step in range(cfg.steps):
        bonus = cfg.dynamic and prev_image_loss < cfg.weights.epsilon_image
        record = problem.forward(variables, bonus_active=bonus)
        loss = record.loss
        if not np.isfinite(loss.total):
            raise RuntimeError(
                f"non-finite loss at step {step}: image={loss.image} "
                f"laser={loss.laser} variation={loss.variation}"
            )
        history[step] = (step, loss.total, loss.image, loss.laser,
                         loss.variation, variables.scale)
        grads = problem.backward(record)
        variables.mean = opt_mean.step(variables.mean, grads.d_mean_phase)
        if problem.double_phase:
            variables.offset = opt_offset.step(variables.offset, grads.d_offset_phase)
        if problem.optimize_lasers and problem.fixed_lasers is None:
            variables.laser_raw = opt_raw.step(variables.laser_raw, grads.d_laser_raw)
        if bonus:
            # Eq-7 branch: s may only ratchet upward, capped at its limit.
            proposed = float(opt_scale.step(variables.scale, grads.d_scale))
            variables.scale = float(min(max(proposed, variables.scale), cfg.s_max))
        prev_image_loss = loss.image
    return variables, history, record


def _problem_options(cfg: OptimizerConfig) -> dict:
    return dict(
        double_phase=not cfg.no_phase_constraint,
        variation_enabled=not cfg.no_tv_loss,
        laser_loss_enabled=not cfg.no_laser_loss,
    )


def _multiplane_report(targets, reconstructions, scale) -> MetricReport:
    """Report over all planes; histograms/contrast come from the first plane."""
    from .metrics import psnr, ssim

    ref = np.asarray(targets) * scale
    first = compute_report(ref[0], reconstructions[0], scale=scale)
    if targets.shape[0] == 1:
        return first
    flat_ref = (ref / scale).reshape((-1,) + ref.shape[-2:])
    flat_test = (reconstructions / scale).reshape((-1,) + ref.shape[-2:])
    return MetricReport(
        psnr_db=psnr(flat_ref, flat_test, peak=1.0),
        ssim=ssim(flat_ref, flat_test, peak=1.0),
        michelson=first.michelson,
        histograms=first.histograms,
        hist_distance=first.hist_distance,
    )


def optimize_multicolor(
    target, display: DisplayConfig, cfg: OptimizerConfig
) -> OptimizationResult:
    """Co-optimize multi-color phases, laser schedule, and optionally scale.

    target: TargetScene or a (planes, 3, H, W) array of linear intensities.
    """
    images = np.asarray(getattr(target, "images", target), dtype=np.float64)
    if images.ndim == 3:
        images = images[None]
    _check_target(images)
    display = dataclasses.replace(display, subframes=cfg.subframes)
    problem = HologramProblem.from_display(
        images, display, cfg.weights, **_problem_options(cfg)
    )
    variables = initial_variables(display.shape, cfg)

    t0 = time.perf_counter()
    variables, history, record = _run_loop(problem, variables, cfg)
    wall = time.perf_counter() - t0

    lasers = LaserSchedule(problem.lasers_of(variables))
    phases = problem.interlaced(variables)
    recon = record.images  # (planes, 3, H, W)
    offset = variables.offset if problem.double_phase else np.zeros_like(variables.mean)
    return OptimizationResult(
        phase_variables=PhaseVariables(variables.mean, offset),
        phases=phases,
        lasers=lasers,
        scale=float(variables.scale),
        history=history,
        reconstructions=recon,
        report=_multiplane_report(images, recon, variables.scale),
        final_loss=record.loss,
        wall_time=wall,
    )


def optimize_conventional(
    target, display: DisplayConfig, cfg: OptimizerConfig
) -> OptimizationResult:
    """Field-sequential baseline: one independent optimization per primary.

    Each primary gets its own double-phase pattern at unit laser power and
    its phase is calibrated for its own wavelength (no anchor rescaling).
    """
    images = np.asarray(getattr(target, "images", target), dtype=np.float64)
    if images.ndim == 3:
        images = images[None]
    _check_target(images)
    per_primary_cfg = dataclasses.replace(cfg, subframes=1, no_laser_loss=True)
    display1 = dataclasses.replace(display, subframes=1)

    t0 = time.perf_counter()
    phases = []
    histories = []
    means = []
    offsets = []
    final = None
    for p in range(3):
        problem = HologramProblem.from_display(
            images[:, p : p + 1],
            display1,
            cfg.weights,
            primaries=(p,),
            kappas=np.array([1.0]),
            fixed_lasers=np.ones((1, 1)),
            optimize_lasers=False,
            laser_loss_enabled=False,
            double_phase=not cfg.no_phase_constraint,
            variation_enabled=not cfg.no_tv_loss,
        )
        variables = initial_variables(display.shape, per_primary_cfg, n_primaries=1,
                                      seed_offset=p)
        variables.scale = cfg.scale
        variables, history, record = _run_loop(problem, variables, per_primary_cfg)
        phases.append(problem.interlaced(variables)[0])
        means.append(variables.mean[0])
        offsets.append(variables.offset[0] if problem.double_phase
                       else np.zeros_like(variables.mean[0]))
        histories.append(history)
        final = record if final is None else final
    wall = time.perf_counter() - t0

    phases = np.stack(phases)
    from .forward import reconstruct_conventional

    recon = np.stack(
        [reconstruct_conventional(phases, display, plane=k)
         for k in range(len(display.distances))]
    )
    # merge the three independent histories: losses add, s is common
    merged = histories[0].copy()
    for h in histories[1:]:
        merged[:, 1:5] += h[:, 1:5]
    merged[:, 5] = cfg.scale
    total_loss_final = LossBreakdown(
        image=float(sum(h[-1, 2] for h in histories)),
        laser=0.0,
        variation=float(sum(h[-1, 4] for h in histories)),
        total=float(sum(h[-1, 1] for h in histories)),
    )
    return OptimizationResult(
        phase_variables=PhaseVariables(np.stack(means), np.stack(offsets)),
        phases=phases,
        lasers=LaserSchedule(np.eye(3)),
        scale=float(cfg.scale),
        history=merged,
        reconstructions=recon,
        report=_multiplane_report(images, recon, cfg.scale),
        final_loss=total_loss_final,
        wall_time=wall,
    )


ABLATION_VARIANTS = ("Phase Constrain", "TV Loss", "Laser Loss", "-")


def run_ablation(target, display: DisplayConfig, cfg: OptimizerConfig) -> dict:
    """Full model plus the three single-removal variants, with quality metrics.

    Returns {variant: {"psnr_db": float, "ssim": float}} in the order
    Phase Constrain, TV Loss, Laser Loss, "-" (the complete model).
    """
    out = {}
    for variant in ABLATION_VARIANTS:
        vcfg = dataclasses.replace(
            cfg,
            no_phase_constraint=variant == "Phase Constrain",
            no_tv_loss=variant == "TV Loss",
            no_laser_loss=variant == "Laser Loss",
        )
        result = optimize_multicolor(target, display, vcfg)
        out[variant] = {
            "psnr_db": result.report.psnr_db,
            "ssim": result.report.ssim,
        }
        log.info("ablation %-15s psnr=%.2f ssim=%.3f", variant,
                 result.report.psnr_db, result.report.ssim)
    return out
