"""Per-frame perturbation optimization with quantized l-infinity projection.

The optimizer runs signed-gradient descent on a feature-matching loss,
keeping a real-valued perturbation accumulator that is re-projected every
step: converted to pixel units, rounded to the configured quantization
grid (ties to even), clipped to the l-infinity budget, and clipped again
so the perturbed frame stays a valid image. Working on the quantization
grid during optimization, rather than rounding once at save time, is what
makes the perturbation survive lossy re-encoding.

Optimization of one frame stops early once the similarity between its
perturbed latent and the latents of previously protected frames stops
decreasing; baseline photoguard-style modes always spend the full step
budget and match features only at the decoder (diffusion variant) or
encoder (encoder variant).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codec import Frame, Video
from .embedder import sim
from .surrogate import (DiffusionSchedule, FeatureSet, SurrogateLDM,
                        input_grad_to_pixel_grad, pixels_to_input)
from .targets import TargetQueue, select
from .tensor import Tensor, add, backward, l1_sum

MODES = ("prime", "photoguard_diffusion", "photoguard_encoder")


class OptimizationDivergedError(RuntimeError):
    """Loss became non-finite; ``step`` is the failing iteration."""

    def __init__(self, step: int):
        super().__init__(f"non-finite loss at optimization step {step}")
        self.step = step
        self.partial_results: list = []


@dataclass
class ProtectionConfig:
    """All knobs of the per-frame protection loop."""

    epsilon: int = 8            # l-infinity budget, pixel units
    steps: int = 100            # max optimization steps per frame (K)
    diffusion_steps: int = 2    # DDIM steps each direction (T)
    quant_step: int = 2         # perturbation quantization granularity
    step_size: float = 1.0      # signed-gradient step, pixel units
    patience: int = 5           # non-improving steps before early stop
    stop_tolerance: float = 1e-4
    mode: str = "prime"

    def __post_init__(self):
        if not 0 <= self.epsilon <= 255:
            raise ValueError(f"epsilon must be in [0, 255], got {self.epsilon}")
        if not 1 <= self.quant_step <= 255:
            raise ValueError(f"quant_step must be in [1, 255], got {self.quant_step}")
        if self.epsilon % self.quant_step:
            raise ValueError(f"epsilon {self.epsilon} must be a multiple of "
                             f"quant_step {self.quant_step}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.diffusion_steps < 0:
            raise ValueError(f"diffusion_steps must be >= 0, got {self.diffusion_steps}")
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.stop_tolerance < 0:
            raise ValueError(f"stop_tolerance must be >= 0, got {self.stop_tolerance}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    def schedule(self) -> DiffusionSchedule:
        return DiffusionSchedule.linear_beta(self.diffusion_steps)


@dataclass
class Perturbation:
    delta: np.ndarray           # integer pixel-space offsets
    quantized: bool = True


@dataclass
class FrameResult:
    protected_frame: Frame
    steps_used: int
    final_loss: float
    stop_reason: str            # converged | budget_exhausted
    target_index: int
    c_trace: list = field(default_factory=list)


def project(frame: Frame, raw_delta: np.ndarray, cfg: ProtectionConfig) -> Perturbation:
    """Project a raw pixel-unit perturbation onto the feasible set.

    Feasible deltas are integer multiples of ``quant_step`` within the
    l-infinity budget that keep every perturbed pixel inside [0, 255];
    the final range clip snaps toward zero so the grid constraint is
    never violated.
    """
    px = frame.pixels.astype(np.int64)
    raw = np.asarray(raw_delta, dtype=np.float64)
    if raw.shape != px.shape:
        raise ValueError(f"delta shape {raw.shape} != frame shape {px.shape}")
    q = cfg.quant_step
    d = np.round(raw / q) * q
    d = np.clip(d, -cfg.epsilon, cfg.epsilon)
    lo = -(px // q) * q
    hi = ((255 - px) // q) * q
    d = np.clip(d, lo, hi)
    return Perturbation(delta=d.astype(np.int64), quantized=True)


def prime_loss(f: FeatureSet, f_hat: FeatureSet) -> Tensor:
    """Sum of L1 distances over all 2T+2 feature tensors."""
    if not f.same_structure(f_hat):
        raise ValueError("feature sets differ in structure")
    total = add(l1_sum(f.f_enc, f_hat.f_enc), l1_sum(f.f_dec, f_hat.f_dec))
    for a, b in zip(f.f_fwd, f_hat.f_fwd):
        total = add(total, l1_sum(a, b))
    for a, b in zip(f.f_smp, f_hat.f_smp):
        total = add(total, l1_sum(a, b))
    return total


def baseline_loss(f: FeatureSet, f_hat: FeatureSet, mode: str) -> Tensor:
    """Photoguard-style loss: decoder output only, or encoder latent only."""
    if not f.same_structure(f_hat):
        raise ValueError("feature sets differ in structure")
    if mode == "photoguard_diffusion":
        return l1_sum(f.f_dec, f_hat.f_dec)
    if mode == "photoguard_encoder":
        return l1_sum(f.f_enc, f_hat.f_enc)
    raise ValueError(f"baseline_loss got non-baseline mode {mode!r}")


def _loss_for_mode(f: FeatureSet, f_hat: FeatureSet, mode: str) -> Tensor:
    return prime_loss(f, f_hat) if mode == "prime" else baseline_loss(f, f_hat, mode)


def _step_loss(model: SurrogateLDM, x: Tensor, schedule: DiffusionSchedule,
               f_hat: FeatureSet, mode: str) -> Tensor:
    # encoder-only mode never reads the diffusion features, so skip
    # building that part of the graph; the loss value is identical
    if mode == "photoguard_encoder":
        return l1_sum(model.encode(x), f_hat.f_enc)
    return _loss_for_mode(model.features(x, schedule), f_hat, mode)


def early_stop_metric(candidate: Frame, protected_so_far: list,
                      model: SurrogateLDM, clean_frame: Frame | None = None) -> float:
    """Max latent cosine between a candidate frame and prior protected frames.

    With no prior frames the candidate is compared against its own clean
    frame instead, so the value still measures how far the latent has
    moved; ``clean_frame`` is required in that case.
    """
    z_cand = model.encode(pixels_to_input(candidate.pixels)).data
    if protected_so_far:
        refs = [model.encode(pixels_to_input(p.pixels)).data for p in protected_so_far]
    elif clean_frame is not None:
        refs = [model.encode(pixels_to_input(clean_frame.pixels)).data]
    else:
        raise ValueError("empty history needs clean_frame for the self-reference fallback")
    return max(sim(z_cand, r) for r in refs)


def protect_frame(frame: Frame, target: Frame, history: list,
                  model: SurrogateLDM, cfg: ProtectionConfig,
                  target_index: int = -1) -> FrameResult:
    """Optimize one frame's perturbation toward the target's features.

    Each step evaluates the loss at the projected perturbed frame, takes
    one signed-gradient descent step on the raw accumulator, re-projects,
    and records the early-stop similarity of the updated candidate. In
    prime mode the loop stops once that similarity has failed to drop by
    at least ``stop_tolerance`` for ``patience`` consecutive steps.
    """
    schedule = cfg.schedule()
    px = frame.pixels.astype(np.int64)

    f_hat = model.features(pixels_to_input(target.pixels), schedule)

    # Reference latents for the early-stop metric are fixed for the whole
    # loop, so encode them once.
    if history:
        ref_latents = [model.encode(pixels_to_input(p.pixels)).data for p in history]
    else:
        ref_latents = [model.encode(pixels_to_input(frame.pixels)).data]

    raw = np.zeros(px.shape, dtype=np.float64)
    delta = project(frame, raw, cfg).delta
    best_c = np.inf
    streak = 0
    c_trace: list[float] = []
    final_loss = np.nan
    stop_reason = "budget_exhausted"
    candidate = px + delta
    steps_used = 0

    for k in range(1, cfg.steps + 1):
        x = pixels_to_input(px + delta, requires_grad=True)
        loss = _step_loss(model, x, schedule, f_hat, cfg.mode)
        final_loss = loss.item()
        if not np.isfinite(final_loss):
            raise OptimizationDivergedError(k)
        backward(loss)
        g = input_grad_to_pixel_grad(x.grad)

        raw = np.clip(raw - cfg.step_size * np.sign(g), -cfg.epsilon, cfg.epsilon)
        delta = project(frame, raw, cfg).delta
        candidate = px + delta

        z_cand = model.encode(pixels_to_input(candidate)).data
        c_k = max(sim(z_cand, r) for r in ref_latents)
        c_trace.append(c_k)
        steps_used = k

        if cfg.mode == "prime":
            if c_k <= best_c - cfg.stop_tolerance:
                best_c = c_k
                streak = 0
            else:
                streak += 1
            if streak >= cfg.patience:
                stop_reason = "converged"
                break

    return FrameResult(
        protected_frame=Frame(candidate.astype(np.uint8)),
        steps_used=steps_used,
        final_loss=final_loss,
        stop_reason=stop_reason,
        target_index=target_index,
        c_trace=c_trace,
    )


def protect_video(video: Video, queue: TargetQueue, model: SurrogateLDM,
                  cfg: ProtectionConfig) -> list:
    """Protect every frame in order, chaining target choices and history.

    On a per-frame failure the raised error carries the results of the
    frames that already completed in ``partial_results``.
    """
    results: list[FrameResult] = []
    history: list[Frame] = []
    prev_choice = None
    for frame in video.frames:
        choice = select(frame, prev_choice, queue)
        try:
            res = protect_frame(frame, queue.images[choice.index], history,
                                model, cfg, target_index=choice.index)
        except OptimizationDivergedError as err:
            err.partial_results = results
            raise
        results.append(res)
        history.append(res.protected_frame)
        prev_choice = choice
    return results
