"""Objective quality metrics and the surrogate editing operation.

PSNR and SSIM are computed per frame between an edited-from-protected
video and the edited-from-clean reference, then averaged. A third score,
``embed_sim``, is the mean cosine similarity of frame embeddings and
stands in for a video-text similarity model: it only claims to measure
"how semantically close the two edits are" under the local embedder, and
should be read with that caveat.

``surrogate_edit`` mimics prompt-driven editing at desk scale: encode,
partially re-noise the latent with seeded Gaussian noise, denoise back
under a fixed nonzero condition vector (the malicious-prompt stand-in),
decode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codec import Frame, Video
from .embedder import ImageEmbedder, sim
from .surrogate import (DiffusionSchedule, SurrogateLDM, output_to_pixels,
                        pixels_to_input)
from .tensor import Tensor

PSNR_CAP_DB = 100.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * 255.0) ** 2
SSIM_C2 = (0.03 * 255.0) ** 2


def psnr(a: Frame, b: Frame) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical frames."""
    if a.pixels.shape != b.pixels.shape:
        raise ValueError(f"frame shapes differ: {a.pixels.shape} vs {b.pixels.shape}")
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    kern = np.outer(g, g)
    return kern / kern.sum()


def ssim(a: Frame, b: Frame) -> float:
    """Structural similarity with an 11x11 Gaussian window, channel-averaged.

    Windowed means/variances are Gaussian-weighted and only fully valid
    windows contribute (no padding), so frames must be at least 11x11.
    """
    if a.pixels.shape != b.pixels.shape:
        raise ValueError(f"frame shapes differ: {a.pixels.shape} vs {b.pixels.shape}")
    if a.height < SSIM_WINDOW or a.width < SSIM_WINDOW:
        raise ValueError(f"ssim needs frames of at least {SSIM_WINDOW}x{SSIM_WINDOW}, "
                         f"got {a.width}x{a.height}")
    kern = _gaussian_window()
    scores = []
    for ch in range(3):
        x = a.pixels[:, :, ch].astype(np.float64)
        y = b.pixels[:, :, ch].astype(np.float64)
        wx = np.lib.stride_tricks.sliding_window_view(x, (SSIM_WINDOW, SSIM_WINDOW))
        wy = np.lib.stride_tricks.sliding_window_view(y, (SSIM_WINDOW, SSIM_WINDOW))
        mu_x = np.einsum("hwij,ij->hw", wx, kern)
        mu_y = np.einsum("hwij,ij->hw", wy, kern)
        var_x = np.einsum("hwij,ij->hw", wx * wx, kern) - mu_x * mu_x
        var_y = np.einsum("hwij,ij->hw", wy * wy, kern) - mu_y * mu_y
        cov = np.einsum("hwij,ij->hw", wx * wy, kern) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2)
        den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
        scores.append(float(np.mean(num / den)))
    return float(np.mean(scores))


def default_edit_cond(model: SurrogateLDM) -> np.ndarray:
    """Fixed nonzero condition vector standing in for an editing prompt."""
    return np.ones(model.cond_dim) / np.sqrt(model.cond_dim)


def surrogate_edit(video: Video, model: SurrogateLDM, schedule: DiffusionSchedule,
                   strength_steps: int, cond=None, seed: int = 0) -> Video:
    """Edit every frame: encode, noise to ``strength_steps``, denoise, decode.

    ``strength_steps`` = 0 reduces to an encode/decode round trip. Noise
    draws come from one seeded generator consumed frame by frame, so a
    fixed seed gives a bit-identical edited video.
    """
    if not 0 <= strength_steps <= schedule.steps:
        raise ValueError(f"strength_steps must be in [0, {schedule.steps}], "
                         f"got {strength_steps}")
    if cond is None:
        cond = default_edit_cond(model)
    rng = np.random.default_rng(seed)
    abar = schedule.abar
    out = []
    for frame in video.frames:
        z0 = model.encode(pixels_to_input(frame.pixels))
        if strength_steps > 0:
            noise = rng.standard_normal(z0.shape)
            z_noisy = Tensor(np.sqrt(abar[strength_steps]) * z0.data
                             + np.sqrt(1.0 - abar[strength_steps]) * noise)
            traj = model.ddim_sample(z_noisy, schedule, cond, from_step=strength_steps)
            z_out = traj[-1]
        else:
            z_out = z0
        out.append(Frame(output_to_pixels(model.decode(z_out))))
    return Video(out, video.fps)


@dataclass
class MetricReport:
    psnr_per_frame: list
    ssim_per_frame: list
    mean_psnr: float
    mean_ssim: float
    embed_sim: float

    def to_text(self) -> str:
        lines = [
            f"frames={len(self.psnr_per_frame)}",
            f"mean_psnr_db={self.mean_psnr:.6f}",
            f"mean_ssim={self.mean_ssim:.6f}",
            f"embed_sim={self.embed_sim:.6f}",
        ]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        rows = ["frame,psnr_db,ssim"]
        for i, (p, s) in enumerate(zip(self.psnr_per_frame, self.ssim_per_frame)):
            rows.append(f"{i},{p:.6f},{s:.6f}")
        return "\n".join(rows) + "\n"


def evaluate(protected_edit: Video, clean_edit: Video,
             embedder: ImageEmbedder) -> MetricReport:
    """Score an edited-from-protected video against the clean-edit reference.

    PSNR values are capped at 100 dB so the per-frame lists and their
    means stay finite and mutually consistent.
    """
    if len(protected_edit) != len(clean_edit):
        raise ValueError(f"frame counts differ: {len(protected_edit)} vs {len(clean_edit)}")
    psnrs = []
    ssims = []
    sims = []
    for p, c in zip(protected_edit.frames, clean_edit.frames):
        psnrs.append(min(psnr(p, c), PSNR_CAP_DB))
        ssims.append(ssim(p, c))
        sims.append(sim(embedder.embed(p), embedder.embed(c)))
    return MetricReport(
        psnr_per_frame=psnrs,
        ssim_per_frame=ssims,
        mean_psnr=float(np.mean(psnrs)),
        mean_ssim=float(np.mean(ssims)),
        embed_sim=float(np.mean(sims)),
    )
