"""Deterministic latent-diffusion surrogate: encoder, U-Net, decoder.

A miniature stand-in for a latent diffusion model, built from seeded
frozen weights. It exposes the pieces the protection optimizer needs to
differentiate through: encoding to a latent, a noise-prediction network,
deterministic DDIM inversion and sampling over a beta schedule, and
decoding back to image space. ``features`` bundles the four tensor
sources (clean latent, per-step inversion latents, per-step sampling
latents, decoded image) that the feature-matching loss compares.

Images are NCHW tensors in [-1, 1]. Pixel arrays in [0, 255] convert via
``pixels_to_input`` / ``output_to_pixels``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, add, add_channel_bias, conv2d, mul, tanh, upsample

PIXEL_HALF_RANGE = 127.5


class ScheduleError(ValueError):
    """Invalid diffusion schedule."""


class DiffusionSchedule:
    """Cumulative signal-retention schedule abar[0..steps], abar[0] = 1.

    Entries must be strictly decreasing and stay in (0, 1]; violating
    arrays are rejected at construction.
    """

    def __init__(self, abar):
        abar = np.asarray(abar, dtype=np.float64)
        if abar.ndim != 1 or abar.size < 1:
            raise ScheduleError("abar must be a 1-D array with at least one entry")
        if abar[0] != 1.0:
            raise ScheduleError(f"abar[0] must be 1.0, got {abar[0]}")
        if np.any(np.diff(abar) >= 0):
            raise ScheduleError("abar must be strictly decreasing")
        if abar[-1] <= 0.0:
            raise ScheduleError("abar must stay positive")
        self.abar = abar
        self.steps = abar.size - 1

    @classmethod
    def linear_beta(cls, steps: int, beta_start: float = 1e-4,
                    beta_end: float = 0.02) -> "DiffusionSchedule":
        """Standard DDPM-style schedule: abar_t = prod(1 - beta_t)."""
        if steps < 0:
            raise ScheduleError(f"steps must be >= 0, got {steps}")
        if steps == 0:
            return cls(np.ones(1))
        betas = np.linspace(beta_start, beta_end, steps)
        abar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
        return cls(abar)

    def __repr__(self) -> str:
        return f"DiffusionSchedule(steps={self.steps})"


@dataclass
class FeatureSet:
    """The 2*steps + 2 tensors compared by the feature-matching loss.

    f_enc: clean latent from the encoder.
    f_fwd: inversion latents for t = 1..steps.
    f_smp: sampling latents for t = steps-1..0.
    f_dec: decoded image from the final sampling latent.
    """

    f_enc: Tensor
    f_fwd: list
    f_smp: list
    f_dec: Tensor

    @property
    def steps(self) -> int:
        return len(self.f_fwd)

    def tensors(self) -> list:
        return [self.f_enc, *self.f_fwd, *self.f_smp, self.f_dec]

    def same_structure(self, other: "FeatureSet") -> bool:
        return (
            len(self.f_fwd) == len(other.f_fwd)
            and len(self.f_smp) == len(other.f_smp)
            and self.f_enc.shape == other.f_enc.shape
            and self.f_dec.shape == other.f_dec.shape
        )


def pixels_to_input(pixels, requires_grad: bool = False) -> Tensor:
    """(H, W, 3) pixel array in [0, 255] -> (1, 3, H, W) tensor in [-1, 1]."""
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) pixel array, got shape {arr.shape}")
    x = arr / PIXEL_HALF_RANGE - 1.0
    return Tensor(x.transpose(2, 0, 1)[None], requires_grad=requires_grad)


def output_to_pixels(img: Tensor) -> np.ndarray:
    """(1, 3, H, W) tensor in [-1, 1] -> (H, W, 3) uint8 pixel array."""
    y = np.asarray(img.data if isinstance(img, Tensor) else img, dtype=np.float64)
    if y.ndim != 4 or y.shape[0] != 1 or y.shape[1] != 3:
        raise ValueError(f"expected a (1, 3, H, W) image tensor, got shape {y.shape}")
    px = np.round((y[0].transpose(1, 2, 0) + 1.0) * PIXEL_HALF_RANGE)
    return np.clip(px, 0, 255).astype(np.uint8)


def input_grad_to_pixel_grad(grad: np.ndarray) -> np.ndarray:
    """Chain a (1, 3, H, W) input gradient through the pixel affine map."""
    return grad[0].transpose(1, 2, 0) / PIXEL_HALF_RANGE


def _time_features(t: int, dim: int = 16) -> np.ndarray:
    half = dim // 2
    freqs = 1.0 / (100.0 ** (np.arange(half) / max(half - 1, 1)))
    return np.concatenate([np.sin(t * freqs), np.cos(t * freqs)])


class SurrogateLDM:
    """Frozen seeded encoder E, noise predictor U, and decoder D.

    Encoder: two stride-2 convs with tanh, image (1,3,H,W) -> latent
    (1, latent_channels, H/4, W/4). Decoder mirrors it with nearest
    upsampling; its final tanh bounds outputs to [-1, 1]. U is three
    convs with one additive skip and an additive time+condition channel
    embedding; its output is scaled down so the naive DDIM inversion
    below stays numerically reversible (see ``unet_output_scale``).

    All weights are drawn once from ``seed`` and never change; every
    method is a pure function of its inputs.
    """

    TIME_DIM = 16

    def __init__(self, seed: int = 0, image_size: tuple[int, int] = (64, 64),
                 latent_channels: int = 4, base_channels: int = 8,
                 unet_channels: int = 16, cond_dim: int = 8,
                 unet_output_scale: float = 1e-4):
        if image_size[0] % 4 or image_size[1] % 4:
            raise ValueError(f"image size must be a multiple of 4, got {image_size}")
        self.seed = seed
        self.image_size = tuple(image_size)
        self.latent_channels = latent_channels
        self.latent_downscale = 4
        self.cond_dim = cond_dim
        self.unet_output_scale = float(unet_output_scale)

        rng = np.random.default_rng(seed)

        def conv_w(co, ci, k=3):
            std = 1.0 / np.sqrt(ci * k * k)
            return Tensor(rng.normal(0.0, std, size=(co, ci, k, k)))

        def bias(c):
            return Tensor(rng.normal(0.0, 0.05, size=(c,)))

        cb, cl, cu = base_channels, latent_channels, unet_channels
        self.enc1_w, self.enc1_b = conv_w(cb, 3), bias(cb)
        self.enc2_w, self.enc2_b = conv_w(cl, cb), bias(cl)
        self.dec1_w, self.dec1_b = conv_w(cb, cl), bias(cb)
        self.dec2_w, self.dec2_b = conv_w(3, cb), bias(3)
        self.u1_w, self.u1_b = conv_w(cu, cl), bias(cu)
        self.u2_w, self.u2_b = conv_w(cu, cu), bias(cu)
        self.u3_w, self.u3_b = conv_w(cl, cu), bias(cl)
        self.time_proj = rng.normal(0.0, 1.0 / np.sqrt(self.TIME_DIM),
                                    size=(cu, self.TIME_DIM))
        self.cond_proj = rng.normal(0.0, 1.0 / np.sqrt(cond_dim), size=(cu, cond_dim))

    # -- conditioning ---------------------------------------------------

    def empty_cond(self) -> np.ndarray:
        """The empty-prompt condition: an all-zeros vector."""
        return np.zeros(self.cond_dim)

    def _cond_array(self, cond) -> np.ndarray:
        if cond is None:
            return self.empty_cond()
        cond = np.asarray(cond, dtype=np.float64)
        if cond.shape != (self.cond_dim,):
            raise ValueError(f"condition must have shape ({self.cond_dim},), got {cond.shape}")
        return cond

    # -- networks -------------------------------------------------------

    def encode(self, img: Tensor) -> Tensor:
        img = img if isinstance(img, Tensor) else Tensor(img)
        h, w = self.image_size
        if img.shape != (1, 3, h, w):
            raise ValueError(f"encode expects shape (1, 3, {h}, {w}), got {img.shape}")
        if np.abs(img.data).max() > 1.0 + 1e-9:
            raise ValueError("encode expects values in [-1, 1]")
        x = tanh(add_channel_bias(conv2d(img, self.enc1_w, stride=2, padding=1), self.enc1_b))
        return tanh(add_channel_bias(conv2d(x, self.enc2_w, stride=2, padding=1), self.enc2_b))

    def decode(self, z: Tensor) -> Tensor:
        z = z if isinstance(z, Tensor) else Tensor(z)
        if z.data.ndim != 4 or z.shape[1] != self.latent_channels:
            raise ValueError(f"decode expects a (1, {self.latent_channels}, h, w) latent, "
                             f"got {z.shape}")
        x = tanh(add_channel_bias(conv2d(upsample(z, 2), self.dec1_w, padding=1), self.dec1_b))
        return tanh(add_channel_bias(conv2d(upsample(x, 2), self.dec2_w, padding=1), self.dec2_b))

    def unet(self, z: Tensor, t: int, cond=None) -> Tensor:
        """Predict noise for latent z at integer timestep t."""
        cond = self._cond_array(cond)
        emb = self.time_proj @ _time_features(t, self.TIME_DIM) + self.cond_proj @ cond
        h1 = tanh(add_channel_bias(conv2d(z, self.u1_w, padding=1),
                                   Tensor(self.u1_b.data + emb)))
        h2 = tanh(add_channel_bias(conv2d(h1, self.u2_w, padding=1), self.u2_b))
        out = add_channel_bias(conv2d(add(h1, h2), self.u3_w, padding=1), self.u3_b)
        return mul(out, self.unet_output_scale)

    # -- DDIM -----------------------------------------------------------

    def ddim_invert(self, z0: Tensor, schedule: DiffusionSchedule, cond=None) -> list:
        """Map a clean latent to its noisy trajectory [z_1, ..., z_steps].

        Naive deterministic reversal of the sampling update: the noise
        prediction for the step to level t is evaluated at the current
        (cleaner) latent, with the same timestep argument t the sampling
        direction uses across that interval.
        """
        abar = schedule.abar
        out = []
        z = z0
        for t in range(1, schedule.steps + 1):
            eps = self.unet(z, t, cond)
            a = np.sqrt(abar[t] / abar[t - 1])
            b = np.sqrt(1.0 - abar[t]) - a * np.sqrt(1.0 - abar[t - 1])
            z = add(mul(z, a), mul(eps, b))
            out.append(z)
        return out

    def ddim_sample(self, z_t: Tensor, schedule: DiffusionSchedule, cond=None,
                    from_step: int | None = None) -> list:
        """Deterministically denoise from level ``from_step`` down to 0.

        Returns [z_{from_step-1}, ..., z_0]; ``from_step`` defaults to the
        full schedule length.
        """
        abar = schedule.abar
        start = schedule.steps if from_step is None else from_step
        if not 0 <= start <= schedule.steps:
            raise ValueError(f"from_step must be in [0, {schedule.steps}], got {start}")
        out = []
        z = z_t
        for t in range(start, 0, -1):
            eps = self.unet(z, t, cond)
            a = np.sqrt(abar[t - 1] / abar[t])
            b = np.sqrt(1.0 - abar[t - 1]) - a * np.sqrt(1.0 - abar[t])
            z = add(mul(z, a), mul(eps, b))
            out.append(z)
        return out

    # -- feature extraction ----------------------------------------------

    def features(self, img: Tensor, schedule: DiffusionSchedule, cond=None) -> FeatureSet:
        """Extract all four feature sources for an image, differentiably."""
        f_enc = self.encode(img)
        f_fwd = self.ddim_invert(f_enc, schedule, cond)
        z_top = f_fwd[-1] if f_fwd else f_enc
        f_smp = self.ddim_sample(z_top, schedule, cond)
        f_dec = self.decode(f_smp[-1] if f_smp else f_enc)
        return FeatureSet(f_enc=f_enc, f_fwd=f_fwd, f_smp=f_smp, f_dec=f_dec)
