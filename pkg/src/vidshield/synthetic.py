"""Seeded synthetic videos and target-queue images.

Test inputs are generated, not shipped: videos are moving textured
shapes over a smooth gradient background, and target-queue images mix
smoothed noise with simple geometric patterns. Everything is a pure
function of its seed.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .codec import BLOCK, Frame, Video


def _smooth_noise(rng, height: int, width: int, cell: int = 8) -> np.ndarray:
    """Low-frequency noise texture in [0, 255]: small grid blown up."""
    small = rng.uniform(0, 255, size=((height + cell - 1) // cell,
                                      (width + cell - 1) // cell, 3))
    big = np.kron(small, np.ones((cell, cell, 1)))
    return big[:height, :width]


def _gradient_background(rng, height: int, width: int) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width]
    direction = rng.uniform(-1.0, 1.0, size=2)
    ramp = direction[0] * xx / max(width - 1, 1) + direction[1] * yy / max(height - 1, 1)
    ramp = (ramp - ramp.min()) / max(ramp.max() - ramp.min(), 1e-9)
    c0 = rng.uniform(0, 255, size=3)
    c1 = rng.uniform(0, 255, size=3)
    return c0 + ramp[:, :, None] * (c1 - c0)


def gen_video(seed: int, n_frames: int, width: int = 64, height: int = 64,
              fps: Fraction = Fraction(24)) -> Video:
    """Moving textured rectangles and a disc over a gradient background."""
    if n_frames < 1:
        raise ValueError(f"n_frames must be >= 1, got {n_frames}")
    if width % BLOCK or height % BLOCK:
        raise ValueError(f"dimensions must be multiples of {BLOCK}, got {width}x{height}")
    rng = np.random.default_rng(seed)
    background = _gradient_background(rng, height, width)

    shapes = []
    for kind in ("rect", "rect", "disc"):
        sw = int(rng.integers(width // 6, max(width // 3, width // 6 + 1)))
        sh = int(rng.integers(height // 6, max(height // 3, height // 6 + 1)))
        texture = _smooth_noise(rng, sh, sw, cell=4)
        pos = rng.uniform([0, 0], [width - sw, height - sh])
        vel = rng.uniform(-3.0, 3.0, size=2)
        shapes.append((kind, sw, sh, texture, pos, vel))

    frames = []
    for t in range(n_frames):
        canvas = background.copy()
        for kind, sw, sh, texture, pos, vel in shapes:
            x0 = int(round(pos[0] + vel[0] * t)) % max(width - sw, 1)
            y0 = int(round(pos[1] + vel[1] * t)) % max(height - sh, 1)
            patch = canvas[y0:y0 + sh, x0:x0 + sw]
            if kind == "disc":
                cy, cx = (sh - 1) / 2.0, (sw - 1) / 2.0
                yy, xx = np.mgrid[0:sh, 0:sw]
                mask = ((yy - cy) / max(cy, 1)) ** 2 + ((xx - cx) / max(cx, 1)) ** 2 <= 1.0
                patch[mask] = texture[mask]
            else:
                patch[:] = texture
        frames.append(Frame(np.clip(np.round(canvas), 0, 255).astype(np.uint8)))
    return Video(frames, fps)


def gen_target_queue(seed: int, count: int, width: int = 64,
                     height: int = 64) -> list:
    """Queue of candidate target frames: noise textures and geometric patterns."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    frames = []
    for i in range(count):
        kind = i % 4
        if kind == 0:
            img = _smooth_noise(rng, height, width, cell=8)
        elif kind == 1:
            cell = int(rng.integers(4, 17))
            yy, xx = np.mgrid[0:height, 0:width]
            check = ((yy // cell + xx // cell) % 2).astype(np.float64)
            c0 = rng.uniform(0, 255, size=3)
            c1 = rng.uniform(0, 255, size=3)
            img = c0 + check[:, :, None] * (c1 - c0)
        elif kind == 2:
            period = int(rng.integers(4, 17))
            yy, xx = np.mgrid[0:height, 0:width]
            axis = xx if rng.integers(2) else yy
            stripes = ((axis // period) % 2).astype(np.float64)
            c0 = rng.uniform(0, 255, size=3)
            c1 = rng.uniform(0, 255, size=3)
            img = c0 + stripes[:, :, None] * (c1 - c0)
        else:
            yy, xx = np.mgrid[0:height, 0:width]
            cy = rng.uniform(0, height)
            cx = rng.uniform(0, width)
            r = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
            rings = 0.5 + 0.5 * np.cos(r / rng.uniform(2.0, 8.0))
            c0 = rng.uniform(0, 255, size=3)
            c1 = rng.uniform(0, 255, size=3)
            img = c0 + rings[:, :, None] * (c1 - c0)
        frames.append(Frame(np.clip(np.round(img), 0, 255).astype(np.uint8)))
    return frames
