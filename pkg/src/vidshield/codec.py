"""Frames, videos, lossless container I/O, and a lossy intra-frame codec.

The codec is a JPEG-style pipeline (8x8 block DCT, quality-scaled scalar
quantization, inverse DCT) applied independently to every frame and
channel. It is not a real bitstream format: ``size_bits`` is a
deterministic proxy counting the bits needed for the quantized
coefficients, which is enough for monotone size comparisons and for
emulating the per-frame variable-quality behaviour of streaming codecs.

The container format is trivially lossless: a 32-byte little-endian
header (magic ``RVF1``, version, width, height, channels, frame count,
fps numerator/denominator, each 32-bit) followed by raw interleaved
8-bit pixel payload, frame by frame.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.fft import dctn, idctn

BLOCK = 8

MAGIC = b"RVF1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIIII")
HEADER_SIZE = _HEADER.size  # 32 bytes

# Standard 8x8 luminance quantization table, applied to all channels.
BASE_QUANT_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.int64)


class ContainerError(ValueError):
    """Malformed container file; ``offset`` is the failing byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class Frame:
    """One image: (height, width, 3) uint8 pixels, dims multiples of 8."""

    __slots__ = ("pixels",)

    def __init__(self, pixels):
        arr = np.asarray(pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"frame must be (H, W, 3), got shape {arr.shape}")
        if arr.shape[0] % BLOCK or arr.shape[1] % BLOCK:
            raise ValueError(f"frame dims must be multiples of {BLOCK}, got {arr.shape[:2]}")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("pixel values must lie in [0, 255]")
        self.pixels = arr.astype(np.uint8)

    @classmethod
    def from_array(cls, arr) -> "Frame":
        """Build a frame, edge-padding dims up to the next multiple of 8."""
        arr = np.asarray(arr)
        pad_h = (-arr.shape[0]) % BLOCK
        pad_w = (-arr.shape[1]) % BLOCK
        if pad_h or pad_w:
            arr = np.pad(arr, ((0, pad_h), (0, pad_w), (0, 0)), mode="edge")
        return cls(arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 3

    def __eq__(self, other):
        return isinstance(other, Frame) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"Frame({self.width}x{self.height})"


class Video:
    """An ordered, nonempty list of equally sized frames plus a frame rate."""

    def __init__(self, frames, fps: Fraction | int = Fraction(24)):
        frames = list(frames)
        if not frames:
            raise ValueError("a video needs at least one frame")
        shape = frames[0].pixels.shape
        for i, f in enumerate(frames):
            if f.pixels.shape != shape:
                raise ValueError(f"frame {i} shape {f.pixels.shape} != frame 0 shape {shape}")
        self.frames = frames
        self.fps = Fraction(fps)
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    def __len__(self) -> int:
        return len(self.frames)

    def __eq__(self, other):
        return (isinstance(other, Video) and self.fps == other.fps
                and len(self) == len(other)
                and all(a == b for a, b in zip(self.frames, other.frames)))

    def __repr__(self) -> str:
        return f"Video({len(self.frames)} frames, {self.width}x{self.height}, fps={self.fps})"


@dataclass
class CodecConfig:
    quality: int = 75          # 0..100; 100 = lossless passthrough
    rate_mode: str = "constant_q"  # constant_q | variable
    variable_seed: int = 0

    def __post_init__(self):
        if not 0 <= self.quality <= 100:
            raise ValueError(f"quality must be in [0, 100], got {self.quality}")
        if self.rate_mode not in ("constant_q", "variable"):
            raise ValueError(f"unknown rate_mode {self.rate_mode!r}")


def quant_table(q: int) -> np.ndarray:
    """Quality-scaled quantization table (IJG-style scaling, entries in [1, 255])."""
    if not 0 <= q <= 100:
        raise ValueError(f"quality must be in [0, 100], got {q}")
    q = max(q, 1)
    scale = 5000 // q if q < 50 else 200 - 2 * q
    table = (BASE_QUANT_TABLE * scale + 50) // 100
    return np.clip(table, 1, 255)


def _blockify(channel: np.ndarray) -> np.ndarray:
    h, w = channel.shape
    return channel.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).transpose(0, 2, 1, 3)


def _unblockify(blocks: np.ndarray, h: int, w: int) -> np.ndarray:
    return blocks.transpose(0, 2, 1, 3).reshape(h, w)


def _coeff_bits(coeffs: np.ndarray) -> int:
    """Size proxy: bit length + sign bit + 4 bits run-length overhead per nonzero."""
    c = np.abs(coeffs.astype(np.int64))
    nz = c > 0
    if not nz.any():
        return 0
    bit_len = np.frexp(c[nz].astype(np.float64))[1]
    return int(bit_len.sum() + 5 * nz.sum())


def compress_frame(frame: Frame, q: int) -> tuple[Frame, int]:
    """Lossy-compress one frame at quality q; also return the size proxy.

    q=100 passes pixels through untouched (the size proxy is still
    computed, against the all-ones table).
    """
    table = quant_table(q).astype(np.float64)
    size_bits = 0
    out = np.empty_like(frame.pixels)
    for ch in range(3):
        blocks = _blockify(frame.pixels[:, :, ch].astype(np.float64))
        coeffs = dctn(blocks, type=2, norm="ortho", axes=(2, 3))
        quantized = np.round(coeffs / table)
        size_bits += _coeff_bits(quantized)
        rec = idctn(quantized * table, type=2, norm="ortho", axes=(2, 3))
        rec = np.clip(np.round(rec), 0, 255).astype(np.uint8)
        out[:, :, ch] = _unblockify(rec, frame.height, frame.width)
    if q == 100:
        return Frame(frame.pixels.copy()), size_bits
    return Frame(out), size_bits


def compress_video(video: Video, cfg: CodecConfig) -> tuple[Video, float]:
    """Compress every frame; variable mode jitters quality by +/-10 per frame.

    Returns the compressed video and a bitrate proxy in bits/second
    (total proxy size over the video duration).
    """
    n = len(video)
    if cfg.rate_mode == "variable":
        rng = np.random.default_rng(cfg.variable_seed)
        qualities = np.clip(cfg.quality + rng.integers(-10, 11, size=n), 0, 100)
    else:
        qualities = np.full(n, cfg.quality)
    frames = []
    total_bits = 0
    for f, q in zip(video.frames, qualities):
        cf, bits = compress_frame(f, int(q))
        frames.append(cf)
        total_bits += bits
    duration = n / float(video.fps)
    return Video(frames, video.fps), total_bits / duration


def write_frames(video: Video, path) -> None:
    """Write a video losslessly in the RVF1 container format."""
    header = _HEADER.pack(MAGIC, VERSION, video.width, video.height, 3,
                          len(video), video.fps.numerator, video.fps.denominator)
    payload = b"".join(f.pixels.tobytes() for f in video.frames)
    Path(path).write_bytes(header + payload)


def read_frames(path) -> Video:
    """Read an RVF1 container; raises ContainerError with a byte offset."""
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE:
        raise ContainerError(f"truncated header: {len(data)} bytes, need {HEADER_SIZE}",
                             offset=0)
    magic, version, width, height, channels, n_frames, fps_num, fps_den = (
        _HEADER.unpack_from(data, 0))
    if magic != MAGIC:
        raise ContainerError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise ContainerError(f"unsupported version {version}", offset=4)
    if channels != 3:
        raise ContainerError(f"unsupported channel count {channels}", offset=16)
    if width == 0 or height == 0 or width % BLOCK or height % BLOCK:
        raise ContainerError(f"bad dimensions {width}x{height}", offset=8)
    if n_frames == 0:
        raise ContainerError("container advertises zero frames", offset=20)
    if fps_den == 0 or fps_num == 0:
        raise ContainerError(f"bad fps {fps_num}/{fps_den}", offset=24)

    frame_bytes = width * height * 3
    frames = []
    offset = HEADER_SIZE
    for i in range(n_frames):
        chunk = data[offset:offset + frame_bytes]
        if len(chunk) < frame_bytes:
            raise ContainerError(
                f"truncated payload: frame {i} of {n_frames} incomplete", offset=offset)
        px = np.frombuffer(chunk, dtype=np.uint8).reshape(height, width, 3)
        frames.append(Frame(px.copy()))
        offset += frame_bytes
    return Video(frames, Fraction(fps_num, fps_den))
