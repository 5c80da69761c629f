"""Per-frame adversarial protection of videos against latent-diffusion editing.

The package bundles a numpy autodiff core, a deterministic diffusion
surrogate, target-image search, the quantized projected-gradient
protection loop, a simplified lossy codec, and quality metrics, so the
whole protect/compress/edit/evaluate pipeline runs reproducibly at desk
scale.
"""

from .codec import (CodecConfig, ContainerError, Frame, Video, compress_frame,
                    compress_video, read_frames, write_frames)
from .embedder import EmbeddingVector, ImageEmbedder, sim
from .engine import (MODES, FrameResult, OptimizationDivergedError, Perturbation,
                     ProtectionConfig, baseline_loss, early_stop_metric, prime_loss,
                     project, protect_frame, protect_video)
from .metrics import MetricReport, evaluate, psnr, ssim, surrogate_edit
from .surrogate import (DiffusionSchedule, FeatureSet, SurrogateLDM,
                        output_to_pixels, pixels_to_input)
from .synthetic import gen_target_queue, gen_video
from .targets import EmptyQueueError, TargetChoice, TargetQueue, score, select
from .tensor import Tensor, backward, l1_sum

__version__ = "0.1.0"

__all__ = [
    "CodecConfig", "ContainerError", "Frame", "Video", "compress_frame",
    "compress_video", "read_frames", "write_frames",
    "EmbeddingVector", "ImageEmbedder", "sim",
    "MODES", "FrameResult", "OptimizationDivergedError", "Perturbation",
    "ProtectionConfig", "baseline_loss", "early_stop_metric", "prime_loss",
    "project", "protect_frame", "protect_video",
    "MetricReport", "evaluate", "psnr", "ssim", "surrogate_edit",
    "DiffusionSchedule", "FeatureSet", "SurrogateLDM", "output_to_pixels",
    "pixels_to_input",
    "gen_target_queue", "gen_video",
    "EmptyQueueError", "TargetChoice", "TargetQueue", "score", "select",
    "Tensor", "backward", "l1_sum",
    "__version__",
]
