"""Protecting a clip, and what early stopping buys over the baselines.

Each frame is optimized until its latent stops drifting away from the
previously protected frames (the c-trace below). Baseline photoguard-style
modes have no such signal and always burn the full step budget.
"""

import numpy as np

from vidshield.embedder import ImageEmbedder
from vidshield.engine import ProtectionConfig, protect_video
from vidshield.surrogate import SurrogateLDM
from vidshield.synthetic import gen_target_queue, gen_video
from vidshield.targets import TargetQueue

video = gen_video(10, 4, 64, 64)
model = SurrogateLDM(seed=0)
queue = TargetQueue(gen_target_queue(20, 8, 64, 64), ImageEmbedder(seed=1))

cfg = ProtectionConfig(steps=40)
results = protect_video(video, queue, model, cfg)

print("prime mode:")
for i, r in enumerate(results):
    trace = " ".join(f"{c:.3f}" for c in r.c_trace[:8])
    print(f"  frame {i}: target {r.target_index}, {r.steps_used}/40 steps "
          f"({r.stop_reason}), c-trace {trace} ...")

delta = results[0].protected_frame.pixels.astype(int) - video.frames[0].pixels.astype(int)
print(f"\nperturbation: max|delta| = {np.abs(delta).max()} (budget {cfg.epsilon}), "
      f"all entries multiples of {cfg.quant_step}:",
      bool(not (delta % cfg.quant_step).any()))

baseline = protect_video(video, queue, model,
                         ProtectionConfig(steps=40, mode="photoguard_diffusion"))
print("\nphotoguard_diffusion mode (no early stop):",
      [r.steps_used for r in baseline], "steps per frame")
print("prime total steps:", sum(r.steps_used for r in results),
      " baseline total steps:", sum(r.steps_used for r in baseline))
