"""The diffusion surrogate: encode, decode, DDIM inversion and sampling.

The surrogate is a tiny frozen network, but it has the moving parts that
matter for protection: a latent space, a noise predictor wired into a
deterministic DDIM loop, and a decoder. The inversion/sampling pair is
numerically reversible, which the perturbation loss exploits.
"""

import numpy as np

from vidshield.surrogate import DiffusionSchedule, SurrogateLDM, pixels_to_input
from vidshield.synthetic import gen_video

model = SurrogateLDM(seed=0)
schedule = DiffusionSchedule.linear_beta(2)
print("schedule abar:", np.round(schedule.abar, 6))

frame = gen_video(1, 1, 64, 64).frames[0]
x = pixels_to_input(frame.pixels)

z = model.encode(x)
print("latent shape:", z.shape, " range: [%.3f, %.3f]" % (z.data.min(), z.data.max()))

y = model.decode(z)
print("decoded shape:", y.shape, " bounded by tanh:", float(np.abs(y.data).max()) <= 1.0)

# Walk the latent out to the noisiest level and back again.
trajectory = model.ddim_invert(z, schedule)
back = model.ddim_sample(trajectory[-1], schedule)
err = np.abs(back[-1].data - z.data).max()
print(f"DDIM round-trip L-inf error: {err:.2e}")

features = model.features(x, schedule)
print("feature set:", len(features.tensors()), "tensors "
      f"(1 encoder + {len(features.f_fwd)} inversion + "
      f"{len(features.f_smp)} sampling + 1 decoder)")
