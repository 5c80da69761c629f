"""Tour of the tensor core: building a graph and differentiating it.

The library tracks every operation on tensors that require gradients and
replays them in reverse on ``backward``. Everything is float64 numpy
underneath, so results are bit-reproducible.
"""

import numpy as np

from vidshield.tensor import Tensor, backward, conv2d, l1_sum, mul, tanh, tsum

# A classic sanity check: d/dx sum(x*x) = 2x.
x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
loss = tsum(mul(x, x))
backward(loss)
print("loss  =", loss.item())
print("grad  =", x.grad, "(expected [2, 4, 6])")

# The same machinery drives convolutions. Compare the autodiff gradient
# of a conv+tanh stack against central finite differences.
rng = np.random.default_rng(0)
img = rng.normal(size=(1, 1, 6, 6))
w = Tensor(rng.normal(size=(2, 1, 3, 3)))
target = Tensor(rng.normal(size=(1, 2, 6, 6)))


def f(arr):
    return l1_sum(tanh(conv2d(Tensor(arr), w, padding=1)), target).item()


t = Tensor(img, requires_grad=True)
backward(l1_sum(tanh(conv2d(t, w, padding=1)), target))

h = 1e-5
pos = (0, 0, 2, 3)
bumped_up, bumped_dn = img.copy(), img.copy()
bumped_up[pos] += h
bumped_dn[pos] -= h
fd = (f(bumped_up) - f(bumped_dn)) / (2 * h)
print(f"autodiff grad at {pos} = {t.grad[pos]:+.8f}")
print(f"finite difference     = {fd:+.8f}")
print(f"relative error        = {abs(t.grad[pos] - fd) / abs(fd):.2e}")
