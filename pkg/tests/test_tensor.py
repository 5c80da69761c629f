import numpy as np
import pytest

from vidshield.tensor import (ShapeError, Tensor, add, add_channel_bias, avg_pool,
                              backward, conv2d, l1_sum, matmul, mul, relu, sub,
                              tanh, tsum, upsample)

from oracles import finite_diff_grad, rel_error


def test_add_mul_values():
    a = Tensor([1.0, 2.0])
    b = Tensor([3.0, -1.0])
    assert np.array_equal(add(a, b).data, [4.0, 1.0])
    assert np.array_equal(sub(a, b).data, [-2.0, 3.0])
    assert np.array_equal(mul(a, b).data, [3.0, -2.0])
    assert np.array_equal(mul(a, 2.0).data, [2.0, 4.0])


def test_shape_mismatch_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2,\).*\(3,\)"):
        add(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))


def test_l1_sum_identical_is_zero():
    x = Tensor(np.random.default_rng(0).normal(size=(3, 4)))
    assert l1_sum(x, x).item() == 0.0


def test_l1_sum_small_case():
    assert l1_sum(Tensor([1.0, 2.0]), Tensor([3.0, 1.0])).item() == 3.0


def test_backward_sum_of_squares():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    loss = tsum(mul(x, x))
    backward(loss)
    assert np.array_equal(x.grad, [2.0, 4.0, 6.0])


def test_backward_l1_subgradient():
    x = Tensor([-1.0, 2.0], requires_grad=True)
    backward(l1_sum(x, Tensor([0.0, 0.0])))
    assert np.array_equal(x.grad, [-1.0, 1.0])
    # subgradient at exactly zero difference is zero
    y = Tensor([0.0, 5.0], requires_grad=True)
    backward(l1_sum(y, Tensor([0.0, 5.0])))
    assert np.array_equal(y.grad, [0.0, 0.0])


def test_backward_rejects_non_scalar_loss():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        backward(mul(x, x))


def test_repeated_backward_accumulates():
    x = Tensor([1.0, 2.0], requires_grad=True)
    loss = tsum(mul(x, x))
    backward(loss)
    backward(loss)
    assert np.array_equal(x.grad, [4.0, 8.0])


def test_backward_linearity():
    rng = np.random.default_rng(3)
    x = Tensor(rng.normal(size=(4,)), requires_grad=True)
    y = Tensor(rng.normal(size=(4,)))

    loss1 = tsum(mul(x, x))
    loss2 = l1_sum(x, y)

    x.zero_grad()
    backward(loss1)
    g1 = x.grad.copy()
    x.zero_grad()
    backward(loss2)
    g2 = x.grad.copy()

    a, b = 0.7, -1.3
    x.zero_grad()
    combined = add(mul(tsum(mul(x, x)), a), mul(l1_sum(x, y), b))
    backward(combined)
    assert np.abs(x.grad - (a * g1 + b * g2)).max() < 1e-10


def test_matmul_values_and_grads():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True)
    b = Tensor([[1.0], [1.0]], requires_grad=True)
    out = matmul(a, b)
    assert np.array_equal(out.data, [[3.0], [7.0]])
    backward(tsum(out))
    assert np.array_equal(a.grad, [[1.0, 1.0], [1.0, 1.0]])
    assert np.array_equal(b.grad, [[4.0], [6.0]])
    with pytest.raises(ShapeError):
        matmul(Tensor([[1.0, 2.0]]), Tensor([[1.0, 2.0]]))


def test_avg_pool_and_upsample_values():
    x = Tensor(np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4))
    pooled = avg_pool(x, 2)
    assert np.array_equal(pooled.data[0, 0], [[2.5, 4.5], [10.5, 12.5]])
    up = upsample(Tensor([[[[1.0, 2.0], [3.0, 4.0]]]]), 2)
    assert np.array_equal(up.data[0, 0],
                          [[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]])


def test_conv2d_shape_and_channel_checks():
    x = Tensor(np.zeros((1, 2, 4, 4)))
    w = Tensor(np.zeros((3, 5, 3, 3)))
    with pytest.raises(ShapeError, match="channels"):
        conv2d(x, w)


def _gradcheck(build, x0, tol=1e-4):
    """Compare autodiff grad of build(Tensor) against finite differences."""
    x = Tensor(x0, requires_grad=True)
    backward(build(x))

    def f(arr):
        return build(Tensor(arr)).item()

    return rel_error(x.grad, finite_diff_grad(f, x0))


def test_conv2d_gradcheck_5x5():
    rng = np.random.default_rng(11)
    w = Tensor(rng.normal(size=(2, 1, 3, 3)))
    r = Tensor(rng.normal(size=(1, 2, 3, 3)))
    x0 = rng.normal(size=(1, 1, 5, 5))
    err = _gradcheck(lambda x: tsum(mul(conv2d(x, w), r)), x0)
    assert err < 1e-4


@pytest.mark.parametrize("case", range(5))
def test_gradcheck_each_primitive(case):
    rng = np.random.default_rng(100 + case)
    v = rng.normal(size=(6,))
    other = Tensor(rng.normal(size=(6,)))
    r = Tensor(rng.normal(size=(6,)))
    nchw = rng.normal(size=(1, 2, 4, 4))
    r4 = Tensor(rng.normal(size=(1, 2, 4, 4)))
    w = Tensor(rng.normal(size=(3, 2, 3, 3)))
    rc = Tensor(rng.normal(size=(1, 3, 2, 2)))
    mat = Tensor(rng.normal(size=(4, 6)))
    rm = Tensor(rng.normal(size=(4,)))
    bias = Tensor(rng.normal(size=(2,)))
    rp = Tensor(rng.normal(size=(1, 2, 2, 2)))
    r8 = Tensor(rng.normal(size=(1, 2, 8, 8)))
    # keep relu/l1 inputs away from their kinks
    v_off = v + np.sign(v) * 0.2

    checks = [
        (lambda x: tsum(mul(add(x, other), r)), v),
        (lambda x: tsum(mul(sub(x, other), r)), v),
        (lambda x: tsum(mul(mul(x, other), r)), v),
        (lambda x: tsum(mul(matmul(mat, x), rm)), v),
        (lambda x: tsum(mul(relu(x), r)), v_off),
        (lambda x: tsum(mul(tanh(x), r)), v),
        (lambda x: l1_sum(x, other), v_off),
        (lambda x: tsum(mul(conv2d(x, w, stride=2, padding=1), rc)), nchw),
        (lambda x: tsum(mul(add_channel_bias(x, bias), r4)), nchw),
        (lambda x: tsum(mul(avg_pool(x, 2), rp)), nchw),
        (lambda x: tsum(mul(upsample(x, 2), r8)), nchw),
        (lambda x: tsum(mul(x, x)), v),
    ]
    for build, x0 in checks:
        assert _gradcheck(build, x0) < 1e-4


def test_forward_and_grad_determinism():
    def run():
        rng = np.random.default_rng(42)
        x = Tensor(rng.normal(size=(1, 2, 8, 8)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 2, 3, 3)))
        out = tanh(conv2d(x, w, stride=2, padding=1))
        loss = l1_sum(out, Tensor(np.zeros_like(out.data)))
        backward(loss)
        return out.data.tobytes(), x.grad.tobytes()

    f1, g1 = run()
    f2, g2 = run()
    assert f1 == f2
    assert g1 == g2
