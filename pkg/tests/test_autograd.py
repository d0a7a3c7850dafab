import numpy as np
import pytest

from ento.errors import GraphError, ShapeError
from ento.kernel import (
    ConvSpec,
    GradTape,
    ParamStore,
    Tensor,
    add,
    bce_with_logits,
    bilinear_resize,
    channel_avg_max,
    channel_scale,
    concat_channels,
    conv2d,
    divide,
    global_avg,
    grad_check,
    hadamard,
    offset,
    prelu,
    relu,
    scale,
    sigmoid,
    slice_channels,
    spatial_scale,
    sum_all,
    sum_per_image,
    window_avg,
)


def _leaf(arr):
    return Tensor(np.asarray(arr), requires_grad=True)


def test_linear_loss_grad_is_input():
    rng = np.random.default_rng(0)
    x = Tensor(rng.standard_normal((1, 2, 3, 3)))
    w = _leaf(rng.standard_normal((1, 2, 3, 3)))
    with GradTape() as tape:
        loss = sum_all(hadamard(w, x))
    tape.backward(loss)
    assert np.allclose(w.grad, x.data, rtol=0, atol=0)


def test_sigmoid_grad_at_zero():
    w = _leaf(np.zeros((1, 1, 1, 1)))
    c = Tensor(np.full((1, 1, 1, 1), 3.0))
    with GradTape() as tape:
        loss = sum_all(hadamard(sigmoid(w), c))
    tape.backward(loss)
    assert np.allclose(w.grad, 0.25 * 3.0, rtol=0, atol=1e-12)


def test_backward_without_forward_rejected():
    tape = GradTape()
    loss = Tensor(np.zeros((1, 1, 1, 1)))
    with pytest.raises(GraphError, match="without"):
        tape.backward(loss)


def test_backward_twice_rejected():
    w = _leaf(np.ones((1, 1, 1, 1)))
    with GradTape() as tape:
        loss = sum_all(w_out := scale(w, 2.0))
    tape.backward(loss)
    with pytest.raises(GraphError, match="already"):
        tape.backward(loss)


def test_nested_tapes_rejected():
    with GradTape():
        with pytest.raises(GraphError, match="nest"):
            with GradTape():
                pass


def test_non_scalar_loss_rejected():
    w = _leaf(np.ones((1, 1, 2, 2)))
    with GradTape() as tape:
        out = scale(w, 1.0)
    with pytest.raises(ShapeError, match="1,1,1,1"):
        tape.backward(out)


def test_untouched_parameters_keep_zero_grad():
    store = ParamStore(dtype=np.float64, seed=1)
    used = store.register("used", (1, 1, 2, 2), ("uniform", 0.5))
    unused = store.register("unused", (1, 1, 2, 2), ("uniform", 0.5))
    with GradTape() as tape:
        loss = sum_all(hadamard(used.tensor, used.tensor))
    store.zero_grads()
    tape.backward(loss)
    assert np.all(unused.grad == 0)
    assert np.any(used.grad != 0)


def _fd_check(make_loss, leaves, eps=1e-5, tol=1e-6):
    """Brute-force central differences on every coordinate of each leaf."""
    with GradTape() as tape:
        loss = make_loss()
    for leaf in leaves:
        leaf.zero_grad()
    tape.backward(loss)
    for leaf in leaves:
        flat = leaf.data.reshape(-1)
        gflat = leaf.grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = make_loss().item()
            flat[i] = orig - eps
            lm = make_loss().item()
            flat[i] = orig
            cd = (lp - lm) / (2 * eps)
            rel = abs(gflat[i] - cd) / max(abs(gflat[i]), abs(cd), 1e-8)
            assert rel < tol, f"coord {i}: analytic {gflat[i]} vs cd {cd}"


@pytest.mark.parametrize("k,stride", [(1, 1), (3, 1), (3, 2), (7, 1)])
def test_conv_gradients_match_fd(k, stride):
    rng = np.random.default_rng(k + stride)
    x = _leaf(rng.standard_normal((2, 2, 5, 5)))
    w = _leaf(rng.standard_normal((3, 2, k, k)) * 0.5)
    b = _leaf(rng.standard_normal((1, 3, 1, 1)) * 0.1)
    spec = ConvSpec(k, 2, 3, stride=stride)
    _fd_check(lambda: sum_all(conv2d(x, spec, w, b)), [x, w, b])


def test_resize_gradients_match_fd():
    rng = np.random.default_rng(5)
    x = _leaf(rng.standard_normal((1, 2, 3, 4)))
    peso = Tensor(rng.standard_normal((1, 2, 5, 7)))
    _fd_check(lambda: sum_all(hadamard(bilinear_resize(x, 5, 7), peso)), [x])
    _fd_check(lambda: sum_all(hadamard(bilinear_resize(x, 2, 2), peso_small := Tensor(peso.data[:, :, :2, :2].copy()))), [x])


def test_pool_gradients_match_fd():
    rng = np.random.default_rng(6)
    x = _leaf(rng.standard_normal((2, 3, 4, 4)))
    r = Tensor(rng.standard_normal((2, 3, 1, 1)))
    _fd_check(lambda: sum_all(hadamard(global_avg(x), r)), [x])
    r2 = Tensor(rng.standard_normal((2, 2, 4, 4)))
    _fd_check(lambda: sum_all(hadamard(channel_avg_max(x), r2)), [x])
    r3 = Tensor(rng.standard_normal((2, 3, 4, 4)))
    _fd_check(lambda: sum_all(hadamard(window_avg(x, 3), r3)), [x])


def test_pointwise_gradients_match_fd():
    rng = np.random.default_rng(7)
    x = _leaf(rng.standard_normal((1, 3, 3, 3)) + 0.3)
    y = _leaf(rng.standard_normal((1, 3, 3, 3)) + 2.5)
    a = _leaf(np.full((1, 3, 1, 1), 0.25))
    cw = _leaf(rng.standard_normal((1, 3, 1, 1)))
    sw = _leaf(rng.standard_normal((1, 1, 3, 3)))
    _fd_check(lambda: sum_all(relu(x)), [x])
    _fd_check(lambda: sum_all(prelu(x, a)), [x, a])
    _fd_check(lambda: sum_all(sigmoid(x)), [x])
    _fd_check(lambda: sum_all(hadamard(x, y)), [x, y])
    _fd_check(lambda: sum_all(divide(x, y)), [x, y])
    t = Tensor((rng.uniform(0, 1, (1, 3, 3, 3)) > 0.5).astype(np.float64))
    _fd_check(lambda: sum_all(bce_with_logits(x, t)), [x])
    _fd_check(lambda: sum_all(channel_scale(x, cw)), [x, cw])
    _fd_check(lambda: sum_all(spatial_scale(x, sw)), [x, sw])
    _fd_check(lambda: scale(offset(sum_all(x), 1.5), -2.0), [x])


def test_concat_slice_gradients_match_fd():
    rng = np.random.default_rng(8)
    xs = [_leaf(rng.standard_normal((1, c, 2, 2))) for c in (1, 2)]
    r = Tensor(rng.standard_normal((1, 3, 2, 2)))
    _fd_check(lambda: sum_all(hadamard(concat_channels(xs), r)), xs)
    big = _leaf(rng.standard_normal((1, 4, 2, 2)))
    r2 = Tensor(rng.standard_normal((1, 2, 2, 2)))
    _fd_check(lambda: sum_all(hadamard(slice_channels(big, 1, 3), r2)), [big])


def test_sum_per_image_gradient():
    rng = np.random.default_rng(9)
    x = _leaf(rng.standard_normal((3, 2, 2, 2)))
    r = Tensor(rng.standard_normal((3, 1, 1, 1)))
    _fd_check(lambda: sum_all(hadamard(sum_per_image(x), r)), [x])


def test_reused_tensor_accumulates_both_paths():
    x = _leaf(np.full((1, 1, 1, 1), 3.0))
    with GradTape() as tape:
        loss = sum_all(hadamard(x, x))  # d/dx x^2 = 2x
    tape.backward(loss)
    assert np.allclose(x.grad, 6.0)


def test_grad_check_linear_is_exact():
    store = ParamStore(dtype=np.float64, seed=2)
    w = store.register("w", (1, 2, 3, 3), ("uniform", 0.5))
    c = Tensor(np.random.default_rng(3).standard_normal((1, 2, 3, 3)))

    err = grad_check(lambda: sum_all(hadamard(w.tensor, c)), store, eps=1e-5)
    assert err <= 1e-10


def test_grad_check_conv_relu_composite():
    store = ParamStore(dtype=np.float64, seed=4)
    spec = ConvSpec(3, 2, 3)
    w = store.register("w", spec.weight_shape, ("uniform", 0.3), "conv_weight")
    b = store.register("b", (1, 3, 1, 1), ("uniform", 0.3), "conv_bias")
    x = Tensor(np.random.default_rng(5).standard_normal((2, 2, 5, 5)))

    err = grad_check(
        lambda: sum_all(relu(conv2d(x, spec, w.tensor, b.tensor))), store, eps=1e-5
    )
    assert err <= 1e-6


def test_grad_check_composite_of_all_ops():
    # one scalar function threading every differentiable kernel op
    store = ParamStore(dtype=np.float64, seed=6)
    spec = ConvSpec(3, 2, 2)
    w = store.register("w", spec.weight_shape, ("uniform", 0.4), "conv_weight")
    b = store.register("b", (1, 2, 1, 1), ("uniform", 0.4), "conv_bias")
    a = store.register("a", (1, 2, 1, 1), ("constant", 0.25), "prelu_slope")
    g7 = store.register("g7", (1, 2, 7, 7), ("uniform", 0.4), "conv_weight")
    rng = np.random.default_rng(7)
    x = Tensor(rng.standard_normal((2, 2, 6, 6)))
    tgt = Tensor((rng.uniform(0, 1, (2, 1, 6, 6)) > 0.5).astype(np.float64))

    def f():
        t = conv2d(x, spec, w.tensor, b.tensor)
        t = prelu(t, a.tensor)
        t = add(t, x)
        cw = sigmoid(global_avg(t))
        t = channel_scale(t, cw)
        sal = channel_avg_max(t)
        sal = conv2d(sal, ConvSpec(7, 2, 1, has_bias=False), g7.tensor)
        sw = sigmoid(sal)
        t = spatial_scale(t, sw)
        t = window_avg(t, 3)
        parts = concat_channels([slice_channels(t, 0, 1), slice_channels(t, 1, 2)])
        m = bilinear_resize(slice_channels(parts, 0, 1), 6, 6)
        bce = bce_with_logits(m, tgt)
        num = sum_per_image(bce)
        den = offset(sum_per_image(sigmoid(m)), 1.0)
        return scale(sum_all(divide(num, den)), 0.5)

    err = grad_check(f, store, eps=1e-5, max_coords_per_param=6)
    assert err <= 1e-4
