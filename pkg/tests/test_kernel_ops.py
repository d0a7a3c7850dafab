import numpy as np
import pytest

from ento.errors import ShapeError
from ento.kernel import (
    Tensor,
    add,
    bilinear_resize,
    channel_avg_max,
    channel_scale,
    concat_channels,
    global_avg,
    hadamard,
    prelu,
    relu,
    sigmoid,
    slice_channels,
    spatial_scale,
    sum_all,
    sum_per_image,
    tensor,
    window_avg,
)

from oracles import naive_bilinear, naive_window_avg


# --- bilinear -------------------------------------------------------------

def test_resize_constant_stays_constant():
    x = tensor(np.full((1, 2, 3, 5), 4.25))
    out = bilinear_resize(x, 7, 2)
    assert np.array_equal(out.data, np.full((1, 2, 7, 2), 4.25, dtype=np.float32))


def test_resize_single_pixel_fills_target():
    x = tensor(np.full((1, 1, 1, 1), -1.5))
    out = bilinear_resize(x, 4, 6)
    assert np.array_equal(out.data, np.full((1, 1, 4, 6), -1.5, dtype=np.float32))


def test_resize_2x2_to_4x4_hand_table():
    # half-pixel centers: src = (dst+0.5)/2 - 0.5 -> fracs {0, .25, .75, .25}
    x = tensor(np.array([[0.0, 1.0], [2.0, 3.0]]).reshape(1, 1, 2, 2))
    out = bilinear_resize(x, 4, 4)
    expected = np.array(
        [
            [0.00, 0.25, 0.75, 1.00],
            [0.50, 0.75, 1.25, 1.50],
            [1.50, 1.75, 2.25, 2.50],
            [2.00, 2.25, 2.75, 3.00],
        ],
        dtype=np.float32,
    )
    assert np.array_equal(out.data[0, 0], expected)


def test_resize_same_size_is_identity():
    rng = np.random.default_rng(0)
    x = tensor(rng.standard_normal((2, 3, 5, 7)).astype(np.float32))
    out = bilinear_resize(x, 5, 7)
    assert np.array_equal(out.data, x.data)


@pytest.mark.parametrize("shape,target", [((1, 2, 3, 4), (7, 5)), ((2, 1, 8, 8), (3, 3))])
def test_resize_matches_naive_loops(shape, target):
    rng = np.random.default_rng(1)
    x = rng.standard_normal(shape).astype(np.float64)
    out = bilinear_resize(Tensor(x), *target)
    assert np.allclose(out.data, naive_bilinear(x, *target), rtol=0, atol=1e-12)


def test_resize_bad_target_rejected():
    with pytest.raises(ShapeError, match="target size"):
        bilinear_resize(tensor(np.ones((1, 1, 2, 2))), 0, 3)


# --- pooling ----------------------------------------------------------------

def test_global_avg_trivial():
    x = tensor(np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 1, 2, 2))
    assert global_avg(x).data.reshape(()) == 2.5


def test_channel_avg_max_planes():
    x = np.zeros((1, 2, 3, 3), dtype=np.float32)
    x[0, 0] = 1.0
    x[0, 1] = 3.0
    out = channel_avg_max(tensor(x))
    assert np.array_equal(out.data[0, 0], np.full((3, 3), 2.0, dtype=np.float32))
    assert np.array_equal(out.data[0, 1], np.full((3, 3), 3.0, dtype=np.float32))


def test_window_avg_matches_naive_oracle():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((1, 1, 32, 32)).astype(np.float32)
    out = window_avg(Tensor(x), 31)
    assert np.array_equal(out.data, naive_window_avg(x, 31))


@pytest.mark.parametrize("k,stride", [(3, 1), (3, 2), (7, 1)])
def test_window_avg_small_shapes(k, stride):
    rng = np.random.default_rng(k + stride)
    x = rng.standard_normal((2, 2, 8, 8)).astype(np.float32)
    out = window_avg(Tensor(x), k, stride=stride)
    assert np.array_equal(out.data, naive_window_avg(x, k, stride=stride))


def test_window_avg_invalid_params_rejected():
    x = tensor(np.ones((1, 1, 8, 8)))
    with pytest.raises(ShapeError, match="odd"):
        window_avg(x, 4)
    with pytest.raises(ShapeError, match="stride"):
        window_avg(x, 3, stride=0)
    with pytest.raises(ShapeError, match="pad"):
        window_avg(x, 3, pad=5)


# --- pointwise ---------------------------------------------------------------

def test_sigmoid_at_zero():
    assert sigmoid(tensor(np.zeros((1, 1, 1, 1)))).data.reshape(()) == 0.5


def test_sigmoid_saturation_is_finite():
    x = tensor(np.array([-1e4, 1e4]).reshape(1, 1, 1, 2))
    out = sigmoid(x).data
    assert np.all(np.isfinite(out))
    assert out[0, 0, 0, 0] == 0.0 and out[0, 0, 0, 1] == 1.0


def test_prelu_slopes():
    x = tensor(np.array([-4.0, 4.0]).reshape(1, 1, 1, 2))
    a = tensor(np.full((1, 1, 1, 1), 0.25))
    out = prelu(x, a)
    assert np.array_equal(out.data.reshape(-1), np.array([-1.0, 4.0], dtype=np.float32))


def test_relu_clamps_negatives():
    x = tensor(np.array([-2.0, 0.0, 3.0]).reshape(1, 1, 1, 3))
    assert np.array_equal(relu(x).data.reshape(-1), np.array([0, 0, 3], dtype=np.float32))


def test_channel_scale_identity_with_unit_weights():
    rng = np.random.default_rng(2)
    x = tensor(rng.standard_normal((2, 3, 4, 4)).astype(np.float32))
    w = tensor(np.ones((2, 3, 1, 1)))
    assert np.array_equal(channel_scale(x, w).data, x.data)


def test_spatial_scale_broadcasts_over_channels():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((1, 3, 2, 2)).astype(np.float32)
    w = rng.uniform(0, 1, (1, 1, 2, 2)).astype(np.float32)
    out = spatial_scale(Tensor(x), Tensor(w))
    assert np.array_equal(out.data, x * w)


def test_add_hadamard_commute():
    rng = np.random.default_rng(4)
    x = tensor(rng.standard_normal((1, 2, 3, 3)).astype(np.float32))
    y = tensor(rng.standard_normal((1, 2, 3, 3)).astype(np.float32))
    assert np.array_equal(add(x, y).data, add(y, x).data)
    assert np.array_equal(hadamard(x, y).data, hadamard(y, x).data)


def test_add_associative_in_float64():
    rng = np.random.default_rng(6)
    xs = [Tensor(rng.uniform(-1, 1, (1, 2, 3, 3))) for _ in range(3)]
    left = add(add(xs[0], xs[1]), xs[2]).data
    right = add(xs[0], add(xs[1], xs[2])).data
    assert np.allclose(left, right, rtol=0, atol=1e-12)


def test_pointwise_shape_mismatch_rejected():
    x = tensor(np.ones((1, 2, 3, 3)))
    y = tensor(np.ones((1, 2, 3, 4)))
    with pytest.raises(ShapeError, match="mismatch"):
        add(x, y)
    with pytest.raises(ShapeError, match="mismatch"):
        hadamard(x, y)
    with pytest.raises(ShapeError, match="channel_scale"):
        channel_scale(x, tensor(np.ones((1, 3, 1, 1))))


def test_mixed_dtype_rejected():
    x = tensor(np.ones((1, 1, 2, 2)), dtype=np.float32)
    y = tensor(np.ones((1, 1, 2, 2)), dtype=np.float64)
    with pytest.raises(ShapeError, match="dtypes"):
        add(x, y)


# --- concat / slice ----------------------------------------------------------

def test_concat_shape_arithmetic():
    a = tensor(np.ones((1, 2, 4, 4)))
    b = tensor(np.ones((1, 3, 4, 4)))
    assert concat_channels([a, b]).shape == (1, 5, 4, 4)


def test_concat_single_is_copy():
    rng = np.random.default_rng(8)
    a = tensor(rng.standard_normal((2, 3, 2, 2)).astype(np.float32))
    out = concat_channels([a])
    assert out.data is not a.data
    assert np.array_equal(out.data, a.data)


def test_concat_slice_round_trip():
    rng = np.random.default_rng(9)
    parts = [
        tensor(rng.standard_normal((2, c, 3, 5)).astype(np.float32)) for c in (1, 4, 2)
    ]
    cat = concat_channels(parts)
    off = 0
    for p in parts:
        got = slice_channels(cat, off, off + p.shape[1])
        assert np.array_equal(got.data, p.data)
        off += p.shape[1]


def test_concat_errors():
    with pytest.raises(ShapeError, match="empty"):
        concat_channels([])
    a = tensor(np.ones((1, 2, 4, 4)))
    b = tensor(np.ones((1, 2, 5, 4)))
    with pytest.raises(ShapeError, match="part 1"):
        concat_channels([a, b])


def test_slice_bad_range_rejected():
    a = tensor(np.ones((1, 2, 4, 4)))
    with pytest.raises(ShapeError, match="invalid range"):
        slice_channels(a, 1, 4)


# --- reductions ----------------------------------------------------------------

def test_sums():
    x = tensor(np.arange(8, dtype=np.float32).reshape(2, 1, 2, 2))
    assert sum_all(x).item() == 28.0
    per = sum_per_image(x)
    assert per.shape == (2, 1, 1, 1)
    assert per.data.reshape(-1).tolist() == [6.0, 22.0]


def test_outputs_finite_on_random_inputs():
    rng = np.random.default_rng(11)
    x = Tensor(rng.standard_normal((2, 4, 8, 8)).astype(np.float32) * 50)
    for out in (sigmoid(x), relu(x), global_avg(x), channel_avg_max(x), window_avg(x, 3)):
        assert np.all(np.isfinite(out.data))
