"""연산자와 연산 그래프: 유한 차분 oracle, 치환, shape 검증"""

import numpy as np
import pytest

from concept_xai.engine import ComputeGraph, conv2d, cross_entropy_loss, gap, maxpool2d, softmax
from concept_xai.exceptions import ShapeError, ValidationError
from tests.conftest import make_model

EPS = 1e-6


def numeric_gradient(fn, x, eps=EPS):
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + eps
        plus = fn(x)
        x[idx] = orig - eps
        minus = fn(x)
        x[idx] = orig
        grad[idx] = (plus - minus) / (2 * eps)
    return grad


def relative_error(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)) + np.max(np.abs(b)), 1e-12))


def test_conv2d_matches_nested_loop_oracle(rng):
    x = rng.normal(size=(5, 6, 2))
    k = rng.normal(size=(3, 3, 2, 4))
    b = rng.normal(size=4)
    out = conv2d(x, k, padding="valid", bias=b)
    assert out.shape == (3, 4, 4)
    expected = np.zeros_like(out)
    for i in range(3):
        for j in range(4):
            for c in range(4):
                expected[i, j, c] = np.sum(x[i : i + 3, j : j + 3, :] * k[..., c]) + b[c]
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_conv2d_same_padding_keeps_size_and_stride_shrinks(rng):
    x = rng.normal(size=(7, 7, 3))
    k = rng.normal(size=(3, 3, 3, 2))
    assert conv2d(x, k, padding="same").shape == (7, 7, 2)
    assert conv2d(x, k, stride=2, padding="valid").shape == (3, 3, 2)


def test_conv2d_channel_mismatch_raises_shape_error(rng):
    with pytest.raises(ShapeError):
        conv2d(rng.normal(size=(5, 5, 3)), rng.normal(size=(3, 3, 2, 1)))


def test_maxpool_and_gap_values():
    x = np.arange(16, dtype=np.float64).reshape(4, 4, 1)
    pooled = maxpool2d(x, size=2)
    np.testing.assert_array_equal(pooled[..., 0], [[5.0, 7.0], [13.0, 15.0]])
    np.testing.assert_allclose(gap(x), [7.5])


def test_softmax_and_cross_entropy_gradient(rng):
    logits = rng.normal(size=(3, 4))
    labels = [0, 2, 3]
    probs = softmax(logits)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)
    loss, grad = cross_entropy_loss(logits, labels)
    assert loss >= 0.0
    numeric = numeric_gradient(lambda z: cross_entropy_loss(z, labels)[0], logits.copy())
    assert relative_error(grad, numeric) < 1e-6


@pytest.mark.parametrize("seed", range(20))
def test_backward_matches_finite_differences_on_random_networks(seed):
    net_rng = np.random.default_rng(seed)
    depth = int(net_rng.integers(1, 5))
    channels = [int(c) for c in net_rng.integers(1, 17, size=depth)]
    pool_after = [1] if depth > 1 else []
    model = make_model(conv_channels=channels, image_size=6, pool_after=pool_after, seed=seed)
    graph = model.build_graph()
    x = net_rng.uniform(size=(1, 6, 6, 3))
    target = int(net_rng.integers(0, 3))
    layer = model.architecture.explainable_layers()[int(net_rng.integers(0, depth))]

    graph.forward(x)
    fmaps = graph.node(layer).output.copy()
    seed_vec = np.zeros((1, 3))
    seed_vec[0, target] = 1.0
    analytic = graph.backward(graph.output_index, layer, seed=seed_vec)

    suffix_graph = model.build_graph()
    suffix_graph.forward(x)
    numeric = numeric_gradient(lambda f: suffix_graph.forward_from(layer, f)[0, target], fmaps.copy())
    assert relative_error(analytic, numeric) <= 1e-4


def test_parameter_gradients_match_finite_differences():
    model = make_model(conv_channels=(3, 2), image_size=5, seed=11)
    data_rng = np.random.default_rng(5)
    x = data_rng.uniform(size=(2, 5, 5, 3))
    labels = [1, 2]
    graph = model.build_graph()
    logits = graph.forward(x)
    _, dlogits = cross_entropy_loss(logits, labels)
    grads = graph.parameter_gradients(graph.output_index, dlogits)

    name = "conv2/kernel"
    original = graph.params[name].copy()

    def loss_at(value):
        graph.params[name] = value
        out = cross_entropy_loss(graph.forward(x), labels)[0]
        graph.params[name] = original
        return out

    numeric = numeric_gradient(loss_at, original.copy())
    assert relative_error(grads[name], numeric) <= 1e-4


def test_forward_from_with_cached_value_reproduces_forward(tiny_model, tiny_images):
    graph = tiny_model.build_graph()
    logits = graph.forward(tiny_images).copy()
    fmaps = graph.node("conv1").output.copy()
    np.testing.assert_array_equal(graph.forward_from("conv1", fmaps), logits)


def test_forward_from_accepts_other_batch_size(tiny_model, tiny_images):
    graph = tiny_model.build_graph()
    graph.forward(tiny_images[:1])
    fmaps = graph.node("conv2").output
    out = graph.forward_from("conv2", np.repeat(fmaps, 4, axis=0) * np.linspace(0, 1, 4)[:, None, None, None])
    assert out.shape == (4, 3)


def test_forward_from_rejects_non_capturable_node(tiny_model, tiny_images):
    graph = tiny_model.build_graph()
    graph.forward(tiny_images)
    with pytest.raises(ValidationError):
        graph.forward_from("conv1/preact", graph.node("conv1/preact").output)


def test_forward_from_shape_mismatch(tiny_model, tiny_images):
    graph = tiny_model.build_graph()
    graph.forward(tiny_images)
    with pytest.raises(ShapeError):
        graph.forward_from("conv1", np.zeros((1, 3, 3, 4)))


def test_backward_without_path_returns_zeros(tiny_model, tiny_images):
    graph = tiny_model.build_graph()
    graph.forward(tiny_images[:1])
    grad = graph.backward("conv1", "conv2", seed=np.ones_like(graph.node("conv1").output))
    assert grad.shape == graph.node("conv2").output.shape
    assert not grad.any()


def test_backward_requires_seed_for_non_scalar(tiny_model, tiny_images):
    graph = tiny_model.build_graph()
    graph.forward(tiny_images[:2])
    with pytest.raises(ValidationError):
        graph.backward(graph.output_index, "conv1")
    with pytest.raises(ShapeError):
        graph.backward(graph.output_index, "conv1", seed=np.ones((1, 3)))


def test_graph_rejects_duplicate_and_unknown_nodes():
    graph = ComputeGraph({"w": np.ones((2, 2))})
    graph.add_input()
    with pytest.raises(ValidationError):
        graph.add_input("second")
    with pytest.raises(ValidationError):
        graph.add_node("input", "relu", ["input"])
    with pytest.raises(ValidationError):
        graph.add_node("d", "dense", ["missing"], ["w"])
    with pytest.raises(ValidationError):
        graph.add_node("d", "dense", ["input"], ["nope"])


def test_capturable_names_follow_conv_layers(tiny_model):
    graph = tiny_model.build_graph()
    assert graph.capturable_names() == ["conv1", "conv2"]
