"""Tests for odskit.numcore module."""

import numpy as np
import pytest

from odskit import numcore
from odskit.models import MlpClassifier, init_mlp


def _smooth_at(model, x, head, gap=1e-3):
    """True when no hidden unit sits on its ReLU kink and no margin runner-up is tied."""
    h = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        pre = numcore.affine(h, w, b)
        if np.min(np.abs(pre)) < gap:
            return False
        h = numcore.relu(pre)
    if isinstance(head, numcore.MarginHead):
        logits = numcore.forward(model, x)[0]
        others = np.sort(np.delete(logits, head.label))
        return others[-1] - others[-2] > gap
    return True


class TestTensorOps:
    """Tests for as_tensor, affine and log_softmax."""

    def test_as_tensor_reshapes(self):
        t = numcore.as_tensor([1, 2, 3, 4], shape=(2, 2))
        assert t.shape == (2, 2)
        assert t.dtype == np.float64

    def test_as_tensor_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            numcore.as_tensor([1.0, np.nan])

    def test_as_tensor_rejects_bad_shape(self):
        with pytest.raises(numcore.DimensionError):
            numcore.as_tensor([1, 2, 3], shape=(2, 2))
        with pytest.raises(numcore.DimensionError):
            numcore.as_tensor([], shape=(0,))

    def test_affine_shape_mismatch(self):
        with pytest.raises(numcore.DimensionError):
            numcore.affine(np.ones((2, 3)), np.ones((4, 2)), np.zeros(2))
        with pytest.raises(numcore.DimensionError):
            numcore.affine(np.ones((2, 3)), np.ones((3, 2)), np.zeros(3))

    def test_affine_matches_explicit_sums(self):
        rng = np.random.default_rng(4)
        inputs, weight, bias = rng.normal(size=(3, 4)), rng.normal(size=(4, 2)), rng.normal(size=2)
        expected = np.zeros((3, 2))
        for r in range(3):
            for c in range(2):
                expected[r, c] = bias[c] + sum(inputs[r, k] * weight[k, c] for k in range(4))
        assert np.allclose(numcore.affine(inputs, weight, bias), expected)

    def test_relu_clips_negatives_and_is_idempotent(self):
        out = numcore.relu(np.array([-1.0, 0.0, 2.0]))
        assert out.tolist() == [0.0, 0.0, 2.0]
        assert np.array_equal(numcore.relu(out), out)

    def test_log_softmax_is_stable_and_normalized(self):
        out = numcore.log_softmax(np.array([1000.0, 1000.0]))
        assert np.allclose(out, np.log(0.5))
        assert np.isclose(np.exp(numcore.log_softmax(np.array([0.1, 2.0, -3.0]))).sum(), 1.0)


class TestLosses:
    """Tests for cross-entropy and margin losses."""

    def test_cross_entropy_uniform_logits(self):
        assert numcore.softmax_cross_entropy(np.zeros(4), 2) == pytest.approx(np.log(4))

    def test_cross_entropy_is_stable_for_large_logits(self):
        assert numcore.softmax_cross_entropy(np.array([1000.0, 0.0]), 0) == pytest.approx(0.0, abs=1e-12)
        assert numcore.softmax_cross_entropy(np.array([1000.0, 0.0]), 1) == pytest.approx(1000.0)

    def test_cross_entropy_label_out_of_range(self):
        with pytest.raises(IndexError):
            numcore.softmax_cross_entropy(np.zeros(3), 3)

    def test_margin_positive_iff_misclassified(self):
        assert numcore.margin_loss(np.array([1.0, 3.0, 2.0]), 0) == pytest.approx(2.0)
        assert numcore.margin_loss(np.array([5.0, 3.0, 2.0]), 0) == pytest.approx(-2.0)

    def test_margin_needs_two_classes(self):
        with pytest.raises(ValueError):
            numcore.margin_loss(np.array([1.0]), 0)

    def test_runner_up_ties_take_lowest_index(self):
        assert numcore.runner_up(np.array([2.0, 2.0, 2.0]), 0) == 1


class TestHeads:
    """Tests for head values and gradients."""

    def test_margin_head_matches_margin_loss_per_row(self):
        logits = np.array([[1.0, 3.0, 2.0], [0.0, -1.0, 4.0]])
        head = numcore.MarginHead(np.array([0, 2]))
        assert np.allclose(head.values(logits), [2.0, -4.0])

    def test_targeted_head_is_negated_cross_entropy(self):
        logits = np.array([[0.3, -0.2, 1.1]])
        value = numcore.TargetedCrossEntropyHead(1).values(logits)[0]
        assert value == pytest.approx(-numcore.softmax_cross_entropy(logits[0], 1))

    def test_linear_head_length_mismatch(self):
        with pytest.raises(numcore.DimensionError):
            numcore.LinearHead(np.ones(3)).values(np.zeros((1, 4)))

    def test_margin_grads_on_tie_pick_lowest_runner_up(self):
        grads = numcore.MarginHead(0).grads(np.array([[1.0, 2.0, 2.0]]))
        assert grads.tolist() == [[-1.0, 1.0, 0.0]]

    def test_cross_entropy_grads_sum_to_zero(self):
        grads = numcore.CrossEntropyHead(1).grads(np.array([[0.5, 1.0, -2.0]]))
        assert grads.sum() == pytest.approx(0.0)


class TestGradients:
    """Reverse-mode gradients against central finite differences."""

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        worst = 0.0
        for trial in range(100):
            sizes = [int(rng.integers(2, 8)), int(rng.integers(2, 10)), int(rng.integers(2, 5))]
            model = init_mlp(sizes, seed=trial)
            x = rng.uniform(0.0, 1.0, size=sizes[0])
            # Keep clear of ReLU kinks, where differences are not derivatives.
            while np.min(np.abs(x @ model.weights[0] + model.biases[0])) < 1e-3:
                x = rng.uniform(0.0, 1.0, size=sizes[0])
            head = numcore.CrossEntropyHead(int(rng.integers(sizes[-1])))
            _, grad = numcore.value_and_input_grad(model, x, head)
            fd = numcore.finite_diff_grad(
                lambda z: numcore.value_and_input_grad(model, z, head)[0], x, step=1e-4
            )
            scale = max(np.linalg.norm(grad.wrt_input), np.linalg.norm(fd), 1e-12)
            worst = max(worst, np.linalg.norm(grad.wrt_input - fd) / scale)
        assert worst < 1e-4

    def test_parameter_gradient_matches_finite_differences(self):
        from odskit.models.mlp import flat_parameters, with_flat_parameters

        model = init_mlp([3, 5, 3], seed=7)
        x = np.random.default_rng(1).uniform(size=(6, 3))
        head = numcore.CrossEntropyHead(np.array([0, 1, 2, 0, 1, 2]))
        _, grad = numcore.value_and_grads(model, x, head)
        fd = numcore.finite_diff_grad(
            lambda p: numcore.value_and_grads(with_flat_parameters(model, p), x, head)[0],
            flat_parameters(model),
        )
        assert np.allclose(grad.wrt_params, fd, atol=1e-5)

    def test_linear_model_gradient_closed_form(self):
        w = np.array([[1.0, 2.0], [3.0, -1.0], [0.0, 0.5]])
        model = MlpClassifier(layer_sizes=[3, 2], weights=[w], biases=[np.zeros(2)])
        direction = np.array([0.25, -1.0])
        _, grad = numcore.value_and_input_grad(model, np.ones(3), numcore.LinearHead(direction))
        assert np.allclose(grad.wrt_input, w @ direction)

    def test_batch_rows_have_their_own_gradients(self):
        model = init_mlp([4, 6, 3], seed=3)
        x = np.random.default_rng(2).uniform(size=(2, 4))
        head = numcore.CrossEntropyHead(1)
        _, batch_grad = numcore.value_and_input_grad(model, x, head)
        _, single = numcore.value_and_input_grad(model, x[1], head)
        assert np.allclose(batch_grad.wrt_input[1], single.wrt_input)

    @pytest.mark.parametrize("make_head", [
        lambda rng, classes: numcore.MarginHead(int(rng.integers(classes))),
        lambda rng, classes: numcore.LinearHead(rng.normal(size=classes)),
    ], ids=["margin", "linear"])
    def test_other_heads_match_finite_differences(self, make_head):
        rng = np.random.default_rng(5)
        for trial in range(30):
            sizes = [int(rng.integers(2, 8)), int(rng.integers(2, 10)), int(rng.integers(2, 10)), 4]
            model = init_mlp(sizes, seed=100 + trial)
            head = make_head(rng, sizes[-1])
            x = rng.uniform(0.0, 1.0, size=sizes[0])
            while not _smooth_at(model, x, head):
                x = rng.uniform(0.0, 1.0, size=sizes[0])
            _, grad = numcore.value_and_input_grad(model, x, head)
            fd = numcore.finite_diff_grad(
                lambda z: numcore.value_and_input_grad(model, z, head)[0], x, step=1e-5
            )
            assert np.allclose(grad.wrt_input, fd, atol=1e-6)

    def test_finite_diff_of_sum_of_squares(self):
        grad = numcore.finite_diff_grad(lambda z: float(np.sum(z ** 2)), np.array([1.0, 2.0]))
        assert np.allclose(grad, [2.0, 4.0])

    def test_feature_mismatch(self):
        with pytest.raises(numcore.DimensionError):
            numcore.value_and_input_grad(init_mlp([4, 3]), np.ones(5), numcore.CrossEntropyHead(0))

    def test_finite_diff_rejects_non_positive_step(self):
        with pytest.raises(ValueError):
            numcore.finite_diff_grad(lambda z: float(z.sum()), np.ones(2), step=0.0)
