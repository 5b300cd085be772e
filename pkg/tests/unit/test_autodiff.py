"""
Unit tests for the differentiation engine and its gradient checker.
"""

import numpy as np
import pytest

from src.autodiff import (
    ComputationRecord, Tensor, backward, compare_gradients, finite_difference_gradient,
    kl_divergence, log_softmax, ops, parameter, relative_error, softmax,
)
from src.autodiff.ops import MASK_LOGIT
from src.utils.errors import LocovError


pytestmark = pytest.mark.unit


class TestBackward:
    """Reverse-mode accumulation."""

    def test_square_sum(self):
        """d/dx sum(x * x) is 2x."""
        x = parameter(np.array([1.0, -2.0, 3.0]))
        backward(ops.sum(x * x))
        np.testing.assert_allclose(x.grad, [2.0, -4.0, 6.0])

    def test_reused_input_accumulates(self):
        """A leaf used twice receives both contributions."""
        x = parameter(np.array(2.0))
        backward(x * x + x)
        assert x.grad == pytest.approx(5.0)

    def test_constant_inputs_get_no_gradient(self):
        """Untracked tensors are left alone."""
        x = parameter(np.ones(3))
        c = Tensor(np.arange(3.0))
        backward(ops.sum(x * c))
        assert c.grad is None
        np.testing.assert_allclose(x.grad, [0.0, 1.0, 2.0])

    def test_non_scalar_root(self):
        """Only scalars can be differentiated."""
        x = parameter(np.ones(3))
        with pytest.raises(LocovError) as exc_info:
            backward(x * 2.0)
        assert exc_info.value.code == "non-scalar-root"

    def test_record_is_topological(self):
        """Every recorded primitive appears after its tracked inputs."""
        x = parameter(np.ones((2, 2)))
        y = ops.tanh(x @ x)
        root = ops.sum(y)
        record = ComputationRecord.trace(root)
        position = {node.node_id: i for i, node in enumerate(record.nodes)}
        for entry in record.entries:
            for parent in entry.inputs:
                if parent in position:
                    assert position[parent] < position[entry.output]
        assert record.nodes[-1] is root


class TestOps:
    """Forward values of the primitives."""

    def test_softmax_normalises(self, rng):
        """Rows sum to one and survive large logits."""
        logits = rng.normal(size=(4, 5)) * 100
        probs = softmax(logits, axis=1).data
        np.testing.assert_allclose(probs.sum(axis=1), np.ones(4))
        assert np.isfinite(probs).all()

    def test_softmax_shift_invariance(self, rng):
        """Adding one constant to every logit changes neither the values nor the argmax."""
        logits = rng.normal(size=(4, 5))
        for shift in (-30.0, 7.5, 250.0):
            np.testing.assert_allclose(softmax(logits + shift, axis=1).data, softmax(logits, axis=1).data, atol=1e-12)
            np.testing.assert_array_equal(softmax(logits + shift, axis=1).data.argmax(axis=1), logits.argmax(axis=1))

    def test_log_softmax_matches_log_of_softmax(self, rng):
        """Both routes agree."""
        logits = rng.normal(size=(3, 6))
        np.testing.assert_allclose(log_softmax(logits).data, np.log(softmax(logits).data), atol=1e-12)

    def test_softmax_of_empty_axis(self):
        """A distribution over nothing is refused."""
        with pytest.raises(LocovError) as exc_info:
            softmax(np.zeros((2, 0)), axis=1)
        assert exc_info.value.code == "empty-distribution"

    def test_masked_positions_get_zero_probability(self):
        """Mask logits vanish after the softmax."""
        logits = ops.masked_fill(Tensor(np.zeros((1, 3))), np.array([[False, True, False]]), MASK_LOGIT)
        np.testing.assert_allclose(softmax(logits).data, [[0.5, 0.0, 0.5]])

    def test_kl_of_identical_distributions(self):
        """KL(p || p) = 0."""
        p = np.array([[0.2, 0.3, 0.5]])
        assert kl_divergence(p, p).data[0] == pytest.approx(0.0, abs=1e-15)

    def test_kl_ignores_zero_mass(self):
        """0 * ln 0 counts as 0 and q is clamped."""
        p = np.array([1.0, 0.0])
        q = np.array([0.5, 0.0])
        assert kl_divergence(p, q).item() == pytest.approx(np.log(2.0))

    def test_batched_matmul_broadcasts(self, rng):
        """(B, 1, R, D) @ (1, C, D, W) gives (B, C, R, W)."""
        a = rng.normal(size=(2, 1, 3, 4))
        b = rng.normal(size=(1, 5, 4, 2))
        assert ops.matmul(Tensor(a), Tensor(b)).shape == (2, 5, 3, 2)

    def test_diagonal_requires_square(self):
        """Diagonal of a non-square matrix is refused."""
        with pytest.raises(LocovError):
            ops.diagonal(Tensor(np.zeros((2, 3))))


class TestGradients:
    """Analytic gradients agree with central differences."""

    @pytest.mark.parametrize("name,build", [
        ("softmax", lambda x: ops.sum(softmax(x, axis=1) * np.arange(12.0).reshape(3, 4))),
        ("log_softmax", lambda x: ops.sum(log_softmax(x, axis=0)[0])),
        ("gelu", lambda x: ops.sum(ops.gelu(x))),
        ("tanh", lambda x: ops.sum(ops.tanh(x) * x)),
        ("logsumexp", lambda x: ops.sum(ops.logsumexp(x, axis=1))),
        ("layer_norm", lambda x: ops.sum(ops.layer_norm(x, np.linspace(0.5, 1.5, 4), np.zeros(4)) * x)),
        ("getitem", lambda x: ops.sum(x[np.array([0, 2]), np.array([1, 3])] * 3.0)),
        ("concat", lambda x: ops.sum(ops.concat([x, x * 2.0], axis=1) * np.arange(24.0).reshape(3, 8))),
    ])
    def test_primitive(self, name, build, rng):
        """Relative error stays below the tolerance."""
        x = parameter(rng.normal(size=(3, 4)), name=name)
        results = compare_gradients(lambda: build(x), {name: x})
        assert results[0].passed, results[0].max_rel_error

    def test_batched_matmul_gradients(self, rng):
        """Broadcast axes are summed back."""
        a = parameter(rng.normal(size=(2, 1, 3, 4)))
        b = parameter(rng.normal(size=(1, 2, 4, 2)))
        results = compare_gradients(lambda: ops.sum(ops.tanh(ops.matmul(a, b))), {"a": a, "b": b})
        assert all(r.passed for r in results)

    def test_kl_gradients(self, rng):
        """Both arguments of the divergence."""
        p_logits = parameter(rng.normal(size=(2, 5)))
        q_logits = parameter(rng.normal(size=(2, 5)))

        def loss():
            return ops.mean(kl_divergence(softmax(p_logits, axis=1), softmax(q_logits, axis=1)))

        results = compare_gradients(loss, {"p": p_logits, "q": q_logits})
        assert all(r.passed for r in results)

    def test_finite_difference_restores_input(self, rng):
        """Perturbations are undone."""
        x = parameter(rng.normal(size=5))
        before = x.data.copy()
        finite_difference_gradient(lambda t: ops.sum(t * t), x)
        np.testing.assert_array_equal(x.data, before)

    def test_corrupted_gradient_is_caught(self, rng):
        """A tampered analytic gradient fails the comparison."""
        x = parameter(rng.normal(size=4))
        results = compare_gradients(lambda: ops.sum(x * x), {"x": x}, corrupt=lambda _name, g: g + 1.0)
        assert not results[0].passed

    def test_relative_error_of_equal_arrays(self):
        """Identical gradients have zero error."""
        g = np.array([1e-3, -2.0, 5.0])
        assert relative_error(g, g.copy()) == 0.0
