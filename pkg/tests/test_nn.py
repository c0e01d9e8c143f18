import numpy as np
import pytest

from shapefill import nn


def rng():
    return np.random.default_rng(0)


class TestLayers:
    def test_relu(self):
        layer = nn.ReLU()
        out = layer.forward(np.array([-1.0, 0.0, 2.0], dtype=np.float32))
        assert np.array_equal(out, [0.0, 0.0, 2.0])

    def test_relu_backward_at_negative(self):
        layer = nn.ReLU()
        layer.forward(np.array([-1.0], dtype=np.float32))
        assert layer.backward(np.array([5.0], dtype=np.float32))[0] == 0.0

    def test_tanh_zero(self):
        layer = nn.Tanh()
        assert layer.forward(np.array([0.0]))[0] == 0.0

    def test_max_pool_rows(self):
        pool = nn.MaxPoolPoints()
        out = pool.forward(np.array([[1.0, 5.0], [3.0, 2.0]]))
        assert np.array_equal(out, [3.0, 5.0])

    def test_max_pool_permutation_invariant(self):
        r = rng()
        x = r.normal(size=(64, 16)).astype(np.float32)
        pool = nn.MaxPoolPoints()
        base = pool.forward(x)
        for _ in range(20):
            perm = r.permutation(64)
            assert np.array_equal(pool.forward(x[perm]), base)

    def test_max_pool_backward_ties_to_lowest_index(self):
        pool = nn.MaxPoolPoints()
        x = np.array([[2.0, 1.0], [2.0, 3.0], [0.0, 3.0]])
        pool.forward(x)
        dx = pool.backward(np.array([1.0, 1.0]))
        # col 0 ties rows 0/1 -> row 0; col 1 ties rows 1/2 -> row 1
        assert np.array_equal(dx, [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])

    def test_dense_shape_error_names_both_shapes(self):
        layer = nn.Dense(4, 2, rng(), name="enc.fc0")
        with pytest.raises(ValueError, match=r"enc\.fc0.*\(3, 5\).*\(4, 2\)"):
            layer.forward(np.zeros((3, 5), dtype=np.float32))

    def test_dense_input_grad_is_column_sums(self):
        # loss = sum(output)  =>  dL/dx = row sums of W^T = column... rows of W summed over outputs
        layer = nn.Dense(3, 4, rng(), name="d")
        x = np.ones((1, 3), dtype=np.float32)
        y = layer.forward(x)
        dx = layer.backward(np.ones_like(y))
        assert np.allclose(dx, layer.w.values.sum(axis=1))

    def test_dense_broadcasts_over_points(self):
        # pointwise conv: same result row by row
        layer = nn.Dense(3, 5, rng(), name="pw")
        x = rng().normal(size=(2, 7, 3)).astype(np.float32)
        batched = layer.forward(x)
        single = np.stack([layer.forward(x[i]) for i in range(2)])
        assert np.allclose(batched, single)

    def test_float32_preserved(self):
        net = nn.MLP([3, 8, 2], rng(), name="n")
        y = net.forward(np.zeros((4, 3), dtype=np.float32))
        assert y.dtype == np.float32


class TestAdam:
    def test_zero_gradient_is_noop(self):
        net = nn.MLP([2, 3, 1], rng(), name="n")
        before = [p.values.copy() for p in net.params()]
        opt = nn.Adam(net.params(), lr=0.1)
        net.zero_grad()
        opt.step()
        for p, b in zip(net.params(), before):
            assert np.array_equal(p.values, b)

    def test_first_step_closed_form(self):
        p = nn.Param("w", np.array([1.0], dtype=np.float64))
        p.grad[...] = 1.0
        opt = nn.Adam([p], lr=1e-4)
        opt.step()
        # bias-corrected mhat/sqrt(vhat) = 1 -> delta = -lr/(1+eps)
        assert p.values[0] == pytest.approx(1.0 - 1e-4, rel=1e-6)

    def test_beta_zero_is_sign_sgd(self):
        p = nn.Param("w", np.zeros(3, dtype=np.float64))
        p.grad[...] = np.array([2.5, -0.3, 0.0])
        opt = nn.Adam([p], lr=0.01, beta1=0.0, beta2=0.0)
        opt.step()
        assert np.allclose(p.values, [-0.01, 0.01, 0.0], atol=1e-6)

    def test_step_count_increments(self):
        p = nn.Param("w", np.zeros(1))
        opt = nn.Adam([p])
        opt.step()
        opt.step()
        assert opt.t == 2


class TestGradCheck:
    def test_dense_tanh_stack(self):
        net = nn.MLP([5, 8, 8, 2], rng(), hidden="tanh", name="n")
        x = rng().normal(size=(4, 5))
        report = nn.finite_difference_check(net, x)
        assert report["max_rel_error"] < 1e-4

    def test_relu_stack(self):
        net = nn.MLP([6, 16, 8, 3], rng(), hidden="relu", name="n")
        x = rng().normal(size=(5, 6)) + 0.1
        report = nn.finite_difference_check(net, x)
        assert report["max_rel_error"] < 1e-4

    def test_pointnet_style_stack(self):
        class PointStack:
            def __init__(self):
                self.mlp = nn.MLP([3, 8, 6], rng(), hidden="relu", output="relu", name="pp")
                self.pool = nn.MaxPoolPoints()
                self.head = nn.MLP([6, 4], rng(), name="head")

            def forward(self, x):
                return self.head.forward(self.pool.forward(self.mlp.forward(x)))

            def backward(self, dy):
                return self.mlp.backward(self.pool.backward(self.head.backward(dy)))

            def params(self):
                return self.mlp.params() + self.head.params()

            def zero_grad(self):
                for p in self.params():
                    p.grad[...] = 0

            def astype(self, dtype):
                out = PointStack()
                out.mlp = self.mlp.astype(dtype)
                out.pool = nn.MaxPoolPoints()
                out.head = self.head.astype(dtype)
                return out

        net = PointStack()
        x = rng().normal(size=(12, 3))
        report = nn.finite_difference_check(net, x)
        assert report["max_rel_error"] < 1e-4

    def test_identity_network_near_exact(self):
        net = nn.MLP([3, 3], rng(), name="id")
        net.layers[0].w.values[...] = np.eye(3, dtype=np.float32)
        net.layers[0].b.values[...] = 0.0
        x = np.array([[0.5, -0.25, 1.0]])
        report = nn.finite_difference_check(net, x)
        assert report["max_rel_error"] < 1e-9

    def test_corrupted_backward_detected(self):
        class BrokenDense(nn.Dense):
            def backward(self, dy):
                dx = super().backward(dy)
                self.w.grad *= 1.5  # deliberate fault
                return dx

        net = nn.MLP([4, 6, 2], rng(), name="bad")
        net.layers[0].__class__ = BrokenDense  # survives the float64 clone
        report = nn.finite_difference_check(net, rng().normal(size=(3, 4)))
        assert report["max_rel_error"] > 1e-2

    def test_subsampled_check(self):
        net = nn.MLP([10, 32, 4], rng(), name="n")
        report = nn.finite_difference_check(net, rng().normal(size=(2, 10)), max_checks=20)
        assert report["n_checked"] <= 20 * 5
        assert report["max_rel_error"] < 1e-4


class TestMLP:
    def test_freeze_blocks_backward(self):
        net = nn.MLP([2, 2], rng(), name="f").freeze()
        net.forward(np.zeros((1, 2), dtype=np.float32))
        with pytest.raises(RuntimeError, match="frozen"):
            net.backward(np.ones((1, 2), dtype=np.float32))

    def test_state_round_trip(self):
        net = nn.MLP([3, 4, 2], rng(), name="a")
        other = nn.MLP([3, 4, 2], np.random.default_rng(99), name="a")
        other.load_state(net.state())
        x = rng().normal(size=(2, 3)).astype(np.float32)
        assert np.array_equal(net.forward(x), other.forward(x))

    def test_load_state_shape_mismatch(self):
        net = nn.MLP([3, 4], rng(), name="a")
        bad = {k: np.zeros((9, 9), dtype=np.float32) for k in net.state()}
        with pytest.raises(ValueError, match="shape mismatch"):
            net.load_state(bad)
