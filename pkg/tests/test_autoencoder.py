import numpy as np
import pytest

from shapefill import geometry, nn, shapes
from shapefill.autoencoder import AEConfig, Autoencoder, chamfer_loss_grad, train_ae


def tiny_config(**kw):
    defaults = dict(m_points=64, epochs=10, batch_size=4, lr=1e-3)
    defaults.update(kw)
    return AEConfig(**defaults)


def tiny_dataset(n=8, n_points=64, seed=0):
    ss = np.random.SeedSequence(seed).spawn(n)
    cats = [shapes.CATEGORIES[i % 4] for i in range(n)]
    return [shapes.sample_shape(c, n_points, s).astype(np.float32) for c, s in zip(cats, ss)]


class TestEncode:
    def test_permutation_invariance_exact(self):
        ae = Autoencoder(tiny_config(), seed=1)
        rng = np.random.default_rng(2)
        pts = rng.uniform(-0.5, 0.5, size=(100, 3)).astype(np.float32)
        base = ae.encode(pts)
        for _ in range(10):
            assert np.array_equal(ae.encode(pts[rng.permutation(100)]), base)

    def test_gfv_shape_and_finiteness(self):
        ae = Autoencoder(tiny_config(), seed=1)
        gfv = ae.encode(np.zeros((5, 3), dtype=np.float32))
        assert gfv.shape == (128,)
        assert np.isfinite(gfv).all()

    @pytest.mark.parametrize("ratio", [0.2, 0.3, 0.4, 0.5, 0.7])
    def test_partial_sizes_accepted(self, ratio):
        ae = Autoencoder(tiny_config(), seed=1)
        cloud = shapes.sample_shape("table", 512, seed=3)
        partial = geometry.corrupt_cloud(cloud, ratio, seed=4)
        assert ae.encode(partial).shape == (128,)

    def test_single_point_cloud(self):
        ae = Autoencoder(tiny_config(), seed=1)
        assert ae.encode(np.array([[0.1, 0.2, 0.3]], dtype=np.float32)).shape == (128,)

    def test_empty_cloud_rejected(self):
        ae = Autoencoder(tiny_config(), seed=1)
        with pytest.raises(ValueError):
            ae.encode(np.zeros((0, 3), dtype=np.float32))


class TestDecode:
    def test_output_point_count(self):
        ae = Autoencoder(tiny_config(m_points=48), seed=1)
        out = ae.decode(np.zeros(128, dtype=np.float32))
        assert out.shape == (48, 3)

    def test_zero_gfv_deterministic(self):
        ae = Autoencoder(tiny_config(), seed=1)
        a = ae.decode(np.zeros(128, dtype=np.float32))
        b = ae.decode(np.zeros(128, dtype=np.float32))
        assert np.array_equal(a, b)

    def test_non_finite_rejected(self):
        ae = Autoencoder(tiny_config(), seed=1)
        bad = np.zeros(128, dtype=np.float32)
        bad[3] = np.nan
        with pytest.raises(ValueError):
            ae.decode(bad)

    def test_wrong_dim_rejected(self):
        ae = Autoencoder(tiny_config(), seed=1)
        with pytest.raises(ValueError):
            ae.decode(np.zeros(64, dtype=np.float32))


class TestChamferLossGrad:
    def test_matches_kernel_value(self):
        rng = np.random.default_rng(5)
        a = rng.uniform(-0.5, 0.5, size=(30, 3))
        b = rng.uniform(-0.5, 0.5, size=(20, 3))
        loss, _ = chamfer_loss_grad(a, b)
        assert loss == pytest.approx(geometry.chamfer_distance(a, b), rel=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        inp = rng.uniform(-0.5, 0.5, size=(12, 3))
        out = rng.uniform(-0.5, 0.5, size=(9, 3))
        _, grad = chamfer_loss_grad(inp, out)
        h = 1e-6
        for idx in np.ndindex(out.shape):
            orig = out[idx]
            out[idx] = orig + h
            up, _ = chamfer_loss_grad(inp, out)
            out[idx] = orig - h
            down, _ = chamfer_loss_grad(inp, out)
            out[idx] = orig
            numeric = (up - down) / (2 * h)
            assert abs(grad[idx] - numeric) / max(abs(numeric) + abs(grad[idx]), 1e-8) < 1e-4

    def test_through_decoder_network(self):
        # chain rule: chamfer head on top of the decoder MLP
        rng = np.random.default_rng(7)
        target = rng.uniform(-0.5, 0.5, size=(10, 3))
        net = nn.MLP([8, 16, 30], rng, name="dec")
        x = rng.normal(size=(1, 8))

        def head(y):
            loss, grad = chamfer_loss_grad(target, y.reshape(10, 3))
            return loss, grad.reshape(y.shape)

        report = nn.finite_difference_check(net, x, loss=head)
        assert report["max_rel_error"] < 1e-4

    def test_zero_at_identical_clouds(self):
        pts = np.random.default_rng(8).uniform(size=(15, 3))
        loss, grad = chamfer_loss_grad(pts, pts.copy())
        assert loss == 0.0
        assert np.array_equal(grad, np.zeros_like(grad))


class TestTraining:
    def test_loss_decreases(self):
        data = tiny_dataset()
        ae, history = train_ae(data, tiny_config(epochs=15), seed=11)
        assert history[-1] < history[0]

    def test_bit_identical_histories(self):
        data = tiny_dataset()
        _, h1 = train_ae(data, tiny_config(epochs=5), seed=12)
        _, h2 = train_ae(data, tiny_config(epochs=5), seed=12)
        assert h1 == h2

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train_ae([], tiny_config(), seed=0)

    def test_single_shape_overfit(self):
        cloud = shapes.sample_shape("table", 64, seed=13).astype(np.float32)
        ae, history = train_ae([cloud], tiny_config(epochs=400, batch_size=1, lr=2e-3), seed=13)
        rec = ae.reconstruct(cloud)
        assert geometry.chamfer_normalized(cloud, rec) < 1e-3

    def test_state_round_trip(self):
        data = tiny_dataset(n=4)
        ae, _ = train_ae(data, tiny_config(epochs=2), seed=14)
        clone = Autoencoder(tiny_config(), seed=999).load_state(ae.state())
        pts = data[0]
        assert np.array_equal(ae.encode(pts), clone.encode(pts))
        assert np.array_equal(ae.reconstruct(pts), clone.reconstruct(pts))
