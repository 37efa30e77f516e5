import numpy as np
import pytest

from aerorom import cnn
from aerorom.cnn.model import (
    flatten_length,
    param_count_arch,
)
from aerorom.errors import DimensionError, UsageError, ValidationError

BOUNDS = ((-1.0, 3.0), (0.0, 2.0), (-0.5, 0.5))
rng = np.random.default_rng(11)


def tiny_model(dims=(7, 6, 8), deltas=(3, 2), channels=(3, 4), seed=0, dtype=np.float64):
    return cnn.init_model(dims, BOUNDS, "CL", deltas=deltas, channels=channels,
                          seed=seed, dtype=dtype)


def grad_check(model, x, t, h=1e-4, rel_tol=1e-5, floor=1e-6):
    """Central finite differences against the analytic gradients."""
    pred, cache = cnn.forward(model, x, training=True)
    resid = cache.pred_norm.astype(np.float64) - t
    grads = cnn.backward(model, cache, resid / len(t))
    arrays = grads.arrays()
    arrays.append(np.array([grads.fc_bias]))

    def loss():
        _, c = cnn.forward(model, x, training=True)
        r = c.pred_norm.astype(np.float64) - t
        return 0.5 * np.mean(r**2)

    params = []
    for l in model.layers:
        params += [l.weights, l.bias]
    params.append(model.fc_weights)
    worst = 0.0
    local = np.random.default_rng(1)
    for p, g in zip(params, arrays):
        fp, fg = p.ravel(), g.ravel()
        for i in local.choice(fp.size, size=min(15, fp.size), replace=False):
            old = fp[i]
            fp[i] = old + h
            lp = loss()
            fp[i] = old - h
            lm = loss()
            fp[i] = old
            fd = (lp - lm) / (2 * h)
            rel = abs(fd - fg[i]) / max(abs(fd), abs(fg[i]), floor)
            worst = max(worst, rel)
    # fully connected bias
    old = model.fc_bias
    model.fc_bias = old + h
    lp = loss()
    model.fc_bias = old - h
    lm = loss()
    model.fc_bias = old
    fd = (lp - lm) / (2 * h)
    rel = abs(fd - arrays[-1][0]) / max(abs(fd), abs(arrays[-1][0]), floor)
    worst = max(worst, rel)
    assert worst < rel_tol, f"worst relative gradient error {worst:.3e}"
    return worst


class TestArchitecture:
    def test_param_count_table_row(self):
        assert param_count_arch((48, 16, 32)) == 139_451

    def test_param_count_breakdown(self):
        # conv stack 13,870 plus fully connected 125,581
        convs = 4**3 * 1 * 5 + 5 + 27 * 5 * 10 + 10 + 27 * 10 * 15 + 15 + 27 * 15 * 20 + 20
        assert convs == 13_870
        assert flatten_length((48, 16, 32)) == 39 * 7 * 23 * 20 == 125_580
        assert param_count_arch((48, 16, 32)) == convs + 125_580 + 1

    def test_single_1x1_layer(self):
        assert param_count_arch((1, 1, 1), deltas=(1,), channels=(1,)) == 2 + 1 + 1
        # one weight + one bias for the conv, one weight + bias for the head

    def test_count_independent_of_values(self):
        a = tiny_model(seed=0)
        b = tiny_model(seed=99)
        assert cnn.param_count(a) == cnn.param_count(b)

    def test_block_dims_default(self):
        m = cnn.init_model((48, 16, 32), BOUNDS, "CL")
        assert m.block_dims() == [(45, 13, 29), (43, 11, 27), (41, 9, 25), (39, 7, 23)]


class TestForward:
    def test_zero_network_predicts_zero(self):
        m = tiny_model()
        for l in m.layers:
            l.weights[:] = 0.0
            l.bias[:] = 0.0
        m.fc_weights[:] = 0.0
        m.fc_bias = 0.0
        m.norm_mean, m.norm_std = 0.0, 1.0
        x = rng.standard_normal((3, 7, 6, 8))
        y, _ = cnn.forward(m, x)
        np.testing.assert_allclose(y, 0.0, atol=1e-12)

    def test_batch_equals_singles_in_inference(self):
        m = tiny_model()
        # push some running statistics through
        xb = rng.standard_normal((6, 7, 6, 8))
        cnn.forward(m, xb, training=True)
        y_batch, _ = cnn.forward(m, xb, training=False)
        y_single = np.array(
            [cnn.forward(m, xb[i][None], training=False)[0][0] for i in range(6)]
        )
        np.testing.assert_allclose(y_batch, y_single, rtol=1e-12, atol=1e-12)

    def test_dim_mismatch_names_layer(self):
        m = tiny_model(dims=(7, 6, 8))
        with pytest.raises(DimensionError):
            cnn.forward(m, rng.standard_normal((2, 5, 5, 5)))

    def test_denormalization(self):
        m = tiny_model()
        m.norm_mean, m.norm_std = 2.0, 3.0
        x = rng.standard_normal((2, 7, 6, 8))
        _, cache = cnn.forward(m, x, training=True)
        y, _ = cnn.forward(m, x, training=False)
        # training and inference share the de-normalization contract
        yt, cache2 = cnn.forward(m, x, training=True)
        np.testing.assert_allclose(
            yt, cache2.pred_norm * 3.0 + 2.0, rtol=1e-12
        )

    def test_training_needs_two_samples(self):
        m = tiny_model()
        with pytest.raises(ValidationError):
            cnn.forward(m, rng.standard_normal((1, 7, 6, 8)), training=True)


class TestBackward:
    def test_requires_cache(self):
        m = tiny_model()
        with pytest.raises(UsageError):
            cnn.backward(m, None, np.zeros(2))

    def test_zero_error_gives_zero_grads(self):
        m = tiny_model()
        x = rng.standard_normal((4, 7, 6, 8))
        _, cache = cnn.forward(m, x, training=True)
        g = cnn.backward(m, cache, np.zeros(4))
        for gw, gb in g.conv:
            assert np.all(gw == 0.0) and np.all(gb == 0.0)
        assert np.all(g.fc_weights == 0.0) and g.fc_bias == 0.0

    def test_duplicated_batch_same_mean_gradients(self):
        m = tiny_model()
        x = rng.standard_normal((3, 7, 6, 8))
        t = rng.standard_normal(3)
        _, c1 = cnn.forward(m, x, training=True)
        g1 = cnn.backward(m, c1, (c1.pred_norm - t) / 3)
        x2 = np.concatenate([x, x])
        t2 = np.concatenate([t, t])
        _, c2 = cnn.forward(m, x2, training=True)
        g2 = cnn.backward(m, c2, (c2.pred_norm - t2) / 6)
        np.testing.assert_allclose(g1.fc_weights, g2.fc_weights, atol=1e-10)
        for (a, ab), (b, bb) in zip(g1.conv, g2.conv):
            np.testing.assert_allclose(a, b, atol=1e-10)

    def test_gradients_match_finite_differences(self):
        m = tiny_model()
        x = rng.standard_normal((5, 7, 6, 8))
        t = rng.standard_normal(5)
        grad_check(m, x, t)

    def test_gradcheck_five_random_models(self):
        shapes = [
            ((6, 5, 6), (3, 2), (2, 3)),
            ((8, 6, 8), (3, 3), (3, 4)),
            ((7, 5, 7), (2, 2), (4, 2)),
            ((6, 6, 6), (3, 2), (2, 2)),
            ((8, 5, 6), (2, 3), (3, 3)),
        ]
        for k, (dims, deltas, channels) in enumerate(shapes):
            m = cnn.init_model(dims, BOUNDS, "CL", deltas=deltas,
                               channels=channels, seed=k)
            local = np.random.default_rng(k)
            x = local.standard_normal((4, *dims))
            t = local.standard_normal(4)
            grad_check(m, x, t)


class TestFeatureMaps:
    def test_kernel_counts_and_dims(self):
        m = cnn.init_model((48, 16, 32), BOUNDS, "CL")
        assert m.channels == (5, 10, 15, 20)
        field = rng.standard_normal((48, 16, 32))
        fm = cnn.feature_maps(m, field, 0, 2)
        assert fm.shape == (45, 13, 29)
        fm3 = cnn.feature_maps(m, field, 2, 14)
        assert fm3.shape == (41, 9, 25)

    def test_index_validation(self):
        m = tiny_model()
        field = rng.standard_normal((7, 6, 8))
        with pytest.raises(ValidationError):
            cnn.feature_maps(m, field, 5, 0)
        with pytest.raises(ValidationError):
            cnn.feature_maps(m, field, 0, 99)

    def test_zero_input_constant_maps(self):
        m = tiny_model()
        field = np.zeros((7, 6, 8))
        fm = cnn.feature_maps(m, field, 0, 1)
        # conv of zeros gives the bias, then fixed statistics and the
        # activation produce one constant per channel
        assert np.ptp(fm) < 1e-12


class TestCheckpoint:
    @pytest.mark.parametrize("dtype", [np.float64, np.float32])
    def test_roundtrip_bit_identical_predictions(self, tmp_path, dtype):
        m = tiny_model(dtype=dtype)
        x = rng.standard_normal((5, 7, 6, 8))
        cnn.forward(m, x, training=True)  # nontrivial running stats
        m.norm_mean, m.norm_std = 0.4, 0.02
        y0, _ = cnn.forward(m, x, training=False)
        path = tmp_path / "m.ckpt"
        cnn.save_checkpoint(m, path, train_config={"initial_lr": 1e-3})
        m2, header = cnn.load_checkpoint(path)
        y1, _ = cnn.forward(m2, x, training=False)
        assert np.array_equal(y0, y1)
        assert header["train_config"]["initial_lr"] == 1e-3
        assert m2.dtype == m.dtype
        assert m2.target_label == "CL"
        assert m2.input_bounds == m.input_bounds

    def test_rejects_garbage(self, tmp_path):
        p = tmp_path / "bad.ckpt"
        p.write_bytes(b"what is this")
        from aerorom.errors import DataError

        with pytest.raises(DataError):
            cnn.load_checkpoint(p)
