"""Forward pass, response capture, input gradients, and training."""

import numpy as np
import pytest

from mbfdetect.data import DESK_STYLE, SHIFTED_STYLE, make_glyph_dataset
from mbfdetect.net import (
    NetConfig,
    TinyNet,
    desk_config,
    forward_batch,
    forward_with_responses,
    gradient_input,
    init_params,
    predict,
    train_net,
)


def random_net(seed, class_count=10):
    config = desk_config(class_count)
    return TinyNet(config, init_params(config, seed))


def loss_value(net, x, y, loss):
    from mbfdetect.net import _forward, _softmax
    logits, _ = _forward(net, x[None, ...])
    if loss == "cross_entropy":
        return -float(np.log(_softmax(logits)[0, y]))
    z = logits[0]
    others = np.delete(z, y)
    return float(z[y] - others.max())


def crosses_relu_kink(net, xp, xm):
    """True when a pre-activation changes sign between the two probe inputs;
    at such coordinates the loss is not differentiable and central
    differences are meaningless."""
    from mbfdetect.net import _forward
    _, cp = _forward(net, xp[None, ...])
    _, cm = _forward(net, xm[None, ...])
    for a, b in zip(cp, cm):
        if "pre" in a and np.any((a["pre"] > 0) != (b["pre"] > 0)):
            return True
    return False


class TestForward:
    def test_zero_net_uniform_posterior(self):
        config = desk_config(10)
        params = tuple((np.zeros_like(w), np.zeros_like(b))
                       for w, b in init_params(config, 0))
        net = TinyNet(config, params)
        post, _ = forward_with_responses(net, np.random.default_rng(0).random((1, 8, 8)))
        np.testing.assert_allclose(post, 0.1, atol=1e-12)

    def test_posterior_normalized_and_positive(self):
        rng = np.random.default_rng(1)
        for seed in range(5):
            net = random_net(seed)
            post, _ = forward_batch(net, rng.random((7, 1, 8, 8)))
            np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-9)
            assert np.all(post > 0)

    def test_capture_count_matches_config(self):
        net = random_net(3)
        assert len(net.config.capture) == 5
        _, captures = forward_with_responses(net, np.zeros((1, 8, 8)))
        assert len(captures) == 5
        # conv1 relu 6*6*8, conv2 relu 4*4*16, dense relu 32, logits 10, softmax 10
        assert [c.size for c in captures] == [288, 256, 32, 10, 10]

    def test_custom_capture_list(self):
        config = NetConfig(input_shape=(1, 8, 8),
                           layers=(("conv", 4, 3, 1), ("dense", 10)),
                           capture=("relu1", "softmax"))
        net = TinyNet(config, init_params(config, 0))
        _, captures = forward_with_responses(net, np.zeros((1, 8, 8)))
        assert len(captures) == 2

    def test_deterministic(self):
        net = random_net(9)
        x = np.random.default_rng(2).random((3, 1, 8, 8))
        a, _ = forward_batch(net, x)
        b, _ = forward_batch(net, x)
        np.testing.assert_array_equal(a, b)

    def test_shape_mismatch_rejected(self):
        net = random_net(0)
        with pytest.raises(ValueError):
            forward_batch(net, np.zeros((2, 1, 6, 6)))

    def test_conv_matches_nested_loops(self):
        rng = np.random.default_rng(5)
        x = rng.normal(0, 1, (2, 3, 6, 6))
        w = rng.normal(0, 1, (4, 3, 3, 3))
        b = rng.normal(0, 1, 4)
        from mbfdetect.net import _conv_forward
        out, _ = _conv_forward(x, w, b, 1)
        ref = np.zeros_like(out)
        for n in range(2):
            for o in range(4):
                for i in range(4):
                    for j in range(4):
                        patch = x[n, :, i:i + 3, j:j + 3]
                        ref[n, o, i, j] = (patch * w[o]).sum() + b[o]
        np.testing.assert_allclose(out, ref, atol=1e-10)


class TestGradients:
    def test_finite_differences_cross_entropy(self):
        rng = np.random.default_rng(11)
        h = 1e-4
        for net_seed in range(10):
            net = random_net(net_seed)
            x = rng.random((1, 8, 8))
            y = int(rng.integers(0, 10))
            grad = gradient_input(net, x, y, loss="cross_entropy")
            flat = grad.ravel()
            usable = np.flatnonzero(np.abs(flat) > 1e-8)
            coords = rng.choice(usable, size=min(20, usable.size), replace=False)
            for c in coords:
                xp = x.copy().ravel()
                xm = x.copy().ravel()
                xp[c] += h
                xm[c] -= h
                xp, xm = xp.reshape(x.shape), xm.reshape(x.shape)
                if crosses_relu_kink(net, xp, xm):
                    continue
                fd = (loss_value(net, xp, y, "cross_entropy")
                      - loss_value(net, xm, y, "cross_entropy")) / (2 * h)
                assert abs(fd - flat[c]) / max(abs(flat[c]), 1e-8) <= 1e-4

    def test_finite_differences_logit_diff(self):
        rng = np.random.default_rng(13)
        h = 1e-4
        net = random_net(21)
        x = rng.random((1, 8, 8))
        y = 3
        grad = gradient_input(net, x, y, loss="logit_diff")
        flat = grad.ravel()
        usable = np.flatnonzero(np.abs(flat) > 1e-8)
        for c in rng.choice(usable, size=20, replace=False):
            xp, xm = x.copy().ravel(), x.copy().ravel()
            xp[c] += h
            xm[c] -= h
            fd = (loss_value(net, xp.reshape(x.shape), y, "logit_diff")
                  - loss_value(net, xm.reshape(x.shape), y, "logit_diff")) / (2 * h)
            assert abs(fd - flat[c]) / max(abs(flat[c]), 1e-8) <= 1e-4

    def test_zero_net_gradient_is_zero(self):
        config = desk_config(10)
        params = tuple((np.zeros_like(w), np.zeros_like(b))
                       for w, b in init_params(config, 0))
        net = TinyNet(config, params)
        grad = gradient_input(net, np.random.default_rng(0).random((1, 8, 8)), 2)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_logit_diff_linear_net(self):
        # identity first layer on positive inputs makes the net linear, so the
        # margin gradient is a difference of final-layer weight columns
        config = NetConfig(input_shape=(4,), layers=(("dense", 4), ("dense", 3)))
        rng = np.random.default_rng(7)
        w2 = rng.normal(0, 1, (4, 3))
        params = ((np.eye(4), np.zeros(4)), (w2, np.zeros(3)))
        net = TinyNet(config, params)
        x = rng.uniform(0.5, 1.5, 4)
        y = 1
        logits = x @ w2
        runner = int(np.argmax(np.delete(logits, y)))
        runner = runner if runner < y else runner + 1
        expected = w2[:, y] - w2[:, runner]
        np.testing.assert_allclose(gradient_input(net, x, y, "logit_diff"),
                                   expected, atol=1e-12)

    def test_invalid_class_rejected(self):
        net = random_net(0)
        with pytest.raises(ValueError):
            gradient_input(net, np.zeros((1, 8, 8)), 10)


BLOB_CONFIG = NetConfig(input_shape=(2,), layers=(("dense", 16), ("dense", 2)))


def blob_dataset(n=200, seed=0):
    rng = np.random.default_rng(seed)
    half = n // 2
    x = np.concatenate([rng.normal((-1.5, 0.0), 0.4, (half, 2)),
                        rng.normal((1.5, 0.0), 0.4, (n - half, 2))])
    y = np.concatenate([np.zeros(half, dtype=int), np.ones(n - half, dtype=int)])
    return x, y


class TestTraining:
    def test_separable_blobs(self):
        result = train_net(blob_dataset(), BLOB_CONFIG, epochs=50, lr=0.1, seed=1)
        assert result.train_accuracy >= 0.99

    def test_zero_lr_leaves_params(self):
        x, y = blob_dataset(64)
        result = train_net((x, y), BLOB_CONFIG, epochs=2, lr=0.0, seed=3)
        for (w, b), (w0, b0) in zip(result.net.params, init_params(BLOB_CONFIG, 3)):
            np.testing.assert_array_equal(w, w0)
            np.testing.assert_array_equal(b, b0)

    def test_loss_finite_and_improving(self):
        result = train_net(blob_dataset(), BLOB_CONFIG, epochs=5, lr=0.1, seed=1)
        losses = np.asarray(result.epoch_losses)
        assert np.all(np.isfinite(losses))
        assert losses[1] <= losses[0]
        assert losses[-1] < losses[0]

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train_net((np.empty((0, 2)), np.empty(0, dtype=int)), BLOB_CONFIG,
                      epochs=1, lr=0.1, seed=0)

    def test_label_range_checked(self):
        x, _ = blob_dataset(10)
        with pytest.raises(ValueError):
            train_net((x, np.full(10, 7)), BLOB_CONFIG, epochs=1, lr=0.1, seed=0)

    def test_deterministic(self):
        a = train_net(blob_dataset(), BLOB_CONFIG, epochs=3, lr=0.1, seed=5)
        b = train_net(blob_dataset(), BLOB_CONFIG, epochs=3, lr=0.1, seed=5)
        for (w1, _), (w2, _) in zip(a.net.params, b.net.params):
            np.testing.assert_array_equal(w1, w2)


class TestGlyphData:
    def test_shapes_and_range(self):
        images, labels = make_glyph_dataset(50, seed=0)
        assert images.shape == (50, 1, 8, 8)
        assert images.min() >= 0.0 and images.max() <= 1.0
        assert set(labels) == set(range(10))

    def test_deterministic(self):
        a, _ = make_glyph_dataset(20, seed=4)
        b, _ = make_glyph_dataset(20, seed=4)
        np.testing.assert_array_equal(a, b)

    def test_styles_differ(self):
        a, _ = make_glyph_dataset(20, seed=4, style=DESK_STYLE)
        b, _ = make_glyph_dataset(20, seed=4, style=SHIFTED_STYLE)
        assert np.abs(a - b).max() > 0.05

    def test_desk_net_learns_glyphs(self):
        images, labels = make_glyph_dataset(600, seed=11)
        result = train_net((images, labels), desk_config(10), epochs=25, lr=0.2, seed=2)
        assert result.train_accuracy >= 0.97

    def test_desk_net_transfers_to_shifted_source(self):
        images, labels = make_glyph_dataset(800, seed=11)
        result = train_net((images, labels), desk_config(10), epochs=30, lr=0.2,
                           seed=2, noise_sigma=0.08)
        shifted, shifted_labels = make_glyph_dataset(300, seed=12, style=SHIFTED_STYLE)
        acc = float(np.mean(predict(result.net, shifted) == shifted_labels))
        assert acc >= 0.85
