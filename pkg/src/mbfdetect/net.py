"""A small feed-forward classifier built on numpy: 2-D valid convolutions,
dense layers, ReLU, softmax. Exists to produce per-layer responses and exact
input gradients at desk scale; it is deliberately free of pooling, padding,
and normalization layers.

Forward and gradient evaluation are pure functions of (config, params, x),
so batch items can be processed concurrently; training mutates a private
copy of the parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mbfdetect._rng import spawn_rng

__all__ = [
    "NetConfig",
    "TinyNet",
    "TrainResult",
    "desk_config",
    "init_params",
    "forward_batch",
    "forward_with_responses",
    "train_net",
    "gradient_input",
]


@dataclass(frozen=True)
class NetConfig:
    """Layer specs: ("conv", out_channels, kernel, stride) or ("dense", width).

    ReLU follows every layer except the last dense layer, which feeds the
    softmax. capture names the responses recorded by forward_with_responses:
    "reluN" for hidden post-activations, "logits", and "softmax".
    """

    input_shape: tuple
    layers: tuple
    capture: tuple = ()

    def __post_init__(self):
        if len(self.layers) < 2:
            raise ValueError("need at least one hidden layer plus the output layer")
        if self.layers[-1][0] != "dense":
            raise ValueError("final layer must be dense (softmax head)")
        shape = tuple(self.input_shape)
        for spec in self.layers:
            shape = _layer_output_shape(spec, shape)
        if not self.capture:
            names = [f"relu{i + 1}" for i in range(len(self.layers) - 1)]
            object.__setattr__(self, "capture", tuple(names + ["logits", "softmax"]))
        valid = {f"relu{i + 1}" for i in range(len(self.layers) - 1)} | {"logits", "softmax"}
        unknown = set(self.capture) - valid
        if unknown:
            raise ValueError(f"unknown capture names: {sorted(unknown)}")

    @property
    def class_count(self) -> int:
        return self.layers[-1][1]


def _layer_output_shape(spec, shape):
    kind = spec[0]
    if kind == "conv":
        _, out_ch, k, stride = spec
        if len(shape) != 3:
            raise ValueError(f"conv layer needs a (C, H, W) input, got {shape}")
        c, h, w = shape
        if h < k or w < k:
            raise ValueError(f"kernel {k} larger than input {shape}")
        return (out_ch, (h - k) // stride + 1, (w - k) // stride + 1)
    if kind == "dense":
        return (spec[1],)
    raise ValueError(f"unknown layer kind {kind!r}")


def desk_config(class_count: int = 10) -> NetConfig:
    """Default 8x8 grayscale architecture; five captured responses."""
    return NetConfig(
        input_shape=(1, 8, 8),
        layers=(("conv", 8, 3, 1), ("conv", 16, 3, 1),
                ("dense", 32), ("dense", class_count)),
    )


def init_params(config: NetConfig, seed: int) -> tuple:
    """Fan-in-scaled uniform weights, zero biases."""
    rng = spawn_rng(seed, 0xB00)
    params = []
    shape = tuple(config.input_shape)
    for spec in config.layers:
        if spec[0] == "conv":
            _, out_ch, k, _ = spec
            in_ch = shape[0]
            fan_in = in_ch * k * k
            bound = 1.0 / math.sqrt(fan_in)
            w = rng.uniform(-bound, bound, (out_ch, in_ch, k, k))
            b = np.zeros(out_ch)
        else:
            in_dim = int(np.prod(shape))
            bound = 1.0 / math.sqrt(in_dim)
            w = rng.uniform(-bound, bound, (in_dim, spec[1]))
            b = np.zeros(spec[1])
        params.append((w, b))
        shape = _layer_output_shape(spec, shape)
    return tuple(params)


@dataclass(frozen=True)
class TinyNet:
    config: NetConfig
    params: tuple

    def __post_init__(self):
        if len(self.params) != len(self.config.layers):
            raise ValueError("parameter count does not match layer specs")
        for (w, b) in self.params:
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("parameters must be finite")


def _im2col(x, k, stride):
    n, c, h, w = x.shape
    out_h = (h - k) // stride + 1
    out_w = (w - k) // stride + 1
    i0 = np.repeat(np.arange(k), k)
    j0 = np.tile(np.arange(k), k)
    i = i0[:, None] + stride * np.repeat(np.arange(out_h), out_w)[None, :]
    j = j0[:, None] + stride * np.tile(np.arange(out_w), out_h)[None, :]
    cols = x[:, :, i, j]  # (n, c, k*k, out_h*out_w)
    return cols.transpose(0, 3, 1, 2).reshape(n * out_h * out_w, c * k * k), out_h, out_w


def _conv_forward(x, w, b, stride):
    out_ch, in_ch, k, _ = w.shape
    cols, out_h, out_w = _im2col(x, k, stride)
    out = cols @ w.reshape(out_ch, -1).T + b
    out = out.reshape(x.shape[0], out_h * out_w, out_ch).transpose(0, 2, 1)
    return out.reshape(x.shape[0], out_ch, out_h, out_w), cols


def _conv_backward(dout, x_shape, cols, w, stride):
    n, _, h, wd = x_shape
    out_ch, in_ch, k, _ = w.shape
    _, _, out_h, out_w = dout.shape
    dflat = dout.transpose(0, 2, 3, 1).reshape(-1, out_ch)  # (n*oh*ow, out_ch)
    dw = (dflat.T @ cols).reshape(w.shape)
    db = dflat.sum(axis=0)
    dcols = dflat @ w.reshape(out_ch, -1)  # (n*oh*ow, c*k*k)
    dcols = dcols.reshape(n, out_h * out_w, in_ch, k * k).transpose(0, 2, 3, 1)
    dx = np.zeros(x_shape)
    for p in range(k * k):
        di, dj = divmod(p, k)
        patch = dcols[:, :, p, :].reshape(n, in_ch, out_h, out_w)
        dx[:, :, di:di + stride * out_h:stride, dj:dj + stride * out_w:stride] += patch
    return dx, dw, db


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward(net: TinyNet, x: np.ndarray):
    """Batched forward returning (logits, caches) for backprop."""
    caches = []
    h = x
    last = len(net.config.layers) - 1
    for idx, (spec, (w, b)) in enumerate(zip(net.config.layers, net.params)):
        if spec[0] == "conv":
            out, cols = _conv_forward(h, w, b, spec[3])
            cache = {"kind": "conv", "x_shape": h.shape, "cols": cols, "w": w,
                     "stride": spec[3]}
        else:
            flat = h.reshape(h.shape[0], -1)
            out = flat @ w + b
            cache = {"kind": "dense", "x_shape": h.shape, "flat": flat, "w": w}
        if idx < last:
            cache["pre"] = out
            out = np.maximum(out, 0.0)
        caches.append(cache)
        h = out
    return h, caches


def _backward(net: TinyNet, caches, dlogits):
    """Propagate dL/dlogits back to (param grads, dL/dx)."""
    grads = [None] * len(net.params)
    d = dlogits
    last = len(net.config.layers) - 1
    for idx in range(last, -1, -1):
        cache = caches[idx]
        if idx < last:
            d = d * (cache["pre"] > 0)
        if cache["kind"] == "dense":
            flat = cache["flat"]
            dw = flat.T @ d
            db = d.sum(axis=0)
            d = (d @ cache["w"].T).reshape(cache["x_shape"])
        else:
            d, dw, db = _conv_backward(d, cache["x_shape"], cache["cols"],
                                       cache["w"], cache["stride"])
        grads[idx] = (dw, db)
    return grads, d


def _as_batch(config: NetConfig, x):
    arr = np.asarray(x, dtype=np.float64)
    single = arr.shape == tuple(config.input_shape)
    if single:
        arr = arr[None, ...]
    if arr.shape[1:] != tuple(config.input_shape):
        raise ValueError(
            f"input shape {arr.shape[1:]} does not match {tuple(config.input_shape)}")
    return arr, single


def forward_batch(net: TinyNet, x):
    """Posteriors and captured responses for a batch.

    Returns (posteriors (N, K), captures: list over the config's capture list
    of (N, M_l) arrays, flattened per layer).
    """
    arr, _ = _as_batch(net.config, x)
    logits, caches = _forward(net, arr)
    post = _softmax(logits)
    responses = {"logits": logits, "softmax": post}
    last = len(net.config.layers) - 1
    for idx in range(last):
        pre = caches[idx]["pre"]
        responses[f"relu{idx + 1}"] = np.maximum(pre, 0.0).reshape(arr.shape[0], -1)
    captures = [responses[name].reshape(arr.shape[0], -1) for name in net.config.capture]
    return post, captures


def forward_with_responses(net: TinyNet, x):
    """Single-sample forward: (posterior vector, list of flattened responses)."""
    arr, single = _as_batch(net.config, x)
    if not single and arr.shape[0] != 1:
        raise ValueError("forward_with_responses takes one sample; use forward_batch")
    post, captures = forward_batch(net, arr)
    return post[0], [c[0] for c in captures]


def predict(net: TinyNet, x) -> np.ndarray:
    post, _ = forward_batch(net, x)
    return np.argmax(post, axis=1)


def gradient_input(net: TinyNet, x, target_class, loss: str = "cross_entropy"):
    """Exact dloss/dx for one sample or a batch.

    loss "cross_entropy" is -log softmax_target; "logit_diff" is
    z_target - max_{k != target} z_k (the margin the attacks drive negative).
    """
    arr, single = _as_batch(net.config, x)
    y = np.atleast_1d(np.asarray(target_class, dtype=int))
    if y.size != arr.shape[0]:
        raise ValueError("target_class must align with the batch")
    k = net.config.class_count
    if np.any((y < 0) | (y >= k)):
        raise ValueError("target class out of range")
    logits, caches = _forward(net, arr)
    rows = np.arange(arr.shape[0])
    if loss == "cross_entropy":
        dlogits = _softmax(logits)
        dlogits[rows, y] -= 1.0
    elif loss == "logit_diff":
        masked = logits.copy()
        masked[rows, y] = -np.inf
        runner_up = np.argmax(masked, axis=1)
        dlogits = np.zeros_like(logits)
        dlogits[rows, y] = 1.0
        dlogits[rows, runner_up] -= 1.0
    else:
        raise ValueError(f"unknown loss {loss!r}")
    _, dx = _backward(net, caches, dlogits)
    return dx[0] if single else dx


@dataclass(frozen=True)
class TrainResult:
    net: TinyNet
    epoch_losses: tuple
    train_accuracy: float


def train_net(dataset, config: NetConfig, epochs: int, lr: float, seed: int,
              batch_size: int = 32, noise_sigma: float = 0.0,
              label_smoothing: float = 0.0, step_lr: bool = False) -> TrainResult:
    """Minibatch SGD on the softmax cross-entropy.

    noise_sigma > 0 adds seeded Gaussian noise to each training batch, a
    cheap robustness augmentation for the downstream eligibility filters.
    label_smoothing spreads that fraction of the target mass uniformly,
    keeping confidences moderate; step_lr decays the rate by 0.3 at 60% and
    again at 85% of the epochs.

    Args:
        dataset: (images, labels) with images matching config.input_shape.
        epochs, lr: the base schedule.
        seed: drives init, shuffling, and augmentation noise.
    """
    images, labels = dataset
    x = np.asarray(images, dtype=np.float64)
    y = np.asarray(labels, dtype=int)
    if x.shape[0] == 0:
        raise ValueError("empty dataset")
    if x.shape[0] != y.shape[0]:
        raise ValueError("images and labels are misaligned")
    if np.any((y < 0) | (y >= config.class_count)):
        raise ValueError("label out of range")
    if not 0.0 <= label_smoothing < 1.0:
        raise ValueError("label_smoothing must be in [0, 1)")

    k = config.class_count
    params = [(w.copy(), b.copy()) for (w, b) in init_params(config, seed)]
    rng = spawn_rng(seed, 0x7124)
    n = x.shape[0]
    epoch_losses = []
    for epoch in range(epochs):
        rate = lr
        if step_lr:
            rate *= 0.3 if epoch >= epochs * 0.6 else 1.0
            rate *= 0.3 if epoch >= epochs * 0.85 else 1.0
        order = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb = x[idx]
            if noise_sigma > 0:
                xb = xb + rng.normal(0.0, noise_sigma, xb.shape)
            yb = y[idx]
            net = TinyNet(config, tuple((w, b) for (w, b) in params))
            logits, caches = _forward(net, xb)
            post = _softmax(logits)
            eps = 1e-12
            total_loss += float(-np.log(post[np.arange(len(idx)), yb] + eps).sum())
            target = np.full((len(idx), k), label_smoothing / k)
            target[np.arange(len(idx)), yb] += 1.0 - label_smoothing
            dlogits = (post - target) / len(idx)
            grads, _ = _backward(net, caches, dlogits)
            if rate != 0.0:
                for p, (dw, db) in zip(params, grads):
                    p[0][...] -= rate * dw
                    p[1][...] -= rate * db
        epoch_losses.append(total_loss / n)

    net = TinyNet(config, tuple((w.copy(), b.copy()) for (w, b) in params))
    accuracy = float(np.mean(predict(net, x) == y))
    return TrainResult(net=net, epoch_losses=tuple(epoch_losses), train_accuracy=accuracy)
