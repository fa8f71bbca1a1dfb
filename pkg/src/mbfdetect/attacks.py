"""Gradient-based evasion attacks against the numpy classifier, plus the
Gaussian-noisy twin used to keep the detector honest about benign noise.

All attacks operate on batches, are deterministic given (inputs, config
seed), and re-verify success with an independent forward pass at the end.
Iterative sign-gradient attacks project every step into the L-inf ball and
the valid [0, 1] input range; the L2 attack works in tanh space, so its
iterates respect the range by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from mbfdetect._rng import spawn_rng
from mbfdetect.benford import AttackId
from mbfdetect.net import TinyNet, _backward, _forward, _as_batch, gradient_input, predict

__all__ = [
    "AttackConfig",
    "AttackResult",
    "default_config",
    "fgsm",
    "bim",
    "rpgd",
    "deepfool",
    "cw_l2",
    "gaussian_noisy",
    "run_attack",
]


@dataclass(frozen=True)
class AttackConfig:
    """Hyperparameters for every attack; each method reads only its own fields.

    eps and stepsize are in input-range units (inputs live in [0, 1]).
    """

    method: AttackId
    eps: float = 0.3
    stepsize: float = 0.05
    iterations: int = 10
    max_steps: int = 100
    binary_search_steps: int = 5
    confidence: float = 0.0
    learning_rate: float = 0.005
    max_iterations: int = 1000
    overshoot: float = 0.02
    initial_tradeoff: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        for field_name in ("iterations", "max_steps", "binary_search_steps",
                           "max_iterations"):
            if getattr(self, field_name) < 1:
                raise ValueError(f"{field_name} must be >= 1")


_DEFAULTS = {
    AttackId.FGSM: AttackConfig(method=AttackId.FGSM, eps=0.3, stepsize=0.3, iterations=1),
    AttackId.BIM: AttackConfig(method=AttackId.BIM, eps=0.3, stepsize=0.05, iterations=10),
    AttackId.RPGD: AttackConfig(method=AttackId.RPGD, eps=0.3, stepsize=0.01, iterations=40),
    AttackId.DEEPFOOL: AttackConfig(method=AttackId.DEEPFOOL, max_steps=100),
    AttackId.CWL2: AttackConfig(method=AttackId.CWL2, binary_search_steps=5,
                                confidence=0.0, learning_rate=0.005, max_iterations=1000),
}


def default_config(method: AttackId, **overrides) -> AttackConfig:
    """Published hyperparameters for the method, with optional overrides."""
    return replace(_DEFAULTS[method], **overrides)


@dataclass(frozen=True)
class AttackResult:
    """Final iterates plus a per-sample success flag from a fresh forward pass."""

    x_adv: np.ndarray
    success: np.ndarray


def _prepare(net, x, y_true):
    arr, single = _as_batch(net.config, x)
    y = np.atleast_1d(np.asarray(y_true, dtype=int))
    if y.size != arr.shape[0]:
        raise ValueError("labels must align with the batch")
    return arr, y, single


def _finish(net, x_adv, y, single) -> AttackResult:
    success = predict(net, x_adv) != y
    if single:
        return AttackResult(x_adv=x_adv[0], success=success[0])
    return AttackResult(x_adv=x_adv, success=success)


def bim(net: TinyNet, x, y_true, cfg: AttackConfig) -> AttackResult:
    """Iterative sign-gradient ascent on the cross-entropy, projected per step."""
    arr, y, single = _prepare(net, x, y_true)
    adv = arr.copy()
    lo, hi = arr - cfg.eps, arr + cfg.eps
    for _ in range(cfg.iterations):
        g = gradient_input(net, adv, y, loss="cross_entropy")
        adv = adv + cfg.stepsize * np.sign(g)
        adv = np.clip(np.clip(adv, lo, hi), 0.0, 1.0)
    return _finish(net, adv, y, single)


def rpgd(net: TinyNet, x, y_true, cfg: AttackConfig) -> AttackResult:
    """BIM from a uniform random start inside the eps ball (seed-deterministic)."""
    arr, y, single = _prepare(net, x, y_true)
    start = np.empty_like(arr)
    for i in range(arr.shape[0]):
        rng = spawn_rng(cfg.seed, 0x5047, i)
        start[i] = arr[i] + rng.uniform(-cfg.eps, cfg.eps, arr.shape[1:])
    adv = np.clip(start, 0.0, 1.0)
    lo, hi = arr - cfg.eps, arr + cfg.eps
    for _ in range(cfg.iterations):
        g = gradient_input(net, adv, y, loss="cross_entropy")
        adv = adv + cfg.stepsize * np.sign(g)
        adv = np.clip(np.clip(adv, lo, hi), 0.0, 1.0)
    return _finish(net, adv, y, single)


def fgsm(net: TinyNet, x, y_true, eps: float) -> AttackResult:
    """Single sign-gradient step: BIM with iterations=1 and stepsize=eps."""
    cfg = AttackConfig(method=AttackId.FGSM, eps=eps, stepsize=eps, iterations=1)
    return bim(net, x, y_true, cfg)


def _class_gradients(net, x):
    """d z_k / d x for every class k; returns (K, N, *input_shape)."""
    logits, caches = _forward(net, x)
    k = net.config.class_count
    grads = np.empty((k,) + x.shape)
    for cls in range(k):
        dlogits = np.zeros_like(logits)
        dlogits[:, cls] = 1.0
        _, dx = _backward(net, caches, dlogits)
        grads[cls] = dx
    return logits, grads


def deepfool(net: TinyNet, x, y_true, cfg: AttackConfig) -> AttackResult:
    """Minimal-L2 linearized boundary projection, multiclass.

    Raises:
        ValueError: if any input is already misclassified (precondition).
    """
    arr, y, single = _prepare(net, x, y_true)
    if np.any(predict(net, arr) != y):
        raise ValueError("deepfool requires correctly classified inputs")
    n = arr.shape[0]
    r_total = np.zeros_like(arr)
    active = np.ones(n, dtype=bool)
    overshoot = 1.0 + cfg.overshoot
    for _ in range(cfg.max_steps):
        candidate = np.clip(arr + overshoot * r_total, 0.0, 1.0)
        active &= predict(net, candidate) == y
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        sub = arr[idx] + overshoot * r_total[idx]
        logits, grads = _class_gradients(net, sub)
        for pos, sample in enumerate(idx):
            cls = y[sample]
            w = grads[:, pos] - grads[cls, pos]
            f = logits[pos] - logits[pos, cls]
            norms = np.array([np.linalg.norm(w[k]) for k in range(len(f))])
            norms[cls] = np.inf
            norms[norms == 0] = np.inf
            ratio = np.abs(f) / norms
            ratio[cls] = np.inf
            best = int(np.argmin(ratio))
            step = (abs(f[best]) + 1e-8) / (norms[best] ** 2) * w[best]
            r_total[sample] += step
    adv = np.clip(arr + overshoot * r_total, 0.0, 1.0)
    return _finish(net, adv, y, single)


def cw_l2(net: TinyNet, x, y_true, cfg: AttackConfig) -> AttackResult:
    """Tanh-space L2 attack with binary search over the trade-off constant.

    Minimizes ||delta||^2 + c * max(z_true - max_other + confidence, 0) by
    plain gradient descent; per sample, c doubles on failure (until an upper
    bound exists) and bisects once bracketed. The best successful iterate by
    L2 wins; samples never successful return the final iterate.
    """
    arr, y, single = _prepare(net, x, y_true)
    n = arr.shape[0]
    rows = np.arange(n)
    squash = 1.0 - 1e-6
    x_tanh = np.arctanh((arr * 2.0 - 1.0) * squash)

    c = np.full(n, cfg.initial_tradeoff)
    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    best_adv = arr.copy()
    best_l2 = np.full(n, np.inf)

    axes = tuple(range(1, arr.ndim))
    last_iterate = arr.copy()
    for _ in range(cfg.binary_search_steps):
        w = x_tanh.copy()
        step_success = np.zeros(n, dtype=bool)
        for _ in range(cfg.max_iterations):
            x_t = (np.tanh(w) + 1.0) / 2.0
            delta = x_t - arr
            logits, caches = _forward(net, x_t)
            z_true = logits[rows, y]
            masked = logits.copy()
            masked[rows, y] = -np.inf
            z_other = masked.max(axis=1)
            margin = z_true - z_other + cfg.confidence

            # track successes (margin driven to zero) and their L2 costs
            l2 = np.sum(delta * delta, axis=axes)
            hit = margin <= 0.0
            improve = hit & (l2 < best_l2)
            best_l2[improve] = l2[improve]
            best_adv[improve] = x_t[improve]
            step_success |= hit

            runner_up = np.argmax(masked, axis=1)
            dlogits = np.zeros_like(logits)
            active = margin > 0.0
            dlogits[rows[active], y[active]] = c[active]
            dlogits[rows[active], runner_up[active]] = -c[active]
            _, dmargin = _backward(net, caches, dlogits)
            dx = 2.0 * delta + dmargin
            dw = dx * (1.0 - np.tanh(w) ** 2) / 2.0
            w = w - cfg.learning_rate * dw
        last_iterate = (np.tanh(w) + 1.0) / 2.0
        upper[step_success] = np.minimum(upper[step_success], c[step_success])
        lower[~step_success] = np.maximum(lower[~step_success], c[~step_success])
        bracketed = np.isfinite(upper)
        # unbracketed constants must grow fast enough to clear the minimal
        # perturbation barrier within the few search steps available
        c = np.where(bracketed, 0.5 * (lower + upper), c * 10.0)

    never = ~np.isfinite(best_l2)
    best_adv[never] = last_iterate[never]
    return _finish(net, best_adv, y, single)


def gaussian_noisy(x, sigma_noise: float, seed: int) -> np.ndarray:
    """Per-entry Gaussian noise clipped to [0, 1]; sample i uses stream (seed, i).

    A 4-D (N, C, H, W) or 2-D (N, d) input is a batch; 3-D or 1-D is a
    single sample.
    """
    if sigma_noise < 0:
        raise ValueError("sigma_noise must be nonnegative")
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim in (1, 3)
    batch = arr[None, ...] if single else arr
    if sigma_noise == 0.0:
        out = np.clip(batch, 0.0, 1.0)
    else:
        out = np.empty_like(batch)
        for i in range(batch.shape[0]):
            rng = spawn_rng(seed, 0x6E01, i)
            out[i] = batch[i] + rng.normal(0.0, sigma_noise, batch.shape[1:])
        out = np.clip(out, 0.0, 1.0)
    return out[0] if single else out


_ATTACK_FUNCS = {
    AttackId.BIM: bim,
    AttackId.RPGD: rpgd,
    AttackId.DEEPFOOL: deepfool,
    AttackId.CWL2: cw_l2,
}


def run_attack(net: TinyNet, x, y_true, cfg: AttackConfig) -> AttackResult:
    """Dispatch on cfg.method."""
    if cfg.method == AttackId.FGSM:
        return fgsm(net, x, y_true, cfg.eps)
    if cfg.method not in _ATTACK_FUNCS:
        raise ValueError(f"no attack implementation for {cfg.method}")
    return _ATTACK_FUNCS[cfg.method](net, x, y_true, cfg)
