"""Binary kernel SVM trained by sequential minimal optimization, with
posterior calibration and the detection metrics used throughout the package.

The solver is the classic two-variable SMO scheme: sweep all points, pick a
KKT violator, pair it with a random partner, and solve the two-variable
subproblem in closed form. Calibration maps decision values to posterior
probabilities with a logistic fit on out-of-fold decisions, so the 0.5
threshold is meaningful on held-out data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mbfdetect._rng import spawn_rng

__all__ = [
    "SvmModel",
    "EvalReport",
    "train_svm",
    "decision_value",
    "posterior",
    "auroc",
    "accuracy_at_half",
]

_ALPHA_EPS = 1e-8


def _kernel_matrix(x, y, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return x @ y.T
    if kernel == "rbf":
        sq = (np.sum(x * x, axis=1)[:, None] + np.sum(y * y, axis=1)[None, :]
              - 2.0 * (x @ y.T))
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValueError(f"unknown kernel {kernel!r}")


@dataclass(frozen=True)
class SvmModel:
    """Trained detector: support set, kernel, bias, and calibration.

    feature_mean/feature_std, when set, standardize inputs (and were applied
    to the stored support vectors) - fitted on the training features only.
    """

    support_vectors: np.ndarray
    dual_coeffs: np.ndarray  # alpha_i * y_i for the retained points
    bias: float
    kernel: str
    gamma: float
    C: float
    platt_a: float
    platt_b: float
    feature_dim: int
    kkt_residual: float
    objective_history: tuple = ()
    feature_mean: np.ndarray | None = None
    feature_std: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "support_vectors",
                           np.asarray(self.support_vectors, dtype=np.float64))
        object.__setattr__(self, "dual_coeffs",
                           np.asarray(self.dual_coeffs, dtype=np.float64))
        if (self.feature_mean is None) != (self.feature_std is None):
            raise ValueError("feature_mean and feature_std must be set together")
        if self.feature_mean is not None:
            object.__setattr__(self, "feature_mean",
                               np.asarray(self.feature_mean, dtype=np.float64))
            object.__setattr__(self, "feature_std",
                               np.asarray(self.feature_std, dtype=np.float64))


@dataclass(frozen=True)
class EvalReport:
    """Detection metrics at the 0.5 posterior threshold plus ranking quality.

    confusion is ((tp, fn), (fp, tn)) with adversarial as the positive class.
    """

    auroc: float
    accuracy: float
    confusion: tuple
    n_benign: int
    n_adversarial: int


def _dual_objective(alpha, y, K):
    ay = alpha * y
    return alpha.sum() - 0.5 * float(ay @ K @ ay)


class _SmoState:
    """Mutable solver state: duals, bias, and a cached error vector f - y."""

    def __init__(self, K, y, C, tol):
        self.K = K
        self.y = y
        self.C = C
        self.tol = tol
        self.alpha = np.zeros(len(y))
        self.b = 0.0
        self.errors = -y.astype(float)  # decision starts at zero

    def try_pair(self, i, j) -> bool:
        """Solve the two-variable subproblem; returns True if alpha moved."""
        if i == j:
            return False
        K, y, alpha, C = self.K, self.y, self.alpha, self.C
        e_i, e_j = self.errors[i], self.errors[j]
        a_i_old, a_j_old = alpha[i], alpha[j]
        if y[i] != y[j]:
            lo = max(0.0, a_j_old - a_i_old)
            hi = min(C, C + a_j_old - a_i_old)
        else:
            lo = max(0.0, a_i_old + a_j_old - C)
            hi = min(C, a_i_old + a_j_old)
        if lo >= hi:
            return False
        eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
        if eta < 0:
            a_j = a_j_old - y[j] * (e_i - e_j) / eta
            a_j = min(hi, max(lo, a_j))
        else:
            # flat or concave direction (e.g. duplicate points): move a_j to
            # the endpoint with the lower objective, or bail if neither helps
            s = y[i] * y[j]
            f1 = y[i] * (e_i - self.b) - a_i_old * K[i, i] - s * a_j_old * K[i, j]
            f2 = y[j] * (e_j - self.b) - s * a_i_old * K[i, j] - a_j_old * K[j, j]
            l1 = a_i_old + s * (a_j_old - lo)
            h1 = a_i_old + s * (a_j_old - hi)
            obj_lo = (l1 * f1 + lo * f2 + 0.5 * l1 * l1 * K[i, i]
                      + 0.5 * lo * lo * K[j, j] + s * lo * l1 * K[i, j])
            obj_hi = (h1 * f1 + hi * f2 + 0.5 * h1 * h1 * K[i, i]
                      + 0.5 * hi * hi * K[j, j] + s * hi * h1 * K[i, j])
            if obj_lo < obj_hi - 1e-12:
                a_j = lo
            elif obj_hi < obj_lo - 1e-12:
                a_j = hi
            else:
                return False
        if abs(a_j - a_j_old) < 1e-7 * (a_j + a_j_old + 1e-7):
            return False
        a_i = a_i_old + y[i] * y[j] * (a_j_old - a_j)
        d_i, d_j = a_i - a_i_old, a_j - a_j_old
        b1 = self.b - e_i - y[i] * d_i * K[i, i] - y[j] * d_j * K[i, j]
        b2 = self.b - e_j - y[i] * d_i * K[i, j] - y[j] * d_j * K[j, j]
        if 0 < a_i < C:
            b_new = b1
        elif 0 < a_j < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        alpha[i], alpha[j] = a_i, a_j
        self.errors += (y[i] * d_i * K[:, i] + y[j] * d_j * K[:, j]
                        + (b_new - self.b))
        self.b = b_new
        return True

    def violates(self, i) -> bool:
        r = self.errors[i] * self.y[i]
        return ((r < -self.tol and self.alpha[i] < self.C)
                or (r > self.tol and self.alpha[i] > 0))


def _smo(K, y, C, tol, max_passes, rng, track_objective=False):
    """SMO sweeps with Platt's partner heuristic. Returns (alpha, b, history).

    For each violator the partner maximizing |E_i - E_j| is tried first, then
    every other index from a seeded random offset, so a blocked partner can
    never stall the solver; termination after max_passes clean sweeps is then
    a certificate that no improving pair exists.
    """
    n = len(y)
    state = _SmoState(K, y, C, tol)
    history = []
    quiet_passes = 0
    while quiet_passes < max_passes:
        changed = 0
        for i in range(n):
            if not state.violates(i):
                continue
            j_best = int(np.argmax(np.abs(state.errors - state.errors[i])))
            moved = state.try_pair(i, j_best)
            if not moved:
                start = int(rng.integers(0, n))
                for off in range(n):
                    if state.try_pair(i, (start + off) % n):
                        moved = True
                        break
            if moved:
                changed += 1
                if track_objective:
                    history.append(_dual_objective(state.alpha, y, K))
        quiet_passes = quiet_passes + 1 if changed == 0 else 0
        # cached errors accumulate roundoff across many updates
        state.errors = (state.alpha * y) @ K + state.b - y
    return state.alpha, state.b, history


def _recompute_bias(alpha, y, K, C):
    """Bias from the margin support vectors, or the KKT interval midpoint."""
    g = (alpha * y) @ K  # decision values without bias
    free = (alpha > _ALPHA_EPS) & (alpha < C - _ALPHA_EPS)
    if np.any(free):
        return float(np.mean(y[free] - g[free]))
    # all alphas at bounds: any b in [b_low, b_high] satisfies KKT
    upper, lower = [], []
    for i in range(len(y)):
        v = y[i] - g[i]
        if (alpha[i] <= _ALPHA_EPS and y[i] > 0) or (alpha[i] >= C - _ALPHA_EPS and y[i] < 0):
            lower.append(v)  # b >= v - slack direction
        else:
            upper.append(v)
    lo = max(lower) if lower else min(upper)
    hi = min(upper) if upper else max(lower)
    return float(0.5 * (lo + hi))


def _kkt_residual(alpha, y, K, b, C):
    margins = y * ((alpha * y) @ K + b)
    res = 0.0
    for i in range(len(y)):
        if alpha[i] <= _ALPHA_EPS:
            res = max(res, 1.0 - margins[i])
        elif alpha[i] >= C - _ALPHA_EPS:
            res = max(res, margins[i] - 1.0)
        else:
            res = max(res, abs(margins[i] - 1.0))
    return float(max(res, 0.0))


def _fit_platt(decisions, labels, max_iter=100, ridge=1e-10):
    """Logistic map P(+1 | f) = 1 / (1 + exp(a*f + b)) by damped Newton.

    Targets are the smoothed class frequencies, which regularize the fit on
    separable data; a tiny ridge keeps the Hessian invertible.
    """
    d = np.asarray(decisions, dtype=float)
    lab = np.asarray(labels)
    n_pos = int((lab > 0).sum())
    n_neg = len(lab) - n_pos
    t = np.where(lab > 0, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def nll(a, b):
        z = a * d + b
        pos = z >= 0
        out = np.where(pos, t * z + np.log1p(np.exp(-np.abs(z))),
                       (t - 1.0) * z + np.log1p(np.exp(-np.abs(z))))
        return float(out.sum()) + 0.5 * ridge * (a * a + b * b)

    a, b = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    f_cur = nll(a, b)
    for _ in range(max_iter):
        z = np.clip(a * d + b, -500.0, 500.0)
        p = np.where(z >= 0, np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))),
                     1.0 / (1.0 + np.exp(-np.abs(z))))
        w = np.maximum(p * (1.0 - p), 1e-12)
        g_a = float((d * (t - p)).sum()) + ridge * a
        g_b = float((t - p).sum()) + ridge * b
        if max(abs(g_a), abs(g_b)) < 1e-10:
            break
        h_aa = float((d * d * w).sum()) + ridge
        h_ab = float((d * w).sum())
        h_bb = float(w.sum()) + ridge
        det = h_aa * h_bb - h_ab * h_ab
        step_a = (h_bb * g_a - h_ab * g_b) / det
        step_b = (h_aa * g_b - h_ab * g_a) / det
        scale = 1.0
        for _ in range(30):
            f_new = nll(a - scale * step_a, b - scale * step_b)
            if f_new < f_cur + 1e-12:
                break
            scale *= 0.5
        a -= scale * step_a
        b -= scale * step_b
        f_cur = nll(a, b)
    return a, b


def _stratified_folds(labels, k, rng):
    """Fold assignment balanced per class; returns an int array in [0, k)."""
    assign = np.empty(len(labels), dtype=int)
    for cls in (-1, 1):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        assign[idx] = np.arange(len(idx)) % k
    return assign


def train_svm(features, labels, C: float = 1.0, kernel: str = "rbf",
              gamma: float | None = None, tol: float = 1e-3,
              max_passes: int = 10, seed: int = 0,
              calibration_folds: int = 3, track_objective: bool = False,
              standardize: bool = False) -> SvmModel:
    """Train the detector on +/-1 labels.

    gamma defaults to 1 / (feature_dim * feature_variance). Calibration fits
    the posterior map on out-of-fold decision values from an internal
    stratified split (falling back to in-sample decisions when a fold would
    lose a class); the final support set is refit on all points.

    standardize=True z-scores each feature dimension with statistics from
    these training rows; the model carries them and applies them to inputs.

    Raises:
        ValueError: fewer than 2 points, a single class, or non-finite input.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a 2-D feature matrix with at least 2 rows")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    feature_mean = feature_std = None
    if standardize:
        feature_mean = x.mean(axis=0)
        feature_std = x.std(axis=0) + 1e-9
        x = (x - feature_mean) / feature_std
    y = np.asarray(labels, dtype=np.float64).ravel()
    if set(np.unique(y)) - {-1.0, 1.0}:
        raise ValueError("labels must be +1 or -1")
    if len(np.unique(y)) < 2:
        raise ValueError("both classes must be present")
    if y.size != x.shape[0]:
        raise ValueError("features and labels are misaligned")

    if gamma is None:
        var = float(x.var())
        gamma = 1.0 / (x.shape[1] * var) if var > 0 else 1.0 / x.shape[1]

    rng = spawn_rng(seed, 0)
    K = _kernel_matrix(x, x, kernel, gamma)
    alpha, _, history = _smo(K, y, C, tol, max_passes, rng, track_objective)
    b = _recompute_bias(alpha, y, K, C)
    kkt = _kkt_residual(alpha, y, K, b, C)

    # out-of-fold decision values for calibration
    oof = np.full(y.size, np.nan)
    fold_rng = spawn_rng(seed, 1)
    assign = _stratified_folds(y, calibration_folds, fold_rng)
    usable = True
    for f in range(calibration_folds):
        train_mask = assign != f
        if len(np.unique(y[train_mask])) < 2 or train_mask.sum() < 2:
            usable = False
            break
        Kf = K[np.ix_(train_mask, train_mask)]
        a_f, _, _ = _smo(Kf, y[train_mask], C, tol, max_passes, spawn_rng(seed, 2, f))
        b_f = _recompute_bias(a_f, y[train_mask], Kf, C)
        K_cross = K[np.ix_(train_mask, ~train_mask)]
        oof[~train_mask] = (a_f * y[train_mask]) @ K_cross + b_f
    if usable and np.all(np.isfinite(oof)):
        platt_a, platt_b = _fit_platt(oof, y)
    else:
        platt_a, platt_b = _fit_platt((alpha * y) @ K + b, y)

    keep = alpha > _ALPHA_EPS
    if not np.any(keep):  # degenerate but valid: decision is the bare bias
        keep = np.zeros_like(keep)
    return SvmModel(
        support_vectors=x[keep],
        dual_coeffs=(alpha * y)[keep],
        bias=b,
        kernel=kernel,
        gamma=float(gamma),
        C=float(C),
        platt_a=float(platt_a),
        platt_b=float(platt_b),
        feature_dim=x.shape[1],
        kkt_residual=kkt,
        objective_history=tuple(history),
        feature_mean=feature_mean,
        feature_std=feature_std,
    )


def _as_batch(model: SvmModel, x) -> tuple:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != model.feature_dim:
        raise ValueError(
            f"feature dimension mismatch: expected {model.feature_dim}, got {arr.shape[-1]}")
    if model.feature_mean is not None:
        arr = (arr - model.feature_mean) / model.feature_std
    return arr, single


def decision_value(model: SvmModel, x):
    """Kernel expansion sum(dual_i * K(sv_i, x)) + bias; accepts one row or a batch."""
    arr, single = _as_batch(model, x)
    if model.support_vectors.size == 0:
        out = np.full(arr.shape[0], model.bias)
    else:
        out = _kernel_matrix(arr, model.support_vectors, model.kernel, model.gamma) @ model.dual_coeffs + model.bias
    return float(out[0]) if single else out


def posterior(model: SvmModel, x):
    """Calibrated probability that x is adversarial (+1)."""
    dec = decision_value(model, x)
    z = np.clip(model.platt_a * np.asarray(dec) + model.platt_b, -500, 500)
    out = 1.0 / (1.0 + np.exp(z))
    return float(out) if np.ndim(dec) == 0 else out


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    boundaries = np.flatnonzero(np.diff(sorted_vals) != 0) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [values.size]])
    ranks = np.empty(values.size)
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + 1 + e)
    return ranks


def auroc(scores, labels) -> float:
    """P(score_pos > score_neg) + 0.5 * P(tie), by average ranks.

    Raises:
        ValueError: if either class is absent.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    pos = y > 0
    n_pos = int(pos.sum())
    n_neg = s.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present")
    ranks = _average_ranks(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def accuracy_at_half(posteriors, labels) -> EvalReport:
    """Confusion matrix and accuracy at the 0.5 posterior threshold.

    Adversarial (+1) is the positive class; AUROC is computed from the same
    posteriors by rank statistics.
    """
    p = np.asarray(posteriors, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if p.size != y.size:
        raise ValueError("posteriors and labels are misaligned")
    pred_pos = p >= 0.5
    is_pos = y > 0
    tp = int(np.sum(pred_pos & is_pos))
    fn = int(np.sum(~pred_pos & is_pos))
    fp = int(np.sum(pred_pos & ~is_pos))
    tn = int(np.sum(~pred_pos & ~is_pos))
    total = tp + fn + fp + tn
    return EvalReport(
        auroc=auroc(p, y),
        accuracy=(tp + tn) / total,
        confusion=((tp, fn), (fp, tn)),
        n_benign=fp + tn,
        n_adversarial=tp + fn,
    )
