"""SMO training, calibration, and the detection metrics."""

import numpy as np
import pytest
import scipy.optimize

from mbfdetect.svm import (
    accuracy_at_half,
    auroc,
    decision_value,
    posterior,
    train_svm,
)


def trapezoid_auroc(scores, labels):
    """ROC-curve integration oracle, sweeping every distinct score threshold."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels) > 0
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    tpr, fpr = [0.0], [0.0]
    for th in np.unique(s)[::-1]:
        pred = s >= th
        tpr.append(np.sum(pred & y) / n_pos)
        fpr.append(np.sum(pred & ~y) / n_neg)
    return float(np.trapezoid(tpr, fpr))


def brute_force_dual(K, y, C):
    """Reference dual optimum via SLSQP on the 4..60-point QP."""
    n = len(y)

    def neg_obj(a):
        ay = a * y
        return -(a.sum() - 0.5 * ay @ K @ ay)

    res = scipy.optimize.minimize(
        neg_obj, x0=np.full(n, C / 2), method="SLSQP",
        bounds=[(0, C)] * n,
        constraints=[{"type": "eq", "fun": lambda a: a @ y}],
        options={"maxiter": 500, "ftol": 1e-12})
    return -res.fun


XOR_X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
XOR_Y = np.array([-1.0, -1.0, 1.0, 1.0])


class TestTraining:
    def test_separable_pair(self):
        x = np.array([[0.0] * 5, [1.0] * 5])
        y = np.array([-1.0, 1.0])
        model = train_svm(x, y, C=1.0, kernel="linear", seed=0)
        dec = decision_value(model, x)
        assert np.all(np.sign(dec) == y)

    def test_xor_rbf(self):
        model = train_svm(XOR_X, XOR_Y, C=10.0, kernel="rbf", gamma=1.0, seed=1)
        dec = decision_value(model, XOR_X)
        assert np.all(np.sign(dec) == XOR_Y)
        assert model.kkt_residual <= 1e-3

    def test_xor_reaches_reference_dual_optimum(self):
        model = train_svm(XOR_X, XOR_Y, C=10.0, kernel="rbf", gamma=1.0, seed=1,
                          track_objective=True)
        from mbfdetect.svm import _kernel_matrix
        K = _kernel_matrix(XOR_X, XOR_X, "rbf", 1.0)
        reference = brute_force_dual(K, XOR_Y, 10.0)
        assert model.objective_history[-1] == pytest.approx(reference, abs=1e-4)

    def test_objective_non_decreasing(self):
        rng = np.random.default_rng(7)
        x = rng.normal(0, 1, (40, 3))
        y = np.where(x[:, 0] + 0.3 * rng.normal(0, 1, 40) > 0, 1.0, -1.0)
        if len(np.unique(y)) < 2:
            y[0] = -y[0]
        model = train_svm(x, y, C=2.0, kernel="rbf", seed=3, track_objective=True)
        hist = np.asarray(model.objective_history)
        assert np.all(np.diff(hist) >= -1e-9)

    def test_contradictory_duplicates(self):
        x = np.array([[1.0, 1.0], [1.0, 1.0]])
        y = np.array([1.0, -1.0])
        model = train_svm(x, y, C=1.0, kernel="linear", seed=0)
        alphas = np.abs(model.dual_coeffs)
        assert len(alphas) == 2
        assert np.all(alphas > 0.0)
        assert np.all(alphas <= 1.0 + 1e-12)
        # both margins violated: slack 1 - y*f strictly positive
        dec = decision_value(model, x)
        assert np.all(1.0 - y * dec > 0.1)

    def test_dual_constraint_holds(self):
        rng = np.random.default_rng(11)
        x = rng.normal(0, 1, (60, 4))
        y = np.where(rng.random(60) > 0.5, 1.0, -1.0)
        y[:2] = [1.0, -1.0]
        model = train_svm(x, y, C=1.5, kernel="rbf", seed=5)
        assert abs(model.dual_coeffs.sum()) < 1e-6

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            train_svm(np.eye(3), np.ones(3), C=1.0)

    def test_non_finite_rejected(self):
        x = np.array([[1.0, np.nan], [0.0, 1.0]])
        with pytest.raises(ValueError):
            train_svm(x, np.array([1.0, -1.0]))

    def test_same_seed_bitwise_identical(self):
        rng = np.random.default_rng(2)
        x = rng.normal(0, 1, (50, 4))
        y = np.where(x[:, 0] > 0, 1.0, -1.0)
        m1 = train_svm(x, y, C=5.0, kernel="rbf", seed=9)
        m2 = train_svm(x, y, C=5.0, kernel="rbf", seed=9)
        np.testing.assert_array_equal(decision_value(m1, x), decision_value(m2, x))

    def test_permutation_leaves_decisions(self):
        rng = np.random.default_rng(13)
        x = np.concatenate([rng.normal(-2, 0.5, (30, 3)), rng.normal(2, 0.5, (30, 3))])
        y = np.concatenate([-np.ones(30), np.ones(30)])
        perm = rng.permutation(60)
        m1 = train_svm(x, y, C=10.0, kernel="linear", tol=1e-5, seed=4)
        m2 = train_svm(x[perm], y[perm], C=10.0, kernel="linear", tol=1e-5, seed=4)
        probe = rng.normal(0, 2, (20, 3))
        np.testing.assert_allclose(decision_value(m1, probe), decision_value(m2, probe),
                                   atol=1e-6)

    def test_rbf_scale_gamma_invariance(self):
        rng = np.random.default_rng(17)
        x = rng.normal(0, 1, (40, 5))
        y = np.where(x[:, 1] > 0, 1.0, -1.0)
        y[:2] = [1.0, -1.0]
        scale = 7.0
        m1 = train_svm(x, y, C=3.0, kernel="rbf", gamma=0.5, seed=6)
        m2 = train_svm(scale * x, y, C=3.0, kernel="rbf", gamma=0.5 / scale ** 2, seed=6)
        probe = rng.normal(0, 1, (10, 5))
        np.testing.assert_allclose(decision_value(m1, probe),
                                   decision_value(m2, scale * probe), atol=1e-9)


@pytest.fixture(scope="module")
def model():
    rng = np.random.default_rng(0)
    x = np.concatenate([rng.normal(-1, 0.4, (40, 2)), rng.normal(1, 0.4, (40, 2))])
    y = np.concatenate([-np.ones(40), np.ones(40)])
    return train_svm(x, y, C=2.0, kernel="rbf", seed=0)


class TestDecisionAndPosterior:
    def test_dimension_mismatch_rejected(self, model):
        with pytest.raises(ValueError, match="dimension"):
            decision_value(model, np.zeros(5))
        with pytest.raises(ValueError, match="dimension"):
            posterior(model, np.zeros((3, 7)))

    def test_posterior_in_open_interval(self, model):
        probe = np.random.default_rng(1).normal(0, 3, (50, 2))
        p = posterior(model, probe)
        assert np.all(p > 0.0)
        assert np.all(p < 1.0)

    def test_posterior_monotone_in_decision(self, model):
        assert model.platt_a < 0
        probe = np.random.default_rng(2).normal(0, 2, (100, 2))
        dec = decision_value(model, probe)
        p = posterior(model, probe)
        order = np.argsort(dec)
        assert np.all(np.diff(p[order]) >= -1e-12)

    def test_supports_classified_by_label_sign(self, model):
        # separable blobs: high-confidence posteriors on the class centers
        assert posterior(model, np.array([1.0, 1.0])) > 0.5
        assert posterior(model, np.array([-1.0, -1.0])) < 0.5


class TestAuroc:
    def test_perfect_separation(self):
        assert auroc([0.9, 0.8, 0.1, 0.2], [1, 1, -1, -1]) == 1.0

    def test_three_of_four_pairs(self):
        assert auroc([0.1, 0.4, 0.35, 0.8], [-1, -1, 1, 1]) == pytest.approx(0.75)

    def test_all_ties(self):
        assert auroc([0.5, 0.5, 0.5, 0.5], [1, -1, 1, -1]) == pytest.approx(0.5)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            auroc([0.1, 0.2], [1, 1])

    def test_matches_trapezoid_integration(self):
        rng = np.random.default_rng(23)
        for _ in range(60):
            n = int(rng.integers(5, 200))
            labels = np.where(rng.random(n) > 0.5, 1, -1)
            if len(np.unique(labels)) < 2:
                labels[:2] = [1, -1]
            # quantized scores force ties
            scores = np.round(rng.normal(labels * 0.3, 1.0), 1)
            assert auroc(scores, labels) == pytest.approx(
                trapezoid_auroc(scores, labels), abs=1e-9)


class TestAccuracyAtHalf:
    def test_perfect(self):
        r = accuracy_at_half([0.9, 0.1], [1, -1])
        assert r.accuracy == 1.0
        assert r.confusion == ((1, 0), (0, 1))

    def test_all_wrong(self):
        r = accuracy_at_half([0.4, 0.6], [1, -1])
        assert r.accuracy == 0.0

    def test_three_quarters(self):
        r = accuracy_at_half([0.6, 0.6, 0.4, 0.2], [1, -1, -1, -1])
        assert r.accuracy == pytest.approx(0.75)
        assert r.confusion == ((1, 0), (1, 2))
        assert r.n_benign == 3
        assert r.n_adversarial == 1

    def test_counts_sum(self):
        rng = np.random.default_rng(3)
        p = rng.random(40)
        y = np.where(rng.random(40) > 0.4, 1, -1)
        y[:2] = [1, -1]
        r = accuracy_at_half(p, y)
        (tp, fn), (fp, tn) = r.confusion
        assert tp + fn + fp + tn == 40
        assert tp + fn == r.n_adversarial
        assert fp + tn == r.n_benign
