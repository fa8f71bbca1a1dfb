"""End-to-end orchestration: dataset construction from a trained classifier,
feature extraction, detector training, transfer-case evaluation, the
hypothesis-test suite, and per-dimension feature statistics.

Labeling convention throughout: clean and noisy records are benign (-1),
adversarial records are +1. Splits are assigned per source image, so the
three records of one image never straddle the train/test boundary, and
every train-derived statistic (noise scale, kernel width, calibration) is
computed strictly from the train split.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from mbfdetect._rng import spawn_rng
from mbfdetect.attacks import AttackConfig, gaussian_noisy, run_attack
from mbfdetect.benford import (
    ActivationRecord,
    AttackId,
    Group,
    extract_mbf_features,
)
from mbfdetect.ggd import ShapeClampedWarning, ggd_fit_shape
from mbfdetect.net import TinyNet, forward_batch, predict
from mbfdetect.stats import ks_one_sample_vs_ggd, ks_two_sample
from mbfdetect.svm import EvalReport, SvmModel, accuracy_at_half, posterior, train_svm

__all__ = [
    "DetectionDataset",
    "ExperimentConfig",
    "FeatureSet",
    "HypothesisCell",
    "build_detection_dataset",
    "extract_dataset_features",
    "train_detector",
    "run_experiment",
    "hypothesis_suite",
    "emit_statistics",
]


@dataclass(frozen=True)
class DetectionDataset:
    """Clean/noisy/adversarial record triples from one source and one attack."""

    source: str
    attack: AttackId
    records: tuple
    train_ids: frozenset
    test_ids: frozenset
    sigma_noise: float
    n_eligible: int
    n_attack_success: int

    def split_records(self, split: str) -> list:
        ids = self.train_ids if split == "train" else self.test_ids
        return [r for r in self.records if r.sample_id in ids]


def _capture_records(net: TinyNet, images, ids, labels, group, attack) -> list:
    _, captures = forward_batch(net, images)
    records = []
    for row, (sid, cls) in enumerate(zip(ids, labels)):
        layers = tuple(c[row] for c in captures)
        records.append(ActivationRecord(sample_id=int(sid), group=group,
                                        attack_id=attack, true_class=int(cls),
                                        layers=layers))
    return records


def build_detection_dataset(images, labels, net: TinyNet, attack_cfg: AttackConfig,
                            seed: int, source: str = "desk",
                            train_fraction: float = 0.8,
                            noise_sigma: float | None = None) -> DetectionDataset:
    """Craft the 3-per-image record set and the image-level train/test split.

    Stages: keep correctly classified images; attack them (dropping failures);
    split the kept images; calibrate the noise scale from the train split's
    mean adversarial L2 unless one is given; drop images whose noisy version
    is misclassified; capture responses for all three versions.

    Raises:
        RuntimeError: if the attack succeeds on fewer than 10% of eligible images.
    """
    x = np.asarray(images, dtype=np.float64)
    y = np.asarray(labels, dtype=int)
    eligible = np.flatnonzero(predict(net, x) == y)
    if eligible.size == 0:
        raise RuntimeError("no eligible images: nothing is correctly classified")

    result = run_attack(net, x[eligible], y[eligible], attack_cfg)
    n_success = int(result.success.sum())
    if n_success < 0.1 * eligible.size:
        raise RuntimeError(
            f"attack {attack_cfg.method.name} succeeded on {n_success}/{eligible.size} "
            "eligible images (<10%); dataset construction aborted")
    kept = eligible[result.success]
    adv_images = result.x_adv[result.success]

    order = spawn_rng(seed, 0x5B17).permutation(kept.size)
    n_train = int(kept.size * train_fraction)
    train_ids = frozenset(int(i) for i in kept[order[:n_train]])

    if noise_sigma is None:
        train_rows = np.isin(kept, sorted(train_ids))
        deltas = adv_images[train_rows] - x[kept[train_rows]]
        mean_l2 = float(np.sqrt(np.sum(deltas ** 2, axis=tuple(range(1, deltas.ndim)))).mean())
        noise_sigma = mean_l2 / math.sqrt(x[0].size)

    noisy_images = gaussian_noisy(x[kept], noise_sigma, seed=seed)
    noisy_ok = predict(net, noisy_images) == y[kept]

    final = kept[noisy_ok]
    records = []
    records += _capture_records(net, x[final], final, y[final], Group.CLEAN, AttackId.NONE)
    records += _capture_records(net, noisy_images[noisy_ok], final, y[final],
                                Group.NOISY, AttackId.NONE)
    records += _capture_records(net, adv_images[noisy_ok], final, y[final],
                                Group.ADVERSARIAL, attack_cfg.method)
    final_set = set(int(i) for i in final)
    return DetectionDataset(
        source=source,
        attack=attack_cfg.method,
        records=tuple(records),
        train_ids=frozenset(i for i in train_ids if i in final_set),
        test_ids=frozenset(i for i in final_set if i not in train_ids),
        sigma_noise=float(noise_sigma),
        n_eligible=int(eligible.size),
        n_attack_success=n_success,
    )


@dataclass(frozen=True)
class FeatureSet:
    """Extracted features for a list of records, in record order."""

    matrix: np.ndarray  # (N, T*L)
    labels: np.ndarray  # +1 adversarial, -1 benign
    groups: tuple
    sample_ids: tuple
    T: int

    @property
    def softmax_slice(self) -> np.ndarray:
        """The trailing T dims: the softmax layer's coefficient magnitudes."""
        return self.matrix[:, -self.T:]


def extract_dataset_features(records, T: int = 16, mean_subtract: bool = True) -> FeatureSet:
    feats = [extract_mbf_features(r, T=T, mean_subtract=mean_subtract) for r in records]
    matrix = np.stack([f.values for f in feats]) if feats else np.empty((0, 0))
    labels = np.array([1.0 if r.group == Group.ADVERSARIAL else -1.0 for r in records])
    return FeatureSet(matrix=matrix, labels=labels,
                      groups=tuple(r.group for r in records),
                      sample_ids=tuple(r.sample_id for r in records), T=T)


@dataclass(frozen=True)
class ExperimentConfig:
    """One detection experiment: which dataset trains, which one tests."""

    case: str
    train_attack: AttackId
    test_attack: AttackId
    train_source: str = "desk"
    test_source: str = "desk"
    T: int = 16
    mean_subtract: bool = True
    svm_c: float = 1.0
    kernel: str = "rbf"
    standardize: bool = True
    seed: int = 0

    def __post_init__(self):
        same_attack = self.train_attack == self.test_attack
        same_source = self.train_source == self.test_source
        ok = {
            "non_transfer": same_attack and same_source,
            "attack_transfer": (not same_attack) and same_source,
            "data_transfer": same_attack and not same_source,
        }
        if self.case not in ok:
            raise ValueError(f"unknown case {self.case!r}")
        if not ok[self.case]:
            raise ValueError(f"attack/source combination violates the {self.case} case")


def train_detector(dataset: DetectionDataset, cfg: ExperimentConfig) -> SvmModel:
    """Fit the detector on the dataset's train split only."""
    feats = extract_dataset_features(dataset.split_records("train"), cfg.T,
                                     cfg.mean_subtract)
    return train_svm(feats.matrix, feats.labels, C=cfg.svm_c, kernel=cfg.kernel,
                     seed=cfg.seed, standardize=cfg.standardize)


def run_experiment(cfg: ExperimentConfig, datasets) -> EvalReport:
    """Train on (train_source, train_attack), evaluate on the test split of
    (test_source, test_attack)."""
    train_ds = datasets[(cfg.train_source, cfg.train_attack)]
    test_ds = datasets[(cfg.test_source, cfg.test_attack)]
    model = train_detector(train_ds, cfg)
    test_feats = extract_dataset_features(test_ds.split_records("test"), cfg.T,
                                          cfg.mean_subtract)
    post = posterior(model, test_feats.matrix)
    return accuracy_at_half(post, test_feats.labels)


@dataclass(frozen=True)
class HypothesisCell:
    """One reported p-value (or an insufficiency marker) of the test suite."""

    test: str
    scope: str
    subject: str
    p_value: float | None
    note: str = ""


@dataclass(frozen=True)
class HypothesisConfig:
    T: int = 16
    mean_subtract: bool = True
    h1_draws: int = 500
    h1_trials: int = 1000
    h1_max_samples: int = 40
    seed: int = 0


def _group_key(record: ActivationRecord) -> str:
    if record.group == Group.ADVERSARIAL:
        return f"adv:{record.attack_id.name.lower()}"
    return record.group.name.lower()


def _softmax_features(records, cfg: HypothesisConfig):
    """Per-group matrices of the softmax layer's T coefficient magnitudes."""
    out: dict = {}
    for r in records:
        fs = extract_mbf_features(r, T=cfg.T, mean_subtract=cfg.mean_subtract)
        out.setdefault(_group_key(r), []).append(fs.values[-cfg.T:])
    return {k: np.stack(v) for k, v in out.items()}


def _per_dim_ks(a: np.ndarray, b: np.ndarray) -> float:
    ps = [ks_two_sample(a[:, d], b[:, d]).p_value for d in range(a.shape[1])]
    return float(np.mean(ps))


def _h1_cell(records, cfg: HypothesisConfig, tag: int) -> float | None:
    """Mean averaged p-value of the per-record posterior-vector GGD test."""
    values = []
    for k, r in enumerate(records[:cfg.h1_max_samples]):
        post_vec = r.layers[-1]
        if post_vec.size < 10:
            return None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ShapeClampedWarning)
            try:
                params = ggd_fit_shape(post_vec)
            except ValueError:
                continue
        values.append(ks_one_sample_vs_ggd(post_vec, params, draws=cfg.h1_draws,
                                           trials=cfg.h1_trials,
                                           seed=spawn_rng(cfg.seed, tag, k).integers(2 ** 62)))
    return float(np.mean(values)) if values else None


def hypothesis_suite(datasets, cfg: HypothesisConfig = HypothesisConfig()) -> tuple:
    """Posterior-GGD tests (per record) and per-dimension two-sample tests on
    the softmax-layer coefficient magnitudes, averaged over the T dimensions.

    datasets maps (source, attack) to DetectionDataset. Pair tests cover:
    benign-vs-benign and benign-vs-adversarial within a dataset split,
    adversarial pairs across attacks of the same source, and every group
    across splits and across sources. Cells whose data is missing carry a
    note instead of a p-value.

    The H1 cells test each record's posterior vector against a reference
    fitted from that same vector, which biases the test toward acceptance;
    they are reported as published, not as calibrated significance levels.
    """
    cells: list = []
    by_source: dict = {}
    for (source, attack), ds in sorted(datasets.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        by_source.setdefault(source, []).append(ds)

    tag = 0
    for source, ds_list in sorted(by_source.items()):
        primary = ds_list[0]
        for split in ("train", "test"):
            split_feats = {}
            for ds in ds_list:
                split_feats.update({k: v for k, v in
                                    _softmax_features(ds.split_records(split), cfg).items()
                                    if k.startswith("adv:") or ds is primary})
            scope = f"{source}/{split}"

            for group_key in sorted(split_feats):
                if group_key.startswith("adv:"):
                    ds = next(d for d in ds_list
                              if f"adv:{d.attack.name.lower()}" == group_key)
                    recs = [r for r in ds.split_records(split)
                            if r.group == Group.ADVERSARIAL]
                    test_name = "H1.1"
                else:
                    recs = [r for r in primary.split_records(split)
                            if _group_key(r) == group_key]
                    test_name = "H1.2"
                tag += 1
                p = _h1_cell(recs, cfg, tag)
                cells.append(HypothesisCell(test_name, scope, group_key, p,
                                            "" if p is not None else "insufficient data"))

            if "clean" in split_feats and "noisy" in split_feats:
                cells.append(HypothesisCell(
                    "H2.1", scope, "clean-vs-noisy",
                    _per_dim_ks(split_feats["clean"], split_feats["noisy"])))
            adv_keys = sorted(k for k in split_feats if k.startswith("adv:"))
            for k in adv_keys:
                cells.append(HypothesisCell(
                    "H2.1", scope, f"clean-vs-{k[4:]}",
                    _per_dim_ks(split_feats["clean"], split_feats[k])))
            for i in range(len(adv_keys)):
                for j in range(i + 1, len(adv_keys)):
                    cells.append(HypothesisCell(
                        "H2.2", scope, f"{adv_keys[i][4:]}-vs-{adv_keys[j][4:]}",
                        _per_dim_ks(split_feats[adv_keys[i]], split_feats[adv_keys[j]])))

    # across splits (train vs test) and across sources (train vs whole other source)
    for source, ds_list in sorted(by_source.items()):
        for ds in ds_list:
            tr = _softmax_features(ds.split_records("train"), cfg)
            te = _softmax_features(ds.split_records("test"), cfg)
            for key in sorted(set(tr) & set(te)):
                test_name = "H2.3" if key.startswith("adv:") else "H2.4"
                cells.append(HypothesisCell(
                    test_name, f"{source}:{ds.attack.name.lower()}/train-vs-test", key,
                    _per_dim_ks(tr[key], te[key])))
        for other in sorted(by_source):
            if other <= source:
                continue
            for ds in ds_list:
                match = [d for d in by_source[other] if d.attack == ds.attack]
                if not match:
                    cells.append(HypothesisCell(
                        "H2.3", f"{source}-vs-{other}", f"adv:{ds.attack.name.lower()}",
                        None, "insufficient data"))
                    continue
                a = _softmax_features(ds.split_records("train"), cfg)
                b = _softmax_features(match[0].records, cfg)
                for key in sorted(set(a) & set(b)):
                    test_name = "H2.3" if key.startswith("adv:") else "H2.4"
                    cells.append(HypothesisCell(
                        test_name, f"{source}-vs-{other}:{ds.attack.name.lower()}", key,
                        _per_dim_ks(a[key], b[key])))
    return tuple(cells)


def emit_statistics(dataset: DetectionDataset, T: int = 16,
                    mean_subtract: bool = True) -> list:
    """Per-dimension mean and standard deviation rows, one block per group.

    Returns rows (source, split, group, dimension, mean, std, count) over the
    full T*L feature vector, suitable for CSV export and plotting.
    """
    rows = []
    for split in ("train", "test"):
        records = dataset.split_records(split)
        groups: dict = {}
        for r in records:
            groups.setdefault(_group_key(r), []).append(r)
        for group_key in sorted(groups):
            feats = extract_dataset_features(groups[group_key], T, mean_subtract)
            mean = feats.matrix.mean(axis=0)
            std = feats.matrix.std(axis=0)
            for d in range(feats.matrix.shape[1]):
                rows.append((dataset.source, split, group_key, d + 1,
                             float(mean[d]), float(std[d]), feats.matrix.shape[0]))
    return rows
