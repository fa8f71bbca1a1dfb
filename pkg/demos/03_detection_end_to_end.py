#!/usr/bin/env python3
"""Algorithm walkthrough at desk scale, step by step rather than through the
bundled runner: train a classifier, craft attacks and noisy twins, extract
per-layer coefficient-magnitude features, train the detector, evaluate.

Use `mbfdetect demo` for the full experiment (both attacks, transfer cases,
hypothesis suite); this script keeps the moving parts visible.
"""

import numpy as np

from mbfdetect import (
    AttackId,
    ExperimentConfig,
    build_detection_dataset,
    extract_dataset_features,
    run_experiment,
)
from mbfdetect.attacks import default_config
from mbfdetect.data import make_glyph_dataset
from mbfdetect.net import desk_config, predict, train_net

SEED = 3

print("1) train the classifier on rendered glyphs")
images, labels = make_glyph_dataset(800, seed=SEED)
trained = train_net((images, labels), desk_config(10), epochs=40, lr=0.25,
                    seed=SEED, noise_sigma=0.35, label_smoothing=0.1, step_lr=True)
print(f"   train accuracy {trained.train_accuracy:.3f}")

print("2) craft the detection dataset: clean / noisy / adversarial triples")
pool, pool_labels = make_glyph_dataset(300, seed=SEED + 1)
dataset = build_detection_dataset(pool, pool_labels, trained.net,
                                  default_config(AttackId.BIM), seed=SEED,
                                  noise_sigma=0.08)
print(f"   eligible {dataset.n_eligible}, attack successes {dataset.n_attack_success}, "
      f"train/test images {len(dataset.train_ids)}/{len(dataset.test_ids)}")

print("3) features: 16 coefficient magnitudes per captured layer")
feats = extract_dataset_features(dataset.split_records("train"))
print(f"   matrix {feats.matrix.shape}, entries in "
      f"[{feats.matrix.min():.3f}, {feats.matrix.max():.3f}]")
adv = feats.matrix[feats.labels > 0]
ben = feats.matrix[feats.labels < 0]
gap = np.abs(adv.mean(axis=0) - ben.mean(axis=0))
print(f"   largest benign/adversarial mean gap: dim {int(gap.argmax()) + 1}, "
      f"{gap.max():.3f}")

print("4) detector training and held-out evaluation")
cfg = ExperimentConfig("non_transfer", AttackId.BIM, AttackId.BIM, seed=SEED)
report = run_experiment(cfg, {("desk", AttackId.BIM): dataset})
(tp, fn), (fp, tn) = report.confusion
print(f"   AUROC {report.auroc:.4f}  accuracy@0.5 {report.accuracy:.4f}  "
      f"confusion tp={tp} fn={fn} fp={fp} tn={tn}")
