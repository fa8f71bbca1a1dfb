"""Detection of adversarial examples from log-mantissa spectra of network responses.

The library models per-layer network responses with the generalized Gaussian
family, summarizes each layer by the magnitudes of its log-mantissa Fourier
coefficients (which depend only on the family's shape factor), and trains a
kernel SVM on the concatenated magnitudes to separate adversarial from
benign inputs. Statistical machinery for validating the construction (the
Rayleigh law of the coefficient estimation error, KS hypothesis tests) and a
desk-scale end-to-end experiment are included.
"""

from mbfdetect.benford import (
    ActivationRecord,
    AttackId,
    BfCoefficient,
    Group,
    MbfFeature,
    estimate_bf_coefficient,
    exact_bf_coefficient,
    exact_bf_magnitude,
    extract_mbf_features,
    log_mantissa,
)
from mbfdetect.ggd import (
    GgdParams,
    gamma_complex,
    gamma_real,
    ggd_fit_shape,
    ggd_pdf,
    ggd_sample,
)
from mbfdetect.mbfa import read_mbfa, read_mbfa_file, write_mbfa, write_mbfa_file
from mbfdetect.pipeline import (
    DetectionDataset,
    ExperimentConfig,
    build_detection_dataset,
    emit_statistics,
    extract_dataset_features,
    hypothesis_suite,
    run_experiment,
)
from mbfdetect.stats import (
    KsResult,
    RayleighReport,
    ks_one_sample_vs_ggd,
    ks_two_sample,
    pseudo_variance,
    verify_rayleigh,
)
from mbfdetect.svm import (
    EvalReport,
    SvmModel,
    accuracy_at_half,
    auroc,
    decision_value,
    posterior,
    train_svm,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationRecord", "AttackId", "BfCoefficient", "Group", "MbfFeature",
    "estimate_bf_coefficient", "exact_bf_coefficient", "exact_bf_magnitude",
    "extract_mbf_features", "log_mantissa",
    "GgdParams", "gamma_complex", "gamma_real", "ggd_fit_shape", "ggd_pdf",
    "ggd_sample",
    "read_mbfa", "read_mbfa_file", "write_mbfa", "write_mbfa_file",
    "DetectionDataset", "ExperimentConfig", "build_detection_dataset",
    "emit_statistics", "extract_dataset_features", "hypothesis_suite",
    "run_experiment",
    "KsResult", "RayleighReport", "ks_one_sample_vs_ggd", "ks_two_sample",
    "pseudo_variance", "verify_rayleigh",
    "EvalReport", "SvmModel", "accuracy_at_half", "auroc", "decision_value",
    "posterior", "train_svm",
]
