"""Text artifacts: feature CSV, model JSON, and report JSON.

Feature CSV schema: sample_id, group, attack_id, f_0001..f_{D}, floats
printed with 9 significant digits. Models and reports are self-describing
JSON with a schema_version; loading a newer major version fails loudly.
All writers are deterministic: fixed key order, no timestamps.
"""

from __future__ import annotations

import json

import numpy as np

from mbfdetect.benford import AttackId, Group
from mbfdetect.svm import EvalReport, SvmModel

__all__ = [
    "SCHEMA_VERSION",
    "SchemaVersionError",
    "write_features_csv",
    "read_features_csv",
    "save_model",
    "load_model",
    "write_report",
    "read_report",
    "eval_report_payload",
]

SCHEMA_VERSION = "1.0"


class SchemaVersionError(ValueError):
    pass


def _check_schema(version: str, what: str) -> None:
    major = str(version).split(".")[0]
    if major != SCHEMA_VERSION.split(".")[0]:
        raise SchemaVersionError(
            f"{what} has schema version {version}; this build reads {SCHEMA_VERSION}")


def write_features_csv(path, sample_ids, groups, attacks, matrix) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    dim = matrix.shape[1] if matrix.size else 0
    header = ["sample_id", "group", "attack_id"] + [f"f_{d + 1:04d}" for d in range(dim)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for sid, group, attack, row in zip(sample_ids, groups, attacks, matrix):
            cells = [str(int(sid)), Group(group).name.lower(), AttackId(attack).name.lower()]
            cells += [f"{v:.9g}" for v in row]
            fh.write(",".join(cells) + "\n")


def read_features_csv(path):
    """Returns (sample_ids, groups, attacks, matrix)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:3] != ["sample_id", "group", "attack_id"]:
            raise ValueError(f"not a feature CSV: header starts {header[:3]}")
        dim = len(header) - 3
        ids, groups, attacks, rows = [], [], [], []
        for line_no, line in enumerate(fh, start=2):
            parts = line.strip().split(",")
            if len(parts) != 3 + dim:
                raise ValueError(f"line {line_no}: expected {3 + dim} cells, got {len(parts)}")
            ids.append(int(parts[0]))
            groups.append(Group[parts[1].upper()])
            attacks.append(AttackId[parts[2].upper()])
            rows.append([float(v) for v in parts[3:]])
    matrix = np.asarray(rows, dtype=np.float64) if rows else np.empty((0, dim))
    return ids, groups, attacks, matrix


def save_model(path, model: SvmModel, extraction: dict) -> None:
    """Model plus the extraction settings it expects (T, mean_subtract, ...)."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": "mbf-svm-detector",
        "kernel": model.kernel,
        "gamma": model.gamma,
        "C": model.C,
        "bias": model.bias,
        "platt_a": model.platt_a,
        "platt_b": model.platt_b,
        "feature_dim": model.feature_dim,
        "kkt_residual": model.kkt_residual,
        "dual_coeffs": model.dual_coeffs.tolist(),
        "support_vectors": model.support_vectors.tolist(),
        "feature_mean": None if model.feature_mean is None else model.feature_mean.tolist(),
        "feature_std": None if model.feature_std is None else model.feature_std.tolist(),
        "extraction": extraction,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path):
    """Returns (SvmModel, extraction dict)."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    _check_schema(payload.get("schema_version", "0"), "model file")
    if payload.get("kind") != "mbf-svm-detector":
        raise ValueError(f"not a detector model file: kind={payload.get('kind')!r}")
    mean = payload.get("feature_mean")
    std = payload.get("feature_std")
    model = SvmModel(
        support_vectors=np.asarray(payload["support_vectors"], dtype=np.float64),
        dual_coeffs=np.asarray(payload["dual_coeffs"], dtype=np.float64),
        bias=float(payload["bias"]),
        kernel=payload["kernel"],
        gamma=float(payload["gamma"]),
        C=float(payload["C"]),
        platt_a=float(payload["platt_a"]),
        platt_b=float(payload["platt_b"]),
        feature_dim=int(payload["feature_dim"]),
        kkt_residual=float(payload["kkt_residual"]),
        feature_mean=None if mean is None else np.asarray(mean, dtype=np.float64),
        feature_std=None if std is None else np.asarray(std, dtype=np.float64),
    )
    return model, payload.get("extraction", {})


def write_report(path, kind: str, payload: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind}
    doc.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    _check_schema(doc.get("schema_version", "0"), "report file")
    return doc


def eval_report_payload(report: EvalReport) -> dict:
    (tp, fn), (fp, tn) = report.confusion
    return {
        "auroc": report.auroc,
        "accuracy": report.accuracy,
        "confusion": {"tp": tp, "fn": fn, "fp": fp, "tn": tn},
        "n_benign": report.n_benign,
        "n_adversarial": report.n_adversarial,
    }
