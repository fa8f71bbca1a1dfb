"""Export manifest: what to load, what to capture, what to write.

The attack block, when present, is validated against the published
hyperparameter schema per method; unknown fields or a missing required field
fail before any model is loaded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

ATTACK_SCHEMAS = {
    "bim": {"eps": float, "stepsize": float, "iterations": int},
    "rpgd": {"eps": float, "stepsize": float, "iterations": int},
    "deepfool": {"max_steps": int},
    "cwl2": {"binary_search_steps": int, "confidence": float,
             "learning_rate": float, "max_iterations": int},
}

MODEL_FORMATS = ("torch-pickle", "state-dict")


@dataclass(frozen=True)
class ExportManifest:
    model_format: str
    model_path: str
    layers: tuple
    dataset_path: str
    output_dir: str
    seed: int
    noise_sigma: float = 0.02
    attack: dict | None = None
    model_builder: str = ""  # "module:callable" for the state-dict format
    batch_size: int = 64

    def __post_init__(self):
        if self.model_format not in MODEL_FORMATS:
            raise ValueError(f"model format must be one of {MODEL_FORMATS}")
        if self.model_format == "state-dict" and ":" not in self.model_builder:
            raise ValueError('state-dict models need a builder "module:callable"')
        if not self.layers:
            raise ValueError("capture layer list must be nonempty")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.attack is not None:
            _validate_attack(self.attack)


def _validate_attack(attack: dict) -> None:
    name = attack.get("name")
    if name not in ATTACK_SCHEMAS:
        raise ValueError(f"unknown attack {name!r}; supported: {sorted(ATTACK_SCHEMAS)}")
    schema = ATTACK_SCHEMAS[name]
    params = {k: v for k, v in attack.items() if k != "name"}
    unknown = set(params) - set(schema)
    if unknown:
        raise ValueError(f"attack {name}: unknown fields {sorted(unknown)}")
    missing = set(schema) - set(params)
    if missing:
        raise ValueError(f"attack {name}: missing fields {sorted(missing)}")
    for key, kind in schema.items():
        if not isinstance(params[key], (int, float)):
            raise ValueError(f"attack {name}: field {key} must be numeric")
        if kind is int and int(params[key]) != params[key]:
            raise ValueError(f"attack {name}: field {key} must be an integer")


def load_manifest(path) -> ExportManifest:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    model = doc.get("model", {})
    return ExportManifest(
        model_format=model.get("format", ""),
        model_path=model.get("path", ""),
        model_builder=model.get("builder", ""),
        layers=tuple(doc.get("layers", ())),
        dataset_path=doc.get("dataset", ""),
        output_dir=doc.get("output_dir", "."),
        seed=int(doc.get("seed", 0)),
        noise_sigma=float(doc.get("noise_sigma", 0.02)),
        attack=doc.get("attack"),
        batch_size=int(doc.get("batch_size", 64)),
    )
