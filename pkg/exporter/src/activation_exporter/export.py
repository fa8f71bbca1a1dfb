"""Capture per-layer responses of a PyTorch model and write MBFA files.

The exporter is stateless and format-only: raw post-activation values go to
disk untouched (no normalization, no feature math). Capture names resolve
against the model's named modules; the pseudo-layers "@logits" and
"@softmax" capture the model output before/after a softmax and let the
consumer keep its convention of a trailing softmax layer.

Adversarial crafting is delegated to the foolbox toolkit when both an attack
block and the toolkit are present; without the toolkit only the clean and
noisy files are written and the result says so.
"""

from __future__ import annotations

import importlib
from dataclasses import dataclass

import numpy as np
import torch

from activation_exporter.manifest import ExportManifest
from activation_exporter.mbfa_writer import write_records

__all__ = ["ExportResult", "export"]

_PSEUDO_LAYERS = ("@logits", "@softmax")


@dataclass(frozen=True)
class ExportResult:
    files: dict
    n_images: int
    layer_sizes: tuple
    attack_ran: bool
    notes: tuple = ()


def _load_model(manifest: ExportManifest) -> torch.nn.Module:
    if manifest.model_format == "torch-pickle":
        model = torch.load(manifest.model_path, weights_only=False)
    else:
        module_name, func_name = manifest.model_builder.split(":", 1)
        builder = getattr(importlib.import_module(module_name), func_name)
        model = builder()
        state = torch.load(manifest.model_path, weights_only=True)
        model.load_state_dict(state)
    if not isinstance(model, torch.nn.Module):
        raise TypeError(f"loaded object is {type(model).__name__}, not a Module")
    return model.eval()


def _resolve_layers(model: torch.nn.Module, names) -> dict:
    modules = dict(model.named_modules())
    resolved = {}
    for name in names:
        if name in _PSEUDO_LAYERS:
            continue
        if name not in modules:
            raise KeyError(
                f"layer {name!r} not found; available: {sorted(m for m in modules if m)}")
        resolved[name] = modules[name]
    return resolved


def _capture(model, layer_names, resolved, images, batch_size) -> list:
    """Forward the images and collect one flat float32 array per capture name."""
    buffers = {name: [] for name in layer_names}
    hooks = []

    def make_hook(name):
        def hook(_module, _inputs, output):
            buffers[name].append(output.detach().reshape(output.shape[0], -1)
                                 .to(torch.float32).cpu().numpy())
        return hook

    for name, module in resolved.items():
        hooks.append(module.register_forward_hook(make_hook(name)))
    try:
        with torch.no_grad():
            for start in range(0, images.shape[0], batch_size):
                batch = torch.from_numpy(images[start:start + batch_size])
                logits = model(batch)
                flat = logits.reshape(logits.shape[0], -1)
                if "@logits" in buffers:
                    buffers["@logits"].append(flat.to(torch.float32).cpu().numpy())
                if "@softmax" in buffers:
                    buffers["@softmax"].append(
                        torch.softmax(flat, dim=1).to(torch.float32).cpu().numpy())
    finally:
        for handle in hooks:
            handle.remove()
    return [np.concatenate(buffers[name], axis=0) for name in layer_names]


def _predict(model, images, batch_size) -> np.ndarray:
    out = []
    with torch.no_grad():
        for start in range(0, images.shape[0], batch_size):
            batch = torch.from_numpy(images[start:start + batch_size])
            out.append(model(batch).argmax(dim=1).cpu().numpy())
    return np.concatenate(out)


def _craft_adversarial(model, images, labels, attack: dict):
    """Run the named attack through foolbox; None if the toolkit is absent."""
    try:
        fb = importlib.import_module("foolbox")
    except ModuleNotFoundError:
        return None
    fmodel = fb.PyTorchModel(model, bounds=(0.0, 1.0))
    params = {k: v for k, v in attack.items() if k != "name"}
    name = attack["name"]
    if name == "bim":
        runner = fb.attacks.LinfBasicIterativeAttack(
            abs_stepsize=params["stepsize"], steps=int(params["iterations"]))
        eps = params["eps"]
    elif name == "rpgd":
        runner = fb.attacks.LinfPGD(abs_stepsize=params["stepsize"],
                                    steps=int(params["iterations"]), random_start=True)
        eps = params["eps"]
    elif name == "deepfool":
        runner = fb.attacks.L2DeepFoolAttack(steps=int(params["max_steps"]))
        eps = None
    else:  # cwl2
        runner = fb.attacks.L2CarliniWagnerAttack(
            binary_search_steps=int(params["binary_search_steps"]),
            confidence=params["confidence"],
            stepsize=params["learning_rate"],
            steps=int(params["max_iterations"]))
        eps = None
    x = torch.from_numpy(images)
    y = torch.from_numpy(labels.astype(np.int64))
    _raw, clipped, success = runner(fmodel, x, y, epsilons=eps)
    return clipped.cpu().numpy().astype(np.float32), success.cpu().numpy()


def export(manifest: ExportManifest) -> ExportResult:
    """Write one MBFA file per group into the manifest's output directory.

    The dataset is an .npz with "images" (N, C, H, W) float in [0, 1] and
    "labels" (N,). Provenance ids are the dataset indices, identical across
    the clean/noisy/adversarial files so triples pair up downstream.
    """
    import os

    model = _load_model(manifest)
    resolved = _resolve_layers(model, manifest.layers)
    data = np.load(manifest.dataset_path)
    images = np.ascontiguousarray(data["images"], dtype=np.float32)
    labels = np.asarray(data["labels"], dtype=np.int64)
    if images.shape[0] != labels.shape[0]:
        raise ValueError("images and labels are misaligned")
    n = images.shape[0]

    generator = torch.Generator().manual_seed(manifest.seed)
    noise = torch.randn(tuple(images.shape), generator=generator).numpy()
    noisy = np.clip(images + manifest.noise_sigma * noise.astype(np.float32), 0.0, 1.0)

    os.makedirs(manifest.output_dir, exist_ok=True)
    notes = []
    groups = {"clean": (images, "none"), "noisy": (noisy, "none")}

    attack_ran = False
    if manifest.attack is not None:
        crafted = _craft_adversarial(model, images, labels, manifest.attack)
        if crafted is None:
            notes.append("attack toolkit (foolbox) not installed; "
                         "exported clean and noisy groups only")
        else:
            adv, success = crafted
            if not bool(np.all(success)):
                # mirror the consumer's drop rule: failed images simply have
                # no adversarial row; ids stay pairable
                notes.append(f"attack failed on {int((~success).sum())}/{n} images; "
                             "their rows are omitted from the adversarial file")
            groups["adversarial"] = (adv, manifest.attack["name"], np.flatnonzero(success))
            attack_ran = True

    files = {}
    layer_sizes = None
    for group, entry in groups.items():
        batch, attack_name = entry[0], entry[1]
        keep = entry[2] if len(entry) > 2 else np.arange(n)
        captures = _capture(model, manifest.layers, resolved, batch,
                            manifest.batch_size)
        sizes = tuple(c.shape[1] for c in captures)
        if layer_sizes is None:
            layer_sizes = sizes
        elif sizes != layer_sizes:
            raise RuntimeError(f"layer table changed between groups: {sizes} vs {layer_sizes}")
        records = [(int(idx), group, attack_name, int(labels[idx]),
                    [captures[l][idx] for l in range(len(captures))])
                   for idx in keep]
        path = os.path.join(manifest.output_dir, f"{group}.mbfa")
        write_records(path, records)
        files[group] = path

    return ExportResult(files=files, n_images=n, layer_sizes=layer_sizes,
                        attack_ran=attack_ran, notes=tuple(notes))
