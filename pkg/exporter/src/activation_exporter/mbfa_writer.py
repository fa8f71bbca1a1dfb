"""Standalone writer for the MBFA activation-dump format.

This mirrors the consumer's documented byte layout and deliberately shares no
code with it: the format is the contract. All integers and floats are
little-endian; payloads are float32.

    magic   4 bytes  "MBFA"
    version u16      1
    count   u32      records
    layers  u16      layers per record
    per layer: u32   entry count
    per record: sample_id u64, group u8, attack_id u8, true_class u16,
                float32 payloads per layer, concatenated.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"MBFA"
VERSION = 1

GROUP_CODES = {"clean": 0, "noisy": 1, "adversarial": 2}
ATTACK_CODES = {"none": 0, "fgsm": 1, "bim": 2, "rpgd": 3, "deepfool": 4, "cwl2": 5}


def write_records(path, records) -> None:
    """records: iterable of (sample_id, group, attack, true_class, [layer arrays])."""
    records = list(records)
    layer_sizes = [int(np.asarray(layer).size) for layer in records[0][4]] if records else []
    out = bytearray()
    out += MAGIC
    out += struct.pack("<HIH", VERSION, len(records), len(layer_sizes))
    for size in layer_sizes:
        out += struct.pack("<I", size)
    for sample_id, group, attack, true_class, layers in records:
        sizes = [int(np.asarray(layer).size) for layer in layers]
        if sizes != layer_sizes:
            raise ValueError(f"record {sample_id} layer sizes {sizes} != table {layer_sizes}")
        out += struct.pack("<QBBH", int(sample_id), GROUP_CODES[group],
                           ATTACK_CODES[attack], int(true_class))
        for layer in layers:
            out += np.ascontiguousarray(np.asarray(layer).ravel(), dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(out))
