"""MBFA: the binary activation-dump format.

Layout, all integers and floats little-endian:

    magic   4 bytes  "MBFA"
    version u16      currently 1
    count   u32      number of records
    layers  u16      number of layers per record
    per layer: u32   entry count
    per record:
        sample_id u64, group u8, attack_id u8, true_class u16,
        then each layer's entries as float32, concatenated in layer order.

Records are fixed-stride, so a reader can seek to any record directly.
Every parse failure raises a distinct error carrying the byte offset.
"""

from __future__ import annotations

import struct

import numpy as np

from mbfdetect.benford import ActivationRecord, AttackId, Group

__all__ = [
    "MbfaError",
    "MbfaBadMagic",
    "MbfaVersionMismatch",
    "MbfaTruncated",
    "MbfaLayerMismatch",
    "write_mbfa",
    "read_mbfa",
    "write_mbfa_file",
    "read_mbfa_file",
]

MAGIC = b"MBFA"
VERSION = 1


class MbfaError(ValueError):
    """Base for format errors; offset is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class MbfaBadMagic(MbfaError):
    pass


class MbfaVersionMismatch(MbfaError):
    pass


class MbfaTruncated(MbfaError):
    def __init__(self, message: str, offset: int, record_index: int):
        super().__init__(f"{message} (record {record_index})", offset)
        self.record_index = record_index


class MbfaLayerMismatch(MbfaError):
    pass


def _header_size(layer_count: int) -> int:
    return 4 + 2 + 4 + 2 + 4 * layer_count


def _record_stride(layer_sizes) -> int:
    return 8 + 1 + 1 + 2 + 4 * sum(layer_sizes)


def write_mbfa(records) -> bytes:
    """Serialize records sharing one layer table; payloads stored as float32.

    Raises:
        MbfaLayerMismatch: if any record's layer sizes disagree with the first's.
    """
    records = list(records)
    layer_sizes = records[0].layer_sizes if records else ()
    out = bytearray()
    out += MAGIC
    out += struct.pack("<HIH", VERSION, len(records), len(layer_sizes))
    for size in layer_sizes:
        out += struct.pack("<I", size)
    for index, record in enumerate(records):
        if record.layer_sizes != tuple(layer_sizes):
            raise MbfaLayerMismatch(
                f"record {index} layer sizes {record.layer_sizes} do not match "
                f"the layer table {tuple(layer_sizes)}", len(out))
        out += struct.pack("<QBBH", record.sample_id, int(record.group),
                           int(record.attack_id), record.true_class)
        for layer in record.layers:
            out += np.asarray(layer, dtype="<f4").tobytes()
    return bytes(out)


def read_mbfa(data: bytes) -> tuple:
    """Parse a byte string into records; inverse of write_mbfa for f32 payloads."""
    if len(data) < 4 or data[:4] != MAGIC:
        raise MbfaBadMagic(f"expected magic {MAGIC!r}, found {bytes(data[:4])!r}", 0)
    if len(data) < _header_size(0):
        raise MbfaTruncated("header cut short", len(data), 0)
    version, count, layer_count = struct.unpack_from("<HIH", data, 4)
    if version != VERSION:
        raise MbfaVersionMismatch(f"cannot read version {version}, expected {VERSION}", 4)
    header = _header_size(layer_count)
    if len(data) < header:
        raise MbfaTruncated("layer table cut short", len(data), 0)
    layer_sizes = struct.unpack_from(f"<{layer_count}I", data, 12)
    stride = _record_stride(layer_sizes)
    expected = header + count * stride
    if len(data) < expected:
        bad_index = (len(data) - header) // stride
        raise MbfaTruncated(
            f"file ends inside a record: {len(data)} bytes, expected {expected}",
            len(data), bad_index)
    if len(data) > expected:
        raise MbfaLayerMismatch(
            f"{len(data) - expected} trailing bytes; payload disagrees with the "
            "layer table or record count", expected)

    records = []
    offset = header
    for _ in range(count):
        sample_id, group, attack_id, true_class = struct.unpack_from("<QBBH", data, offset)
        offset += 12
        layers = []
        for size in layer_sizes:
            layers.append(np.frombuffer(data, dtype="<f4", count=size, offset=offset).copy())
            offset += 4 * size
        records.append(ActivationRecord(
            sample_id=sample_id, group=Group(group), attack_id=AttackId(attack_id),
            true_class=true_class, layers=tuple(layers)))
    return tuple(records)


def write_mbfa_file(path, records) -> None:
    with open(path, "wb") as fh:
        fh.write(write_mbfa(records))


def read_mbfa_file(path) -> tuple:
    with open(path, "rb") as fh:
        return read_mbfa(fh.read())
