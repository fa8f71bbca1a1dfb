"""Binary format: round trips and every corruption case."""

import struct

import numpy as np
import pytest

from mbfdetect.benford import ActivationRecord, AttackId, Group
from mbfdetect.mbfa import (
    MbfaBadMagic,
    MbfaLayerMismatch,
    MbfaTruncated,
    MbfaVersionMismatch,
    read_mbfa,
    read_mbfa_file,
    write_mbfa,
    write_mbfa_file,
)


def random_records(n, layer_sizes=(6, 4, 3), seed=0):
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        adversarial = bool(rng.integers(0, 2))
        records.append(ActivationRecord(
            sample_id=int(rng.integers(0, 2 ** 63)),
            group=Group.ADVERSARIAL if adversarial else Group(int(rng.integers(0, 2))),
            attack_id=AttackId.BIM if adversarial else AttackId.NONE,
            true_class=int(rng.integers(0, 10)),
            # float32 grid so the f32 payload round-trips bit for bit
            layers=tuple(rng.normal(0, 3, s).astype(np.float32).astype(np.float64)
                         for s in layer_sizes)))
    return records


def assert_records_equal(a, b):
    assert len(a) == len(b)
    for ra, rb in zip(a, b):
        assert ra.sample_id == rb.sample_id
        assert ra.group == rb.group
        assert ra.attack_id == rb.attack_id
        assert ra.true_class == rb.true_class
        for la, lb in zip(ra.layers, rb.layers):
            np.testing.assert_array_equal(la, lb)


class TestRoundTrip:
    def test_empty_file(self):
        data = write_mbfa([])
        assert read_mbfa(data) == ()

    def test_single_record(self):
        records = random_records(1)
        assert_records_equal(read_mbfa(write_mbfa(records)), records)

    def test_thousand_random_records(self):
        records = random_records(1000, layer_sizes=(5, 7), seed=3)
        assert_records_equal(read_mbfa(write_mbfa(records)), records)

    def test_file_round_trip(self, tmp_path):
        records = random_records(20, seed=5)
        path = tmp_path / "dump.mbfa"
        write_mbfa_file(path, records)
        assert_records_equal(read_mbfa_file(path), records)

    def test_write_is_deterministic(self):
        records = random_records(10, seed=9)
        assert write_mbfa(records) == write_mbfa(records)


class TestCorruption:
    def test_bad_magic(self):
        data = bytearray(write_mbfa(random_records(2)))
        data[:4] = b"NOPE"
        with pytest.raises(MbfaBadMagic) as err:
            read_mbfa(bytes(data))
        assert err.value.offset == 0

    def test_version_mismatch(self):
        data = bytearray(write_mbfa(random_records(2)))
        struct.pack_into("<H", data, 4, 99)
        with pytest.raises(MbfaVersionMismatch) as err:
            read_mbfa(bytes(data))
        assert err.value.offset == 4

    def test_truncated_mid_record(self):
        records = random_records(4, layer_sizes=(6, 4, 3))
        data = write_mbfa(records)
        header = 4 + 2 + 4 + 2 + 4 * 3
        stride = 12 + 4 * 13
        cut = header + 2 * stride + 7  # inside the third record
        with pytest.raises(MbfaTruncated) as err:
            read_mbfa(data[:cut])
        assert err.value.record_index == 2
        assert err.value.offset == cut

    def test_trailing_bytes_flag_layer_mismatch(self):
        data = write_mbfa(random_records(3))
        with pytest.raises(MbfaLayerMismatch) as err:
            read_mbfa(data + b"\x00\x00\x00\x00")
        assert err.value.offset == len(data)

    def test_heterogeneous_records_rejected_on_write(self):
        a = random_records(1, layer_sizes=(6, 4, 3))[0]
        b = random_records(1, layer_sizes=(6, 4, 2), seed=1)[0]
        with pytest.raises(MbfaLayerMismatch):
            write_mbfa([a, b])

    def test_header_cut_short(self):
        data = write_mbfa(random_records(1))
        with pytest.raises(MbfaTruncated):
            read_mbfa(data[:9])
