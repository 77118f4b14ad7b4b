"""Tests for the ADVT tensor container."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import pytest

from src.storage.container import ContainerFormatError, ContainerRecord, TensorContainer


def labeled_container() -> TensorContainer:
    rng = np.random.default_rng(0)
    return TensorContainer(
        header={"kind": "dataset", "split": "test", "n_classes": 3},
        records=[
            ContainerRecord(array=rng.random((2, 2, 3)).astype(np.float32), label=label)
            for label in (0, 2, 1)
        ],
        n_classes=3,
    )


class TestRoundTrip:
    def test_arrays_labels_and_header_survive(self):
        original = labeled_container()
        restored = TensorContainer.from_bytes(original.to_bytes())
        assert restored.header == original.header
        assert restored.n_classes == 3
        assert [r.label for r in restored.records] == [0, 2, 1]
        for a, b in zip(original.records, restored.records):
            np.testing.assert_array_equal(a.array, b.array)
            assert b.array.dtype == np.float32

    def test_reserialization_is_byte_identical(self):
        data = labeled_container().to_bytes()
        assert TensorContainer.from_bytes(data).to_bytes() == data

    def test_metadata_records(self):
        container = TensorContainer(
            header={"kind": "checkpoint"},
            records=[ContainerRecord(array=np.zeros(3), metadata={"name": "dense0.bias"})],
        )
        restored = TensorContainer.from_bytes(container.to_bytes())
        assert restored.records[0].metadata == {"name": "dense0.bias"}
        assert restored.records[0].label is None

    def test_empty_container(self):
        restored = TensorContainer.from_bytes(TensorContainer(header={"kind": "x"}).to_bytes())
        assert restored.records == []

    def test_save_and_load_checks_kind(self, tmp_path: Path):
        path = labeled_container().save(tmp_path / "nested" / "test.advt")
        assert TensorContainer.load(path, "dataset").kind == "dataset"
        with pytest.raises(ContainerFormatError):
            TensorContainer.load(path, "checkpoint")

    def test_load_missing_file(self, tmp_path: Path):
        with pytest.raises(FileNotFoundError):
            TensorContainer.load(tmp_path / "absent.advt")


class TestMalformed:
    def test_bad_magic(self):
        data = b"NOPE" + labeled_container().to_bytes()[4:]
        with pytest.raises(ContainerFormatError) as info:
            TensorContainer.from_bytes(data)
        assert info.value.offset == 0

    def test_unsupported_version(self):
        data = bytearray(labeled_container().to_bytes())
        data[4:6] = struct.pack("<H", 99)
        with pytest.raises(ContainerFormatError, match="version") as info:
            TensorContainer.from_bytes(bytes(data))
        assert info.value.offset == 4

    def test_truncation_reports_offset(self):
        data = labeled_container().to_bytes()
        with pytest.raises(ContainerFormatError, match="Truncated") as info:
            TensorContainer.from_bytes(data[:-5])
        assert 0 < info.value.offset < len(data)

    def test_truncated_preamble(self):
        with pytest.raises(ContainerFormatError):
            TensorContainer.from_bytes(b"ADVT")

    def test_trailing_bytes(self):
        data = labeled_container().to_bytes()
        with pytest.raises(ContainerFormatError, match="trailing") as info:
            TensorContainer.from_bytes(data + b"\x00\x00")
        assert info.value.offset == len(data)

    def test_label_not_below_class_count(self):
        data = bytearray(labeled_container().to_bytes())
        data[8:10] = struct.pack("<H", 2)
        with pytest.raises(ContainerFormatError, match="label"):
            TensorContainer.from_bytes(bytes(data))

    def test_writing_out_of_range_label(self):
        container = labeled_container()
        container.records[1].label = 3
        with pytest.raises(ValueError):
            container.to_bytes()

    def test_mixed_labels_rejected(self):
        container = labeled_container()
        container.records[0].label = None
        with pytest.raises(ValueError):
            container.to_bytes()
