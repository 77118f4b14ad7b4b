"""The ``ADVT`` tensor container.

Little-endian layout::

    magic "ADVT" | version u16 | flags u16 | n_classes u16 | count u32
    header_len u32 | header JSON (UTF-8)
    count x ( ndim u8 | dims u32 * ndim | payload f32 * prod(dims)
              [label u16]                 if flags & LABELS
              [meta_len u32 | meta JSON]  if flags & METADATA )

JSON is written with sorted keys and compact separators, so a
load/save cycle reproduces the input bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from src.utils.constants import (
    CONTAINER_FLAG_LABELS,
    CONTAINER_FLAG_METADATA,
    CONTAINER_MAGIC,
    CONTAINER_VERSION,
)
from src.utils.file_utils import atomic_write_bytes, require_file
from src.utils.logger import get_logger

logger = get_logger("storage.container")

_PREAMBLE = struct.Struct("<4sHHHI")
_U32 = struct.Struct("<I")
_U16 = struct.Struct("<H")
_U8 = struct.Struct("<B")
_PAYLOAD_DTYPE = np.dtype("<f4")


class ContainerFormatError(ValueError):
    """Malformed container bytes; ``offset`` is where reading failed."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def _dump_json(value: dict[str, Any]) -> bytes:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


@dataclass
class ContainerRecord:
    """One array with its optional label and metadata."""

    array: np.ndarray
    label: int | None = None
    metadata: dict[str, Any] | None = None


@dataclass
class TensorContainer:
    """File-level header plus an ordered list of records.

    Attributes:
        header: File-level metadata (``kind`` plus kind-specific fields).
        records: Records in file order.
        n_classes: Exclusive upper bound of record labels (0 when unlabeled).
    """

    header: dict[str, Any]
    records: list[ContainerRecord] = field(default_factory=list)
    n_classes: int = 0

    @property
    def kind(self) -> str:
        return str(self.header.get("kind", ""))

    def _flags(self) -> int:
        labeled = {record.label is not None for record in self.records}
        described = {record.metadata is not None for record in self.records}
        if len(labeled) > 1 or len(described) > 1:
            raise ValueError("Labels and metadata must be present on all records or on none")
        flags = 0
        if labeled == {True}:
            flags |= CONTAINER_FLAG_LABELS
        if described == {True}:
            flags |= CONTAINER_FLAG_METADATA
        return flags

    def to_bytes(self) -> bytes:
        """Serialize the container.

        Raises:
            ValueError: If a label is out of range or records are inconsistent.
        """
        flags = self._flags()
        header = _dump_json(self.header)
        parts = [
            _PREAMBLE.pack(CONTAINER_MAGIC, CONTAINER_VERSION, flags, self.n_classes, len(self.records)),
            _U32.pack(len(header)),
            header,
        ]
        for index, record in enumerate(self.records):
            array = np.ascontiguousarray(record.array, dtype=_PAYLOAD_DTYPE)
            parts.append(_U8.pack(array.ndim))
            parts.extend(_U32.pack(dim) for dim in array.shape)
            parts.append(array.tobytes())
            if flags & CONTAINER_FLAG_LABELS:
                label = int(record.label)  # type: ignore[arg-type]
                if not 0 <= label < self.n_classes:
                    raise ValueError(f"Record {index}: label {label} outside [0, {self.n_classes})")
                parts.append(_U16.pack(label))
            if flags & CONTAINER_FLAG_METADATA:
                meta = _dump_json(record.metadata or {})
                parts.append(_U32.pack(len(meta)))
                parts.append(meta)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> TensorContainer:
        """Parse container bytes.

        Raises:
            ContainerFormatError: On bad magic, unsupported version, truncation,
                out-of-range labels, malformed JSON, or trailing bytes.
        """
        reader = _Reader(data)
        magic, version, flags, n_classes, count = reader.unpack(_PREAMBLE, "preamble")
        if magic != CONTAINER_MAGIC:
            raise ContainerFormatError(f"Bad magic {magic!r}, expected {CONTAINER_MAGIC!r}", 0)
        if version != CONTAINER_VERSION:
            raise ContainerFormatError(
                f"Unsupported version {version}, expected {CONTAINER_VERSION}", 4
            )
        header = reader.json("header")
        records = []
        for index in range(count):
            (ndim,) = reader.unpack(_U8, f"record {index} rank")
            shape = tuple(reader.unpack(_U32, f"record {index} dim")[0] for _ in range(ndim))
            size = int(np.prod(shape, dtype=np.int64)) * _PAYLOAD_DTYPE.itemsize
            payload = reader.take(size, f"record {index} payload")
            array = np.frombuffer(payload, dtype=_PAYLOAD_DTYPE).reshape(shape).astype(np.float32)
            label = None
            if flags & CONTAINER_FLAG_LABELS:
                offset = reader.offset
                (label,) = reader.unpack(_U16, f"record {index} label")
                if label >= n_classes:
                    raise ContainerFormatError(
                        f"Record {index}: label {label} not below n_classes {n_classes}", offset
                    )
            metadata = reader.json(f"record {index} metadata") if flags & CONTAINER_FLAG_METADATA else None
            records.append(ContainerRecord(array=array, label=label, metadata=metadata))
        if reader.offset != len(data):
            raise ContainerFormatError(
                f"{len(data) - reader.offset} unexpected trailing bytes", reader.offset
            )
        return cls(header=header, records=records, n_classes=n_classes)

    def save(self, path: Path) -> Path:
        payload = self.to_bytes()
        atomic_write_bytes(path, payload)
        logger.info("Saved %s container (%d records) to %s", self.kind or "untyped", len(self.records), path)
        return path

    @classmethod
    def load(cls, path: Path, expected_kind: str | None = None) -> TensorContainer:
        """Read a container file, optionally checking its ``kind``.

        Raises:
            FileNotFoundError: If ``path`` does not exist.
            ContainerFormatError: If the bytes are malformed or the kind differs.
        """
        require_file(path, expected_kind or "container")
        container = cls.from_bytes(path.read_bytes())
        if expected_kind is not None and container.kind != expected_kind:
            raise ContainerFormatError(
                f"{path.name} holds a {container.kind!r} container, expected {expected_kind!r}", 0
            )
        logger.debug("Loaded %s container (%d records) from %s", container.kind, len(container.records), path)
        return container


class _Reader:
    """Cursor over container bytes that reports truncation with offsets."""

    def __init__(self, data: bytes) -> None:
        self._data = memoryview(data)
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        available = len(self._data) - self.offset
        if size > available:
            raise ContainerFormatError(
                f"Truncated {what}: expected {size} bytes, only {available} available", self.offset
            )
        chunk = bytes(self._data[self.offset : self.offset + size])
        self.offset += size
        return chunk

    def unpack(self, layout: struct.Struct, what: str) -> tuple[Any, ...]:
        return layout.unpack(self.take(layout.size, what))

    def json(self, what: str) -> dict[str, Any]:
        (length,) = self.unpack(_U32, f"{what} length")
        start = self.offset
        raw = self.take(length, what)
        try:
            value = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ContainerFormatError(f"Malformed {what} JSON: {exc}", start) from exc
        if not isinstance(value, dict):
            raise ContainerFormatError(f"{what} must be a JSON object", start)
        return value
