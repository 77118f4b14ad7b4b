"""Distortion descriptors and the ordered distortion set."""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass
from enum import Enum

from src.utils.constants import DEFAULT_BIT_DEPTH, DEFAULT_MEDIAN_WINDOW


class DistortionKind(Enum):
    MEDIAN = "median"
    BIT_DEPTH = "bitdepth"
    GRAYSCALE = "grayscale"


_DEFAULT_PARAMETER = {
    DistortionKind.MEDIAN: DEFAULT_MEDIAN_WINDOW,
    DistortionKind.BIT_DEPTH: DEFAULT_BIT_DEPTH,
    DistortionKind.GRAYSCALE: None,
}


@dataclass(frozen=True)
class DistortionSpec:
    """A distortion kind plus its single integer parameter.

    ``parameter`` is the median window, the bit depth, or None for gray-scale.
    """

    kind: DistortionKind
    parameter: int | None = None

    @property
    def descriptor(self) -> str:
        """Text form, e.g. ``"median:3"`` or ``"grayscale"``."""
        if self.parameter is None:
            return self.kind.value
        return f"{self.kind.value}:{self.parameter}"

    @classmethod
    def parse(cls, text: str) -> DistortionSpec:
        """Parse ``"median:3"``, ``"bitdepth"`` (default parameter) or ``"grayscale"``."""
        name, _, raw = text.strip().lower().partition(":")
        try:
            kind = DistortionKind(name)
        except ValueError:
            known = ", ".join(k.value for k in DistortionKind)
            raise ValueError(f"Unknown distortion {name!r} (expected one of: {known})") from None
        if kind is DistortionKind.GRAYSCALE:
            if raw:
                raise ValueError("grayscale takes no parameter")
            return cls(kind)
        parameter = int(raw) if raw else _DEFAULT_PARAMETER[kind]
        return cls(kind, parameter)


@dataclass(frozen=True)
class DistortionSet:
    """Ordered distortions Ψ. Signature blocks follow this order."""

    specs: tuple[DistortionSpec, ...]

    def __post_init__(self) -> None:
        if not self.specs:
            raise ValueError("A distortion set needs at least one distortion")

    def __len__(self) -> int:
        return len(self.specs)

    def __iter__(self) -> Iterator[DistortionSpec]:
        return iter(self.specs)

    @property
    def descriptor(self) -> str:
        """Comma-joined descriptors, e.g. ``"median:3,bitdepth:5"``."""
        return ",".join(spec.descriptor for spec in self.specs)

    @classmethod
    def parse(cls, text: str | list[str] | tuple[str, ...]) -> DistortionSet:
        parts = text.split(",") if isinstance(text, str) else list(text)
        return cls(tuple(DistortionSpec.parse(part) for part in parts if part.strip()))
