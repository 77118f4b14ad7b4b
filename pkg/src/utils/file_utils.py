"""Path helpers and atomic file writes for run directories."""

from __future__ import annotations

import contextlib
import os
import tempfile
from pathlib import Path

from src.utils.logger import get_logger

logger = get_logger("utils.file_utils")

# Characters replaced when a config value becomes part of an artifact name.
_UNSAFE_NAME_CHARS = '<>:"/\\|?*, '


def atomic_write_bytes(path: Path, payload: bytes) -> Path:
    """Write ``payload`` to ``path`` via a temp file in the same directory and a rename.

    Readers never observe a partially written artifact.

    Args:
        path: Destination file path.
        payload: Bytes to write.

    Returns:
        The destination path.

    Raises:
        OSError: If the write or rename fails. The temp file is removed.
    """
    ensure_dir(path.parent)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    tmp_path = Path(tmp_name)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_path, path)
    except BaseException:
        with contextlib.suppress(OSError):
            tmp_path.unlink()
        raise

    logger.debug("Wrote %d bytes: %s", len(payload), path)
    return path


def atomic_write_text(path: Path, text: str) -> Path:
    """UTF-8 variant of :func:`atomic_write_bytes`."""
    return atomic_write_bytes(path, text.encode("utf-8"))


def require_file(path: Path, what: str) -> Path:
    """Return ``path`` if it is an existing file, else raise naming ``what``.

    Raises:
        FileNotFoundError: If the file is missing.
    """
    if not path.is_file():
        raise FileNotFoundError(f"Missing {what}: {path}")
    return path


def artifact_slug(*parts: str) -> str:
    """Join config values into a filesystem-safe artifact stem.

    ``artifact_slug("victim", "median:3,bitdepth:5")`` -> ``"victim__median3-bitdepth5"``.
    """
    cleaned = []
    for part in parts:
        slug = part.replace(",", "-").replace(":", "")
        for char in _UNSAFE_NAME_CHARS:
            slug = slug.replace(char, "_")
        while "__" in slug:
            slug = slug.replace("__", "_")
        cleaned.append(slug.strip("._-") or "none")
    return "__".join(cleaned)


def ensure_dir(path: Path) -> Path:
    """Create ``path`` (and parents) if needed and return it."""
    path.mkdir(parents=True, exist_ok=True)
    return path
