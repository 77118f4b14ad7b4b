"""Tests for src/utils/file_utils.py -- atomic writes and artifact names."""

from pathlib import Path

import pytest

from src.utils.file_utils import (
    artifact_slug,
    atomic_write_bytes,
    atomic_write_text,
    ensure_dir,
    require_file,
)

# ---------------------------------------------------------------------------
# atomic writes
# ---------------------------------------------------------------------------


class TestAtomicWrite:
    def test_creates_parent_directories(self, tmp_path: Path):
        target = tmp_path / "a" / "b" / "out.bin"
        atomic_write_bytes(target, b"\x00\x01")
        assert target.read_bytes() == b"\x00\x01"

    def test_replaces_existing_file(self, tmp_path: Path):
        target = tmp_path / "out.txt"
        target.write_text("old", encoding="utf-8")
        atomic_write_text(target, "new ✓")
        assert target.read_text(encoding="utf-8") == "new ✓"

    def test_leaves_no_temp_files(self, tmp_path: Path):
        atomic_write_text(tmp_path / "out.txt", "x")
        assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]

    def test_failed_write_cleans_up(self, tmp_path: Path, monkeypatch):
        def broken_replace(src, dst):
            raise OSError("disk full")

        monkeypatch.setattr("src.utils.file_utils.os.replace", broken_replace)
        with pytest.raises(OSError):
            atomic_write_text(tmp_path / "out.txt", "x")
        assert list(tmp_path.iterdir()) == []


# ---------------------------------------------------------------------------
# paths and names
# ---------------------------------------------------------------------------


class TestRequireFile:
    def test_existing_file(self, tmp_path: Path):
        path = tmp_path / "x.ckpt"
        path.write_bytes(b"")
        assert require_file(path, "checkpoint") == path

    def test_missing_file_names_what(self, tmp_path: Path):
        with pytest.raises(FileNotFoundError, match="checkpoint"):
            require_file(tmp_path / "x.ckpt", "checkpoint")

    def test_directory_is_not_a_file(self, tmp_path: Path):
        with pytest.raises(FileNotFoundError):
            require_file(tmp_path, "dataset")


class TestArtifactSlug:
    def test_distortion_descriptors(self):
        assert artifact_slug("victim", "median:3,bitdepth:5") == "victim__median3-bitdepth5"

    def test_unsafe_characters_replaced(self):
        assert artifact_slug("a b/c") == "a_b_c"

    def test_empty_part(self):
        assert artifact_slug("victim", "") == "victim__none"

    def test_attack_set_name(self):
        assert artifact_slug("victim_adv", "cw5", "black") == "victim_adv__cw5__black"


class TestEnsureDir:
    def test_creates_and_returns(self, tmp_path: Path):
        path = ensure_dir(tmp_path / "x" / "y")
        assert path.is_dir()
        assert ensure_dir(path) == path
