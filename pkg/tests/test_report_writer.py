"""Tests for ReportWriter -- JSON/TXT reports and CSV exports."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from src.core.evaluation import HistogramRow
from src.core.report_writer import ReportWriter
from src.models.evaluation import RocCurve


def sample_report() -> dict:
    return {
        "seeds": {"data": 1, "victim": 7},
        "accuracy": {"legitimate": {"victim_accuracy": 0.98, "victim_confidence": 0.91}},
        "auc": {"cw": {"ours": 0.9912, "fs": 0.9421}},
        "black_box": {"attacks": {"fgsm4": {"ours": 0.8, "fs": 0.6}}},
        "skipped": {"victim__cw9__white": "fooled the victim on none of 10 attempted samples"},
    }


class TestJsonReport:
    def test_writes_sorted_json(self, tmp_path: Path):
        path = ReportWriter.write_json_report(tmp_path / "reports" / "eval.json", {"b": 1, "a": 2})
        text = path.read_text(encoding="utf-8")
        assert text.index('"a"') < text.index('"b"')
        assert text.endswith("\n")

    def test_same_report_same_bytes(self, tmp_path: Path):
        first = ReportWriter.write_json_report(tmp_path / "1.json", sample_report()).read_bytes()
        second = ReportWriter.write_json_report(tmp_path / "2.json", sample_report()).read_bytes()
        assert first == second

    def test_json_parses_back(self, tmp_path: Path):
        path = ReportWriter.write_json_report(tmp_path / "r.json", sample_report())
        assert json.loads(path.read_text(encoding="utf-8")) == sample_report()


class TestTextReport:
    def test_contains_sections(self, tmp_path: Path):
        path = ReportWriter.write_text_report(tmp_path / "report.txt", sample_report())
        text = path.read_text(encoding="utf-8")
        assert "=== AUC (ours / FS) ===" in text
        assert "0.9912" in text
        assert "98.00%" in text
        assert "Seeds: data=1, victim=7" in text
        assert "Skipped victim__cw9__white" in text

    def test_empty_report(self, tmp_path: Path):
        text = ReportWriter.write_text_report(tmp_path / "r.txt", {}).read_text(encoding="utf-8")
        assert "AUC" not in text


class TestCsvExports:
    def test_histogram_rows(self, tmp_path: Path):
        rows = [HistogramRow(0.0, 0.5, 3, 1), HistogramRow(0.5, 1.0, 0, 4)]
        text = ReportWriter.write_histogram_csv(tmp_path / "h.csv", rows).read_text(encoding="utf-8")
        assert text.splitlines() == [
            "bin_low,bin_high,legitimate,adversarial",
            "0.0,0.5,3,1",
            "0.5,1.0,0,4",
        ]

    def test_roc_rows(self, tmp_path: Path):
        roc = RocCurve(
            fpr=np.array([0.0, 0.5, 1.0]),
            tpr=np.array([0.0, 1.0, 1.0]),
            thresholds=np.array([-np.inf, 0.25, 0.75]),
        )
        text = ReportWriter.write_roc_csv(tmp_path / "r.csv", roc).read_text(encoding="utf-8")
        assert text.splitlines() == [
            "threshold,fpr,tpr",
            "-inf,0.0,0.0",
            "0.25,0.5,1.0",
            "0.75,1.0,1.0",
        ]
