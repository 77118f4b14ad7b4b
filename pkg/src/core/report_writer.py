"""Experiment report, histogram and ROC CSV generation."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict
from typing import TYPE_CHECKING, Any

from src.utils.constants import REPORT_TITLE
from src.utils.file_utils import atomic_write_text
from src.utils.logger import get_logger

if TYPE_CHECKING:
    from pathlib import Path

    from src.core.evaluation import HistogramRow
    from src.models.evaluation import RocCurve

logger = get_logger("core.report_writer")

HISTOGRAM_FIELDS = ["bin_low", "bin_high", "legitimate", "adversarial"]
ROC_FIELDS = ["threshold", "fpr", "tpr"]


def _csv_text(fieldnames: list[str], rows: list[dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


class ReportWriter:
    """Writes JSON/TXT run reports and the CSV score exports.

    Reports carry no wall-clock fields so re-running an evaluation on the
    same artifacts reproduces the files byte for byte.
    """

    @staticmethod
    def write_json_report(path: Path, report: dict[str, Any]) -> Path:
        """Write ``report`` as indented, key-sorted JSON."""
        text = json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        atomic_write_text(path, text)
        logger.info("Report (JSON) written to: %s", path)
        return path

    @staticmethod
    def write_text_report(path: Path, report: dict[str, Any]) -> Path:
        """Human-readable summary of the AUC and detection-rate sections."""
        lines = [REPORT_TITLE, ""]
        seeds = report.get("seeds", {})
        if seeds:
            lines.append("Seeds: " + ", ".join(f"{k}={v}" for k, v in sorted(seeds.items())))
            lines.append("")

        accuracy = report.get("accuracy", {})
        if accuracy:
            lines.append("=== Accuracy (victim / confidence) ===")
            for name, row in accuracy.items():
                lines.append(
                    f"  {name:<16} {row.get('victim_accuracy', 0.0):7.2%}"
                    f"  {row.get('victim_confidence', 0.0):7.2%}"
                )
            lines.append("")

        auc_rows = report.get("auc", {})
        if auc_rows:
            lines.append("=== AUC (ours / FS) ===")
            for name, row in auc_rows.items():
                lines.append(f"  {name:<16} {row.get('ours', 0.0):.4f}  {row.get('fs', 0.0):.4f}")
            lines.append("")

        black_box = report.get("black_box", {}).get("attacks", {})
        if black_box:
            lines.append("=== Black-box detection rate at calibrated threshold (ours / FS) ===")
            for name, row in black_box.items():
                lines.append(
                    f"  {name:<16} {row.get('ours', 0.0):7.2%}  {row.get('fs', 0.0):7.2%}"
                )
            lines.append("")

        for name, reason in report.get("skipped", {}).items():
            lines.append(f"  Skipped {name}: {reason}")

        atomic_write_text(path, "\n".join(lines) + "\n")
        logger.info("Report (TXT) written to: %s", path)
        return path

    @staticmethod
    def write_histogram_csv(path: Path, rows: list[HistogramRow]) -> Path:
        """CSV with columns ``bin_low,bin_high,legitimate,adversarial``."""
        atomic_write_text(path, _csv_text(HISTOGRAM_FIELDS, [asdict(row) for row in rows]))
        logger.debug("Histogram written to: %s", path)
        return path

    @staticmethod
    def write_roc_csv(path: Path, roc: RocCurve) -> Path:
        """CSV with columns ``threshold,fpr,tpr``; the first threshold is ``-inf``."""
        rows = [
            {"threshold": repr(float(t)), "fpr": repr(float(f)), "tpr": repr(float(p))}
            for t, f, p in zip(roc.thresholds, roc.fpr, roc.tpr)
        ]
        atomic_write_text(path, _csv_text(ROC_FIELDS, rows))
        logger.debug("ROC points written to: %s", path)
        return path
