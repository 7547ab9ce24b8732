# =========================
# file: tools/reports.py
# =========================
from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Tuple

import numpy as np
import pandas as pd

from core.models import CheckResult, EstimateReport, RunSummary

LOGGER = logging.getLogger(__name__)


def output_dirs(out_dir) -> Tuple[Path, Path, Path]:
    """(root, reports/, plots/), created on demand."""
    root = Path(out_dir)
    reports, plots = root / "reports", root / "plots"
    for p in (root, reports, plots):
        p.mkdir(parents=True, exist_ok=True)
    return root, reports, plots


def estimate_frame(report: EstimateReport) -> pd.DataFrame:
    lhs = np.asarray(report.lhs, dtype=float)
    rhs = np.asarray(report.rhs, dtype=float)
    ratio = np.divide(lhs, rhs, out=np.zeros_like(lhs), where=rhs > 0)
    return pd.DataFrame({"t": report.t_samples, "lhs": lhs, "rhs": rhs, "ratio": ratio})


def report_name(report: EstimateReport, index: int) -> str:
    tag = report.variant.replace(",", "_").replace("=", "")
    return f"{index:02d}_{report.estimate_id}" + (f"_{tag}" if tag else "")


def write_report(report: EstimateReport, out_dir, name: str, float_format: str = "%.17g") -> Tuple[Path, Path]:
    _, reports, plots = output_dirs(out_dir)
    json_path = reports / f"{name}.json"
    json_path.write_text(report.model_dump_json(indent=2))
    csv_path = plots / f"{name}.csv"
    estimate_frame(report).to_csv(csv_path, index=False, float_format=float_format)
    LOGGER.info("wrote %s and %s", json_path, csv_path)
    return json_path, csv_path


def write_frame(df: pd.DataFrame, out_dir, name: str, float_format: str = "%.17g") -> Path:
    root, _, _ = output_dirs(out_dir)
    path = root / f"{name}.csv"
    df.to_csv(path, index=False, float_format=float_format)
    return path


def checks_frame(checks: Iterable[CheckResult]) -> pd.DataFrame:
    rows = [c.model_dump() for c in checks]
    return pd.DataFrame(rows, columns=["stage", "name", "value", "bound", "passed", "note"])


def write_summary(summary: RunSummary, out_dir) -> Path:
    _, reports, _ = output_dirs(out_dir)
    path = reports / "summary.json"
    path.write_text(summary.model_dump_json(indent=2))
    status = "PASS" if summary.passed else "FAIL"
    LOGGER.info("summary: %s (%d checks) -> %s", status, len(summary.checks), path)
    return path
