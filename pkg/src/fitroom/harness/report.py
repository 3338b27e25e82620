"""Report emission: JSON, summary-table CSV, histogram SVG and sample CSVs."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence

from ..fitting_room import QUEUES, ReplicationResult
from ..stats_suite import HistogramBin
from .experiment import ExperimentReport

FORMATS = ("json", "csv", "svg_histogram")
SAMPLE_HEADER = ["customer_id", "arrival_time", "total_wait", "entry_wait", "help_wait", "return_wait"]
TABLE_HEADER = ["model", "mean", "std_dev", "variance"]


class IoError(OSError):
    pass


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.6f}"


def summary_rows(report: ExperimentReport) -> list[list[str]]:
    """One row per model: the reference first, then each paradigm."""
    rows = []
    blocks = []
    if report.reference is not None:
        blocks.append((report.reference.get("label") or "reference", report.reference["stats"]))
    blocks += [(name, p.stats) for name, p in report.paradigms.items()]
    for label, st in blocks:
        st = st or {}
        rows.append([label, _fmt(st.get("mean")), _fmt(st.get("std_dev")), _fmt(st.get("variance"))])
    return rows


def _write_text(out_path: str | Path, text: str) -> None:
    try:
        Path(out_path).write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write {out_path}: {exc.strerror or exc}") from exc


def _svg(report: ExperimentReport) -> str:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series: list[tuple[str, list]] = []
    if report.reference is not None:
        series.append((report.reference.get("label") or "reference", report.reference["histogram"]))
    series += [(name, p.histogram) for name, p in report.paradigms.items()]

    plt.rcParams["svg.hashsalt"] = "fitroom"
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, bins in series:
        if not bins:
            continue
        total = sum(b[2] for b in bins)
        edges = [b[0] for b in bins] + [bins[-1][1]]
        freqs = [b[2] / total for b in bins]
        ax.stairs(freqs, edges, label=label, linewidth=1.5)
    ax.set_xlabel("waiting time (minutes)")
    ax.set_ylabel("relative frequency")
    ax.legend()
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def emit_report(report: ExperimentReport, fmt: str, out_path: str | Path) -> None:
    """Write ``report`` as json, csv (summary table) or svg_histogram."""
    if fmt == "json":
        _write_text(out_path, report.to_json())
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        w.writerows(summary_rows(report))
        _write_text(out_path, buf.getvalue())
    elif fmt == "svg_histogram":
        _write_text(out_path, _svg(report))
    else:
        raise ValueError(f"unknown report format {fmt!r}; expected one of {FORMATS}")


def load_report(path: str | Path) -> ExperimentReport:
    try:
        return ExperimentReport.from_json(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc


def write_sample_csv(result: ReplicationResult, out_path: str | Path) -> None:
    """Per-customer waits of one replication; help_wait is blank for customers never helped."""
    if result.trace is None:
        raise ValueError("result carries no customer trace (it was loaded or run in a worker process)")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SAMPLE_HEADER)
    for c in result.trace.customers:
        if not c.completed:
            continue
        entry, helpw, ret = (c.wait(q) for q in QUEUES)
        w.writerow([c.customer_id, _fmt(c.arrival_time), _fmt(c.total_wait),
                    _fmt(entry), _fmt(helpw), _fmt(ret)])
    _write_text(out_path, buf.getvalue())


def write_histogram_csv(bins: Sequence[HistogramBin], out_path: str | Path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_start", "bin_end", "count"])
    for b in bins:
        w.writerow([_fmt(b.start), _fmt(b.end), b.count])
    _write_text(out_path, buf.getvalue())
