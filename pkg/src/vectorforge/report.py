"""CSV metrics, text summaries and figures."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .config import MetricsRecord  # noqa: E402
from .fileio import atomic_write  # noqa: E402

BENCHMARK_FIELDS = ("image", "target") + MetricsRecord.FIELDS


def _csv_text(fields, rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def write_metrics_csv(records: list[MetricsRecord], path) -> None:
    atomic_write(path, _csv_text(MetricsRecord.FIELDS, (r.row() for r in records)))


def write_benchmark_csv(rows: list[dict], path) -> None:
    atomic_write(path, _csv_text(BENCHMARK_FIELDS, rows))


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summary_text(records: list[MetricsRecord], source: str = "") -> str:
    lines = [f"vectorization of {source}" if source else "vectorization summary"]
    lines.append(f"{'phase':>5} {'shapes':>6} {'iters':>5} {'MSE':>10} {'MSE(gray^2)':>12} {'L1':>8} {'geom':>8} {'sec':>7}")
    for r in records:
        lines.append(
            f"{r.phase:5d} {r.shapes:6d} {r.iterations:5d} {r.mse:10.6f} {r.mse_gray2:12.2f} "
            f"{r.l1:8.5f} {r.geometric:8.4f} {r.seconds:7.2f}"
        )
    total_iters = sum(r.iterations for r in records)
    total_sec = sum(r.seconds for r in records)
    lines.append(f"total: {total_iters} iterations in {total_sec:.1f} s, final {records[-1].shapes} shapes")
    return "\n".join(lines) + "\n"


def _save(fig, path) -> None:
    path = Path(path)
    fmt = path.suffix.lstrip(".").lower() or "png"
    buf = io.BytesIO()
    fig.savefig(buf, format=fmt, bbox_inches="tight")
    plt.close(fig)
    atomic_write(path, buf.getvalue())


def plot_phases(records: list[MetricsRecord], path) -> None:
    """MSE after each optimize phase, labelled with its shape count."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot([r.phase for r in records], [r.mse_gray2 for r in records], "o-", color="tab:blue")
    for r in records:
        ax.annotate(f"{r.shapes}", (r.phase, r.mse_gray2), textcoords="offset points", xytext=(0, 6),
                    ha="center", fontsize=8)
    ax.set_xlabel("phase")
    ax.set_ylabel("MSE (gray levels$^2$)")
    ax.set_xticks([r.phase for r in records])
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_benchmark(rows: list[dict], path) -> None:
    """Mean MSE against shape count, with mean runtime annotated at each point."""
    mse = defaultdict(list)
    secs = defaultdict(list)
    for row in rows:
        t = int(row["target"])
        mse[t].append(float(row["mse_gray2"]))
        secs[t].append(float(row["seconds"]))
    targets = sorted(mse)
    means = [sum(mse[t]) / len(mse[t]) for t in targets]

    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(targets, means, "o-", color="tab:red", label="O&R")
    for t, m in zip(targets, means):
        ax.annotate(f"{sum(secs[t]) / len(secs[t]):.1f}s", (t, m), textcoords="offset points",
                    xytext=(0, 7), ha="center", fontsize=8)
    ax.set_xscale("log", base=2)
    ax.set_xticks(targets)
    ax.set_xticklabels([str(t) for t in targets])
    ax.set_xlabel("number of shapes")
    ax.set_ylabel("MSE (gray levels$^2$)")
    ax.grid(alpha=0.3)
    ax.legend(frameon=False)
    _save(fig, path)
