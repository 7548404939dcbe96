"""
Comparison tables and plot-ready time series from evaluation runs.

Each input directory holds one run's metrics.json and frames.csv.
Outputs:
- comparison.csv: one row per governor;
- timeseries_latency.csv: frame, then one latency column per governor;
- timeseries_temperature.csv: same layout, device temperature
  (mean of CPU and GPU).
"""

import csv
import json
import logging
import os

from bench.evaluation import FRAMES_CSV, METRICS_JSON
from bench.metrics import Metrics

logger = logging.getLogger("BENCH")

COMPARISON_HEADER = [
    "governor", "mean_latency_ms", "latency_std_ms", "satisfaction_rate",
    "mean_temp_c", "throttle_events", "objective",
]


def comparison_rows(metrics_by_governor):
    """`metrics_by_governor` is an ordered list of (name, Metrics)."""
    return [
        {
            "governor": name,
            "mean_latency_ms": m.mean_latency_ms,
            "latency_std_ms": m.latency_std_ms,
            "satisfaction_rate": m.satisfaction_rate,
            "mean_temp_c": m.mean_temp_c,
            "throttle_events": m.throttle_event_count,
            "objective": m.objective_value,
        }
        for name, m in metrics_by_governor
    ]


def write_comparison(path, metrics_by_governor):
    rows = comparison_rows(metrics_by_governor)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=COMPARISON_HEADER, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return rows


def write_timeseries(path, series):
    """`series` is an ordered list of (name, values); shorter runs leave blanks."""
    length = max((len(v) for _, v in series), default=0)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["frame"] + [name for name, _ in series])
        for k in range(length):
            writer.writerow([k] + [v[k] if k < len(v) else "" for _, v in series])


def load_run(run_dir):
    """Returns (summary dict, frame rows as dicts of strings)."""
    metrics_path = os.path.join(run_dir, METRICS_JSON)
    frames_path = os.path.join(run_dir, FRAMES_CSV)
    if not os.path.exists(metrics_path):
        raise FileNotFoundError(f"no {METRICS_JSON} in {run_dir}")
    with open(metrics_path, "r", encoding="utf-8") as f:
        summary = json.load(f)
    rows = []
    if os.path.exists(frames_path):
        with open(frames_path, "r", encoding="utf-8", newline="") as f:
            rows = list(csv.DictReader(f))
    return summary, rows


def _run_label(summary, seen):
    label = summary["governor"]
    if label in seen:
        label = f"{label}-{summary.get('scenario', 'run')}-{summary.get('seed', len(seen))}"
    seen.add(label)
    return label


def report(run_dirs, out_dir):
    """Collect runs into the comparison table and time-series files."""
    os.makedirs(out_dir, exist_ok=True)
    metrics, latency, temperature = [], [], []
    seen = set()
    for run_dir in run_dirs:
        summary, rows = load_run(run_dir)
        label = _run_label(summary, seen)
        metrics.append((label, Metrics(**summary["metrics"])))
        latency.append((label, [r["total_ms"] for r in rows]))
        temperature.append((
            label,
            [f"{(float(r['cpu_temp']) + float(r['gpu_temp'])) / 2.0:.4f}" for r in rows],
        ))

    rows = write_comparison(os.path.join(out_dir, "comparison.csv"), metrics)
    write_timeseries(os.path.join(out_dir, "timeseries_latency.csv"), latency)
    write_timeseries(os.path.join(out_dir, "timeseries_temperature.csv"), temperature)
    logger.info("Report for %d runs written to %s", len(rows), out_dir)
    return rows
