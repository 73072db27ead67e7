"""Run reports: CSV/JSON tables and rate-distortion plots."""

from __future__ import annotations

import csv
import json
from pathlib import Path

REPORT_FIELDS = (
    "video", "variant", "task", "size_params", "bpp",
    "psnr", "msssim", "epochs", "wall_time_s",
)


def normalize_rows(runs: list[dict]) -> list[dict]:
    rows = []
    for run in runs:
        rows.append({k: run.get(k) for k in REPORT_FIELDS})
    return rows


def write_csv(runs: list[dict], path):
    rows = normalize_rows(runs)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                             for k, v in row.items()})


def read_csv(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for k, v in row.items():
                if v == "":
                    parsed[k] = None
                elif k in ("video", "variant", "task"):
                    parsed[k] = v
                elif k in ("size_params", "epochs"):
                    parsed[k] = int(v)
                else:
                    parsed[k] = float(v)
            out.append(parsed)
    return out


def write_json(runs: list[dict], path):
    with open(path, "w") as fh:
        json.dump(normalize_rows(runs), fh, indent=2)
        fh.write("\n")


def read_json(path) -> list[dict]:
    with open(path) as fh:
        return json.load(fh)


def rd_plot(runs: list[dict], path, metric: str = "psnr"):
    """Rate-distortion curves, one line per (video, variant), points sorted by bpp."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series: dict[tuple, list[tuple]] = {}
    for run in normalize_rows(runs):
        if run.get("bpp") is None or run.get(metric) is None:
            continue
        key = (run.get("video"), run.get("variant"))
        series.setdefault(key, []).append((run["bpp"], run[metric]))

    fig, ax = plt.subplots(figsize=(6, 4))
    for (video, variant), pts in sorted(series.items(), key=lambda kv: str(kv[0])):
        pts.sort(key=lambda p: p[0])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label=f"{video}/{variant}")
    ax.set_xlabel("bpp")
    ax.set_ylabel(metric.upper() if metric == "psnr" else metric)
    ax.grid(True, alpha=0.3)
    if series:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
