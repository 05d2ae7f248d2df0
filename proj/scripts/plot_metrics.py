#!/usr/bin/env python3
"""Render the CLI's CSV outputs as figures.

Usage:
  plot_metrics.py detect  OUT_DIR/detect/metrics.csv  [figure.png]
  plot_metrics.py compare OUT_DIR/compare/compare.csv [figure.png]
"""

import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_columns(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = {}
    for key in rows[0]:
        cols[key] = [float(r[key]) if r[key] else float("nan") for r in rows]
    return cols


def plot_detect(path, out):
    cols = read_columns(path)
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.plot(cols["t"], cols["metric"], lw=0.8, label="test metric")
    ax.plot(cols["t"], cols["threshold"], "r--", lw=1.0, label="threshold")
    alarms = [(t, m) for t, m, a in zip(cols["t"], cols["metric"], cols["alarm"]) if a]
    if alarms:
        ax.scatter(*zip(*alarms), s=12, c="red", zorder=3, label="alarm")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("negative log likelihood")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def plot_compare(path, out):
    cols = read_columns(path)
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.plot(cols["t"], cols["mean_metric_ltv"], lw=1.0, label="time-varying normalization")
    ax.plot(cols["t"], cols["mean_metric_lti"], lw=1.0, label="time-invariant normalization")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("ensemble-mean metric")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def main():
    if len(sys.argv) < 3 or sys.argv[1] not in ("detect", "compare"):
        print(__doc__, file=sys.stderr)
        return 2
    out = sys.argv[3] if len(sys.argv) > 3 else sys.argv[1] + ".png"
    if sys.argv[1] == "detect":
        plot_detect(sys.argv[2], out)
    else:
        plot_compare(sys.argv[2], out)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
