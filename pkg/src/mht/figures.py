"""Matplotlib renderings of a benchmark report, written next to the
delimited output. Optional path: nothing here is needed to compute scores."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import METRIC_FIELDS, BenchReport


def _metric_bars(ax, cells, title):
    labels = [label for name, label in METRIC_FIELDS if name in cells]
    means = [cells[name].mean for name, _ in METRIC_FIELDS if name in cells]
    ax.bar(range(len(means)), means, color="#4878a8")
    ax.set_xticks(range(len(means)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylim(0, 100)
    ax.set_ylabel("score")
    ax.set_title(title)


def plot_overall(report: BenchReport, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    _metric_bars(ax, report.overall, f"Overall (n={report.sample_count})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_by_person_count(report: BenchReport, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    counts = sorted(report.by_person_count)
    for name, label in METRIC_FIELDS:
        ys = [
            report.by_person_count[n][name].mean
            for n in counts
            if name in report.by_person_count[n]
        ]
        xs = [n for n in counts if name in report.by_person_count[n]]
        if xs:
            ax.plot(xs, ys, marker="o", label=label)
    ax.set_xlabel("people per sample")
    ax.set_ylabel("score")
    ax.set_ylim(0, 100)
    ax.set_xticks(counts)
    ax.legend(fontsize=8)
    ax.set_title("Scores by person count")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_attribute_bias(report: BenchReport, path: str) -> None:
    """Deviation bars per attribute bucket; deeper red marks larger bias."""
    attrs = [a for a, cells in report.by_attribute.items() if cells]
    if not attrs:
        return
    fig, axes = plt.subplots(
        len(attrs), 1, figsize=(7, 2.2 * len(attrs)), squeeze=False
    )
    for ax, attr in zip(axes[:, 0], attrs):
        cells = report.by_attribute[attr]
        buckets = list(cells)
        devs = np.array([cells[b].deviation for b in buckets])
        intensity = np.clip(np.abs(devs) / 5.0, 0.08, 1.0)
        colors = [(0.85, 0.2, 0.15, a) for a in intensity]
        ax.bar(range(len(buckets)), devs, color=colors, edgecolor="#803030")
        ax.axhline(0.0, color="black", linewidth=0.8)
        ax.set_xticks(range(len(buckets)))
        ax.set_xticklabels(buckets, rotation=20, ha="right", fontsize=8)
        ax.set_ylabel("deviation (pts)")
        ax.set_title(f"ID-similarity deviation by {attr}", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_report_figures(report: BenchReport, outdir: str) -> list[str]:
    """Write all report figures into ``outdir``; returns the file paths."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    jobs = [
        ("overall.png", plot_overall),
        ("by_person_count.png", plot_by_person_count),
        ("attribute_bias.png", plot_attribute_bias),
    ]
    for fname, fn in jobs:
        path = os.path.join(outdir, fname)
        fn(report, path)
        if os.path.exists(path):
            written.append(path)
    return written
