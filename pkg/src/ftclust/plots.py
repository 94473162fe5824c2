"""Figures for benchmark runs, rendered next to the CSV output."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Dict, List


def render_bench_figures(rows: List[dict], out_prefix) -> List[str]:
    """One panel of approximation ratios per method and one of runtimes;
    returns the written paths.  Rows are the bench CSV rows (dicts)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_prefix = Path(out_prefix)
    written: List[str] = []

    by_method: Dict[str, List[dict]] = defaultdict(list)
    for row in rows:
        by_method[row["method"]].append(row)
    methods = sorted(by_method)

    fig, ax = plt.subplots(figsize=(7, 4))
    for mi, method in enumerate(methods):
        ratios = [
            float(r["ratio_vs_lp"]) for r in by_method[method] if r["ratio_vs_lp"] != ""
        ]
        if not ratios:
            continue
        xs = [mi + (i - len(ratios) / 2) * 0.8 / max(len(ratios), 1) for i in range(len(ratios))]
        ax.plot(xs, ratios, "o", ms=4, alpha=0.6)
        mean = sum(ratios) / len(ratios)
        ax.hlines(mean, mi - 0.45, mi + 0.45, color="k", lw=2)
    ax.set_xticks(range(len(methods)))
    ax.set_xticklabels(methods, rotation=20)
    ax.set_ylabel("cost / relaxation value")
    ax.set_title("approximation ratio vs relaxation (mean per method)")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    path = f"{out_prefix}_ratios.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    for mi, method in enumerate(methods):
        times = [float(r["runtime_ms"]) for r in by_method[method]]
        xs = [mi] * len(times)
        ax.plot(xs, times, "o", ms=4, alpha=0.6)
    ax.set_xticks(range(len(methods)))
    ax.set_xticklabels(methods, rotation=20)
    ax.set_ylabel("runtime [ms]")
    ax.set_yscale("log")
    ax.set_title("solve runtime per method")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    path = f"{out_prefix}_runtimes.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written
