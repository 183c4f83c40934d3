"""Report rendering: variant tables (markdown/csv/json), the long-format
outcome breakdown, and figure files for the SR/SPL and failure-cause views."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .evaluation import OUTCOME_ORDER


def render_markdown(aggregates: dict) -> str:
    lines = [
        "| Variant | Episodes | SR | SPL |",
        "|---|---:|---:|---:|",
    ]
    for variant, row in aggregates.items():
        lines.append(f"| {variant} | {row['episodes']} | "
                     f"{100.0 * row['sr']:.2f} | {100.0 * row['spl']:.2f} |")
    lines.append("")
    lines.append("| Variant | " + " | ".join(OUTCOME_ORDER) + " |")
    lines.append("|---|" + "---:|" * len(OUTCOME_ORDER))
    for variant, row in aggregates.items():
        pcts = row["outcome_pct"]
        lines.append(f"| {variant} | "
                     + " | ".join(f"{pcts.get(k, 0.0):.2f}" for k in OUTCOME_ORDER)
                     + " |")
    return "\n".join(lines) + "\n"


def render_csv_aggregate(aggregates: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["variant", "episodes", "sr", "spl"])
    for variant, row in aggregates.items():
        writer.writerow([variant, row["episodes"], row["sr"], row["spl"]])
    return buf.getvalue()


def render_csv_breakdown(aggregates: dict) -> str:
    """Plot-ready long format: one row per (variant, category)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["variant", "category", "percentage"])
    for variant, row in aggregates.items():
        for category in OUTCOME_ORDER:
            writer.writerow([variant, category, row["outcome_pct"].get(category, 0.0)])
    return buf.getvalue()


def render_json(aggregates: dict) -> str:
    return json.dumps(aggregates, indent=1) + "\n"


def render_episode_csv(records: list[dict]) -> str:
    """One row per episode."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["episode_id", "scenario_id", "variant", "seed", "outcome",
                     "steps", "path_length", "shortest_path", "spl_term",
                     "stop_step", "final_state"])
    for r in records:
        writer.writerow([r["episode_id"], r["scenario_id"], r["variant"],
                         r["seed"], r["outcome"], r["steps"], r["path_length"],
                         r["shortest_path"], r["spl_term"], r["stop_step"],
                         r["final_state"]])
    return buf.getvalue()


def render_figures(aggregates: dict, out_dir: str | Path) -> list[Path]:
    """Write the SR/SPL bar chart and the stacked failure-cause chart as
    PNG files; returns the written paths."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    variants = list(aggregates)
    written = []

    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    xs = range(len(variants))
    sr = [100.0 * aggregates[v]["sr"] for v in variants]
    spl = [100.0 * aggregates[v]["spl"] for v in variants]
    width = 0.38
    ax.bar([x - width / 2 for x in xs], sr, width, label="SR (%)")
    ax.bar([x + width / 2 for x in xs], spl, width, label="SPL (%)")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(variants)
    ax.set_ylabel("percent")
    ax.set_title("Success rate and path efficiency by variant")
    ax.legend()
    fig.tight_layout()
    path = out_dir / "sr_spl.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7.2, 3.6))
    bottoms = [0.0] * len(variants)
    for category in OUTCOME_ORDER:
        values = [aggregates[v]["outcome_pct"].get(category, 0.0) for v in variants]
        ax.bar(variants, values, bottom=bottoms, label=category)
        bottoms = [b + v for b, v in zip(bottoms, values)]
    ax.set_ylabel("share of episodes (%)")
    ax.set_title("Outcome breakdown by variant")
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    path = out_dir / "outcomes.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written
