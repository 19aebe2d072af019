"""Matplotlib figure rendering for the CLI report paths."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .corpus import Corpus, LanguageLevel, STAT_CATEGORIES, category_name
from .stats import collect_aggregates

_LEVEL_LABELS = ["LL-1", "LL-2", "LL-3"]


def render_stats_boxplots(corpus: Corpus, out_dir) -> list[Path]:
    """Per-category box plots of utterance count and mean duration by level."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    aggregates = collect_aggregates(corpus)
    by_level = {
        lv: [m.session_id for m in corpus.sessions if m.level is lv]
        for lv in LanguageLevel
    }
    paths = []
    for idx, (speaker, tag) in enumerate(STAT_CATEGORIES):
        name = category_name(speaker, tag)
        counts = [
            [aggregates[sid][idx].count for sid in by_level[lv]] for lv in LanguageLevel
        ]
        durations = [
            [
                aggregates[sid][idx].mean_duration_s
                for sid in by_level[lv]
                if aggregates[sid][idx].count > 0
            ]
            for lv in LanguageLevel
        ]
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
        ax1.boxplot(counts, tick_labels=_LEVEL_LABELS)
        ax1.set_title("utterance count")
        ax2.boxplot(
            [d if d else [0.0] for d in durations], tick_labels=_LEVEL_LABELS
        )
        ax2.set_title("mean duration (s)")
        fig.suptitle(name)
        fig.tight_layout()
        path = out_dir / f"boxplot_{name}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths


def render_eval_summary(report, out_path) -> Path:
    """Bar chart of per-level model vs baseline macro F1."""
    out_path = Path(out_path)
    levels = list(LanguageLevel)
    model_scores = [report.per_level()[lv] or 0.0 for lv in levels]
    base_scores = [report.per_level(baseline=True)[lv] or 0.0 for lv in levels]
    x = range(len(levels))
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar([i - 0.2 for i in x], model_scores, width=0.4, label="model")
    ax.bar([i + 0.2 for i in x], base_scores, width=0.4, label="majority baseline")
    ax.set_xticks(list(x))
    ax.set_xticklabels(_LEVEL_LABELS)
    ax.set_ylabel("F1 macro (session mean)")
    ax.set_ylim(0, 1)
    ax.set_title(f"{report.task.value} (overall {report.overall:.3f})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_projection(rows, out_path, color_key) -> Path:
    """Scatter of 2-D coordinates, one color per value of color_key.

    rows: (utterance_id, speaker, tag, x, y) tuples; color_key is
    "speaker" or "tag".
    """
    out_path = Path(out_path)
    key_idx = 1 if color_key == "speaker" else 2
    groups = {}
    for row in rows:
        groups.setdefault(row[key_idx], []).append((row[3], row[4]))
    fig, ax = plt.subplots(figsize=(4.5, 4))
    for label, pts in sorted(groups.items()):
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.scatter(xs, ys, s=12, label=label, alpha=0.8)
    ax.set_xticks([])
    ax.set_yticks([])
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
