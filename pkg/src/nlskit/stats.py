"""Per-session aggregation, group summaries, and one-way ANOVA.

The F-distribution survival function is evaluated through the regularized
incomplete beta function (continued-fraction expansion), so p-values are
exact to the stated tolerance without external dependencies.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .corpus import (
    Corpus,
    STAT_CATEGORIES,
    SpeakerRole,
    VocalTag,
    category_name,
)
from .errors import NlskitError


@dataclass(frozen=True)
class SessionAggregate:
    """Count and mean duration for one (speaker, tag) category of a session."""

    session_id: str
    speaker: SpeakerRole
    tag: VocalTag
    count: int
    mean_duration_s: Optional[float]

    def __post_init__(self):
        if (self.count > 0) != (self.mean_duration_s is not None):
            raise NlskitError("mean_duration_s must be present iff count > 0")
        if self.mean_duration_s is not None and self.mean_duration_s <= 0:
            raise NlskitError("mean_duration_s must be positive")


@dataclass(frozen=True)
class GroupSummary:
    """Per-group sample size, mean and sample (n-1) standard deviation."""

    n: int
    mean: float
    std: float


@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    df_between: int
    df_within: int
    p_value: float


def aggregate_session(corpus: Corpus, session_id: str) -> list[SessionAggregate]:
    """Count and mean duration for the six tracked categories of a session.

    No duration filtering is applied here: statistics describe the
    annotated corpus, not the training dataset.
    """
    utts = corpus.utterances_of(session_id)
    out = []
    for speaker, tag in STAT_CATEGORIES:
        durations = [u.duration_s for u in utts if u.speaker is speaker and u.tag is tag]
        if durations:
            agg = SessionAggregate(
                session_id, speaker, tag, len(durations), sum(durations) / len(durations)
            )
        else:
            agg = SessionAggregate(session_id, speaker, tag, 0, None)
        out.append(agg)
    return out


# ---------------------------------------------------------------------------
# F distribution via the regularized incomplete beta function
# ---------------------------------------------------------------------------

_BETA_MAX_ITER = 200
_BETA_TOL = 1e-12


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_TOL:
            return h
    return h  # best effort after max iterations


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Use the expansion on the side where it converges fastest.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def f_survival(f: float, df1: int, df2: int) -> float:
    """P(F >= f) for the F distribution with df1, df2 degrees of freedom."""
    if df1 < 1 or df2 < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if math.isinf(f):
        return 0.0
    if f <= 0.0:
        return 1.0
    # S_F(f) = I_{d2/(d2 + d1 f)}(d2/2, d1/2)
    x = df2 / (df2 + df1 * f)
    return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x)


# ---------------------------------------------------------------------------
# One-way ANOVA
# ---------------------------------------------------------------------------


def _anova_from_ss(ssb: float, ssw: float, k: int, total_n: int) -> AnovaResult:
    df_between = k - 1
    df_within = total_n - k
    msb = ssb / df_between
    msw = ssw / df_within
    if msw == 0.0:
        if msb > 0.0:
            return AnovaResult(math.inf, df_between, df_within, 0.0)
        return AnovaResult(0.0, df_between, df_within, 1.0)
    f = msb / msw
    if f < 0.0:
        f = 0.0
    return AnovaResult(f, df_between, df_within, f_survival(f, df_between, df_within))


def one_way_anova(groups: Sequence[Sequence[float]]) -> AnovaResult:
    """One-way ANOVA over k groups of raw observations."""
    k = len(groups)
    if k < 2:
        raise ValueError("need at least two groups")
    ns = [len(g) for g in groups]
    if any(n < 2 for n in ns):
        raise ValueError("every group needs at least 2 observations")
    total_n = sum(ns)
    means = [sum(g) / len(g) for g in groups]
    grand = sum(sum(g) for g in groups) / total_n
    ssb = sum(n * (m - grand) ** 2 for n, m in zip(ns, means))
    ssw = sum(sum((x - m) ** 2 for x in g) for g, m in zip(groups, means))
    return _anova_from_ss(ssb, ssw, k, total_n)


def anova_from_summary(
    n: Sequence[int], mean: Sequence[float], std: Sequence[float]
) -> AnovaResult:
    """One-way ANOVA reconstructed from group sizes, means, and sample stds.

    Algebraically identical to one_way_anova on any raw data with these
    summaries.
    """
    if not (len(n) == len(mean) == len(std)):
        raise ValueError("n, mean, std must have equal length")
    if any(ni < 2 for ni in n):
        raise ValueError("every group needs n >= 2")
    if any(s < 0 for s in std):
        raise ValueError("std must be non-negative")
    total_n = sum(n)
    grand = sum(ni * mi for ni, mi in zip(n, mean)) / total_n
    ssb = sum(ni * (mi - grand) ** 2 for ni, mi in zip(n, mean))
    ssw = sum((ni - 1) * si * si for ni, si in zip(n, std))
    return _anova_from_ss(ssb, ssw, len(n), total_n)


def group_summary(values: Sequence[float]) -> GroupSummary:
    n = len(values)
    if n < 1:
        raise ValueError("empty group")
    m = sum(values) / n
    if n < 2:
        return GroupSummary(n, m, 0.0)
    var = sum((x - m) ** 2 for x in values) / (n - 1)
    return GroupSummary(n, m, math.sqrt(var))


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


def _fmt(x: Optional[float]) -> str:
    if x is None:
        return "NA"
    if math.isinf(x):
        return "inf"
    return format(x, ".6g")


def collect_aggregates(corpus: Corpus) -> dict[str, list[SessionAggregate]]:
    """All six aggregates for every session, keyed by session id."""
    return {sid: aggregate_session(corpus, sid) for sid in corpus.session_ids}


def emit_stats_report(corpus: Corpus, out_dir) -> tuple[Path, Path]:
    """Write the per-category statistics TSV and the box-plot CSV.

    Count ANOVA uses every session; duration ANOVA only sessions with a
    non-zero count in that category, and a cell is NA when a level has
    fewer than 2 eligible sessions.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    levels = [1, 2, 3]
    per_level_sessions = {
        lv: [m.session_id for m in corpus.sessions if int(m.level) == lv]
        for lv in levels
    }
    if any(len(s) < 2 for s in per_level_sessions.values()):
        raise NlskitError("need at least 2 sessions per level for the report")

    aggregates = collect_aggregates(corpus)

    stats_path = out_dir / "statistics.tsv"
    box_path = out_dir / "boxplot.csv"

    header = ["category"]
    for lv in levels:
        header += [f"ll{lv}_count_mean", f"ll{lv}_count_std"]
    header += ["f_count", "p_count"]
    for lv in levels:
        header += [f"ll{lv}_dur_mean", f"ll{lv}_dur_std"]
    header += ["f_dur", "p_dur"]

    with open(stats_path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for idx, (speaker, tag) in enumerate(STAT_CATEGORIES):
            row = [category_name(speaker, tag)]
            count_groups = []
            dur_groups = []
            for lv in levels:
                counts = [
                    float(aggregates[sid][idx].count) for sid in per_level_sessions[lv]
                ]
                durs = [
                    aggregates[sid][idx].mean_duration_s
                    for sid in per_level_sessions[lv]
                    if aggregates[sid][idx].count > 0
                ]
                count_groups.append(counts)
                dur_groups.append(durs)
            for counts in count_groups:
                gs = group_summary(counts)
                row += [_fmt(gs.mean), _fmt(gs.std)]
            count_anova = one_way_anova(count_groups)
            row += [_fmt(count_anova.f_stat), _fmt(count_anova.p_value)]
            for durs in dur_groups:
                if not durs:
                    row += ["NA", "NA"]
                elif len(durs) == 1:
                    row += [_fmt(durs[0]), "NA"]
                else:
                    gs = group_summary(durs)
                    row += [_fmt(gs.mean), _fmt(gs.std)]
            if all(len(d) >= 2 for d in dur_groups):
                dur_anova = one_way_anova(dur_groups)
                row += [_fmt(dur_anova.f_stat), _fmt(dur_anova.p_value)]
            else:
                row += ["NA", "NA"]
            fh.write("\t".join(row) + "\n")

    with open(box_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["session_id", "level", "category", "count", "mean_duration_s"])
        for meta in corpus.sessions:
            for idx, (speaker, tag) in enumerate(STAT_CATEGORIES):
                agg = aggregates[meta.session_id][idx]
                writer.writerow(
                    [
                        meta.session_id,
                        int(meta.level),
                        category_name(speaker, tag),
                        agg.count,
                        "" if agg.mean_duration_s is None else f"{agg.mean_duration_s:.6f}",
                    ]
                )

    return stats_path, box_path
