"""Session-level 5-fold cross-validation, macro-F1 scoring, and reports.

Scores are computed per session, then averaged (unweighted) over
sessions for the overall, per-level, and gender x level-group
aggregates. Macro F1 is taken over the classes present in truth or
prediction; classes absent from both are excluded, so a single-class
session scored perfectly yields 1.0.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import classifier
from .corpus import Corpus, Gender, LanguageLevel, TaskDataset, TaskKind, build_task_dataset
from .errors import NlskitError, TrainingError


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: dict[str, int]

    def test_sessions(self, fold: int) -> set[str]:
        return {s for s, f in self.assignment.items() if f == fold}


def make_folds(corpus: Corpus, k: int = 5, seed: int = 0) -> FoldPlan:
    """Seeded shuffle of session ids, round-robin fold assignment."""
    ids = corpus.session_ids
    if len(ids) < k:
        raise NlskitError(f"need at least {k} sessions, got {len(ids)}")
    rng = np.random.default_rng(classifier._mix(seed))
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    return FoldPlan(k=k, assignment={s: i % k for i, s in enumerate(shuffled)})


def f1_macro(truth: Sequence, predicted: Sequence) -> float:
    """Macro F1 over the classes present in truth or predictions."""
    if len(truth) != len(predicted):
        raise NlskitError("truth and predictions must have equal length")
    if not truth:
        raise NlskitError("empty label sequences")
    classes = sorted(set(truth) | set(predicted), key=repr)
    scores = []
    for c in classes:
        tp = sum(1 for t, p in zip(truth, predicted) if t == c and p == c)
        fp = sum(1 for t, p in zip(truth, predicted) if t != c and p == c)
        fn = sum(1 for t, p in zip(truth, predicted) if t == c and p != c)
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return sum(scores) / len(scores)


def majority_baseline(train_labels: Sequence[int], test_truth: Sequence[int]) -> float:
    """Macro F1 of always predicting the most frequent training class."""
    if not train_labels:
        raise NlskitError("empty training labels")
    counts = Counter(train_labels)
    top = max(counts.values())
    majority = min(c for c, n in counts.items() if n == top)  # tie -> label 0
    return f1_macro(list(test_truth), [majority] * len(test_truth))


@dataclass(frozen=True)
class SessionScore:
    session_id: str
    level: LanguageLevel
    gender: Gender
    n_utterances: int
    f1: float
    baseline_f1: float


@dataclass
class EvalReport:
    task: TaskKind
    seed: int
    sessions: list[SessionScore]
    skipped_sessions: list[str]
    failed_folds: list[int]

    @staticmethod
    def _mean(scores: list[float]) -> Optional[float]:
        return sum(scores) / len(scores) if scores else None

    def _select(self, pred) -> list[SessionScore]:
        return [s for s in self.sessions if pred(s)]

    @property
    def overall(self) -> Optional[float]:
        return self._mean([s.f1 for s in self.sessions])

    @property
    def baseline_overall(self) -> Optional[float]:
        return self._mean([s.baseline_f1 for s in self.sessions])

    def per_level(self, baseline: bool = False) -> dict[LanguageLevel, Optional[float]]:
        out = {}
        for lv in LanguageLevel:
            sel = self._select(lambda s: s.level is lv)
            out[lv] = self._mean([s.baseline_f1 if baseline else s.f1 for s in sel])
        return out

    def per_gender_group(self, baseline: bool = False) -> dict[tuple[Gender, str], Optional[float]]:
        """Gender x {LL1, LL23} cells; LL-2 and LL-3 are pooled."""
        out = {}
        for g in Gender:
            for group, levels in (("LL1", {LanguageLevel.LL1}),
                                  ("LL23", {LanguageLevel.LL2, LanguageLevel.LL3})):
                sel = self._select(lambda s: s.gender is g and s.level in levels)
                out[(g, group)] = self._mean(
                    [s.baseline_f1 if baseline else s.f1 for s in sel]
                )
        return out


def run_cross_validation(
    corpus: Corpus,
    task: TaskKind,
    embeddings: classifier.EmbeddingReader = classifier.file_embedding_reader,
    train_config: classifier.TrainConfig = classifier.TrainConfig(),
    model_config: Optional[classifier.ModelConfig] = None,
    k: int = 5,
    seed: int = 0,
    jobs: int = 1,
) -> EvalReport:
    """Session-level k-fold cross-validation of the classification head.

    Each fold trains on the other folds' utterances (with the 8:2
    utterance-level validation split inside train()) and scores every
    test session separately. Sessions with no eligible utterances are
    skipped and listed; folds whose training data lack a class are
    marked failed and the run continues.
    """
    plan = make_folds(corpus, k=k, seed=seed)
    dataset = build_task_dataset(corpus, task)
    by_session: dict[str, list[tuple[object, int]]] = {}
    for u, y in dataset.items:
        by_session.setdefault(u.session_id, []).append((u, y))

    report = EvalReport(task=task, seed=seed, sessions=[], skipped_sessions=[], failed_folds=[])

    def run_fold(fold: int):
        test_ids = plan.test_sessions(fold)
        train_items = [it for it in dataset.items if it[0].session_id not in test_ids]
        # leakage guard: training data must not touch any test session
        assert not {u.session_id for u, _ in train_items} & test_ids
        train_labels = [y for _, y in train_items]
        fold_dataset = TaskDataset(task=task, items=tuple(train_items))
        fold_config = replace(train_config, seed=classifier._mix(seed, fold))
        try:
            model = classifier.train(
                fold_dataset, embeddings, fold_config, model_config
            )
        except TrainingError:
            return fold, None, train_labels, test_ids
        return fold, model, train_labels, test_ids

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_fold, range(k)))
    else:
        results = [run_fold(f) for f in range(k)]

    for fold, model, train_labels, test_ids in results:
        if model is None:
            report.failed_folds.append(fold)
            continue
        for sid in sorted(test_ids):
            items = by_session.get(sid, [])
            if not items:
                report.skipped_sessions.append(sid)
                continue
            truth = [y for _, y in items]
            preds = [classifier.predict(model, embeddings(u))[0] for u, _ in items]
            meta = corpus.session(sid)
            report.sessions.append(
                SessionScore(
                    session_id=sid,
                    level=meta.level,
                    gender=meta.child_gender,
                    n_utterances=len(items),
                    f1=f1_macro(truth, preds),
                    baseline_f1=majority_baseline(train_labels, truth),
                )
            )
    report.sessions.sort(key=lambda s: s.session_id)
    report.skipped_sessions.sort()
    return report


def write_eval_report(report: EvalReport, path) -> Path:
    """Emit the per-session rows plus #AGG aggregate rows as TSV."""
    path = Path(path)

    def fmt(x: Optional[float]) -> str:
        return "NA" if x is None else format(x, ".6g")

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# macro F1 over classes present in truth or prediction;\n")
        fh.write("# single-class sessions score over that class alone\n")
        fh.write("session_id\tlevel\tgender\tn_utterances\tf1_macro\tbaseline_f1\n")
        for s in report.sessions:
            fh.write(
                f"{s.session_id}\t{int(s.level)}\t{s.gender.value}\t{s.n_utterances}"
                f"\t{fmt(s.f1)}\t{fmt(s.baseline_f1)}\n"
            )
        fh.write(f"#AGG\toverall\t{fmt(report.overall)}\t{fmt(report.baseline_overall)}\n")
        for lv, score in report.per_level().items():
            base = report.per_level(baseline=True)[lv]
            fh.write(f"#AGG\tll{int(lv)}\t{fmt(score)}\t{fmt(base)}\n")
        for (g, group), score in report.per_gender_group().items():
            base = report.per_gender_group(baseline=True)[(g, group)]
            fh.write(f"#AGG\t{g.value}_{group.lower()}\t{fmt(score)}\t{fmt(base)}\n")
        if report.skipped_sessions:
            fh.write("#AGG\tskipped\t" + ",".join(report.skipped_sessions) + "\n")
        if report.failed_folds:
            fh.write(
                "#AGG\tfailed_folds\t"
                + ",".join(str(f) for f in report.failed_folds)
                + "\n"
            )
    return path
