import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlskit import classifier as C
from nlskit import evaluation as E
from nlskit.corpus import Gender, LanguageLevel, TaskKind, synthesize_corpus
from nlskit.errors import NlskitError


def test_make_folds_balanced():
    corpus = synthesize_corpus(seed=5, sessions_per_level=(14, 15, 16))
    plan = E.make_folds(corpus, k=5, seed=1)
    sizes = [len(plan.test_sessions(f)) for f in range(5)]
    assert sizes == [9, 9, 9, 9, 9]
    assert set().union(*(plan.test_sessions(f) for f in range(5))) == set(
        corpus.session_ids
    )


def test_make_folds_leave_one_out(small_corpus):
    plan = E.make_folds(small_corpus, k=6, seed=0)
    assert all(len(plan.test_sessions(f)) == 1 for f in range(6))


def test_make_folds_deterministic(small_corpus):
    a = E.make_folds(small_corpus, k=3, seed=9)
    b = E.make_folds(small_corpus, k=3, seed=9)
    assert a == b


def test_make_folds_too_few_sessions(small_corpus):
    with pytest.raises(NlskitError):
        E.make_folds(small_corpus, k=7, seed=0)


def test_f1_perfect():
    assert E.f1_macro([0, 1, 0], [0, 1, 0]) == 1.0


def test_f1_hand_computed():
    assert E.f1_macro(["A", "A", "A", "C"], ["A"] * 4) == pytest.approx(3 / 7)


def test_f1_single_class_rule():
    assert E.f1_macro(["A", "A"], ["A", "A"]) == 1.0


def test_f1_length_mismatch():
    with pytest.raises(NlskitError):
        E.f1_macro([0], [0, 1])


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=30))
@settings(max_examples=100, deadline=None)
def test_f1_relabel_symmetry(pairs):
    truth = [t for t, _ in pairs]
    pred = [p for _, p in pairs]
    swapped_truth = [1 - t for t in truth]
    swapped_pred = [1 - p for p in pred]
    assert E.f1_macro(truth, pred) == pytest.approx(
        E.f1_macro(swapped_truth, swapped_pred)
    )


@pytest.mark.parametrize("p,total", [(0.5, 20), (0.6, 20), (0.75, 20), (0.9, 20)])
def test_majority_baseline_closed_form(p, total):
    n_major = int(p * total)
    truth = [0] * n_major + [1] * (total - n_major)
    score = E.majority_baseline([0, 0, 1], truth)
    assert score == pytest.approx(p / (p + 1))


def test_majority_baseline_extremes():
    assert E.majority_baseline([0, 0, 1], [0] * 10) == 1.0
    assert E.majority_baseline([0, 0, 1], [1] * 10) == 0.0


def test_majority_baseline_tie_prefers_zero():
    # training labels tied; rule picks label 0
    assert E.majority_baseline([0, 1], [0, 0]) == 1.0


@pytest.fixture(scope="module")
def cv_report(embedded_corpus):
    tc = C.TrainConfig(seed=2, max_epochs=3, patience=2)
    return E.run_cross_validation(
        embedded_corpus, TaskKind.CHILD_ADULT, train_config=tc, k=3, seed=4
    )


def test_cv_sessions_scored_once(cv_report, embedded_corpus):
    scored = [s.session_id for s in cv_report.sessions]
    assert len(scored) == len(set(scored))
    assert set(scored) | set(cv_report.skipped_sessions) <= set(
        embedded_corpus.session_ids
    )


def test_cv_gender_cells_partition(cv_report):
    cells = cv_report.per_gender_group()
    counted = 0
    for (g, group), _ in cells.items():
        levels = (
            {LanguageLevel.LL1}
            if group == "LL1"
            else {LanguageLevel.LL2, LanguageLevel.LL3}
        )
        counted += sum(
            1
            for s in cv_report.sessions
            if s.gender is g and s.level in levels
        )
    assert counted == len(cv_report.sessions)


def test_cv_overall_consistent_with_levels(cv_report):
    total, n = 0.0, 0
    for lv in LanguageLevel:
        members = [s for s in cv_report.sessions if s.level is lv]
        if members:
            total += cv_report.per_level()[lv] * len(members)
            n += len(members)
    assert cv_report.overall == pytest.approx(total / n)


def test_cv_report_written(cv_report, tmp_path):
    path = E.write_eval_report(cv_report, tmp_path / "r.tsv")
    lines = path.read_text().splitlines()
    assert any(line.startswith("session_id\t") for line in lines)
    assert any(line.startswith("#AGG\toverall") for line in lines)
    agg = [l for l in lines if l.startswith("#AGG")]
    assert len(agg) >= 8  # overall + 3 levels + 4 gender cells
