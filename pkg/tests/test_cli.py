import os

import pytest

from nlskit.cli import main
from nlskit.corpus import (
    Corpus,
    Gender,
    LanguageLevel,
    SessionMeta,
    SpeakerRole,
    Utterance,
    VocalTag,
    write_corpus,
)


def tiny_corpus():
    sessions = []
    utterances = []
    for i in range(6):
        sid = f"s{i}"
        level = LanguageLevel((i % 3) + 1)
        gender = Gender.FEMALE if i == 0 else Gender.MALE
        sessions.append(SessionMeta(sid, level, gender, 60 + i, 1))
        cursor = 0.0
        k = 0
        for speaker, tag, n in (
            (SpeakerRole.CHILD, VocalTag.INTELLIGIBLE, 4),
            (SpeakerRole.CHILD, VocalTag.VOCALIZATION, 3),
            (SpeakerRole.ADULT, VocalTag.INTELLIGIBLE, 4),
        ):
            for _ in range(n):
                k += 1
                start = round(cursor + 0.2, 3)
                end = round(start + 0.8 + 0.05 * k, 3)
                cursor = end
                utterances.append(
                    Utterance(f"{sid}_u{k}", sid, speaker, tag, start, end)
                )
    return Corpus(sessions=tuple(sessions), utterances=tuple(utterances))


@pytest.fixture(scope="module")
def corpus_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli_corpus")
    write_corpus(tiny_corpus(), d / "manifest.tsv", d / "sessions.tsv")
    return d


@pytest.fixture(scope="module")
def embedded_files(corpus_files, tmp_path_factory):
    d = tmp_path_factory.mktemp("cli_emb")
    rc = main(
        [
            "synth-embeddings",
            "--corpus", str(corpus_files / "manifest.tsv"),
            "--meta", str(corpus_files / "sessions.tsv"),
            "--dim", "6", "--layers", "2", "--fps", "5",
            "--separation", "4.0", "--seed", "1",
            "--out", str(d),
        ]
    )
    assert rc == 0
    return d


def test_unknown_subcommand_is_usage_error(capsys):
    assert main(["frobnicate"]) == 1


def test_unknown_flag_is_usage_error():
    assert main(["stats", "--bogus"]) == 1


def test_synth_corpus_deterministic(tmp_path):
    for sub in ("a", "b"):
        rc = main(
            [
                "synth-corpus",
                "--seed", "3",
                "--sessions-per-level", "2,2,2",
                "--out", str(tmp_path / sub),
            ]
        )
        assert rc == 0
    assert (tmp_path / "a/manifest.tsv").read_bytes() == (
        tmp_path / "b/manifest.tsv"
    ).read_bytes()
    assert (tmp_path / "a/run_manifest.txt").exists()


def test_stats_writes_reports_and_figures(tmp_path):
    src = tmp_path / "src"
    rc = main(
        ["synth-corpus", "--seed", "5", "--sessions-per-level", "2,2,2",
         "--out", str(src)]
    )
    assert rc == 0
    out = tmp_path / "out"
    rc = main(
        ["stats", "--corpus", str(src / "manifest.tsv"),
         "--meta", str(src / "sessions.tsv"), "--out", str(out)]
    )
    assert rc == 0
    assert (out / "statistics.tsv").exists()
    assert (out / "boxplot.csv").exists()
    figures = list((out / "figures").glob("boxplot_*.png"))
    assert len(figures) == 6


def test_cv_deterministic_and_reported(embedded_files, tmp_path):
    outputs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        rc = main(
            [
                "cv",
                "--corpus", str(embedded_files / "manifest.tsv"),
                "--meta", str(embedded_files / "sessions.tsv"),
                "--task", "child-adult",
                "--seed", "11",
                "--max-epochs", "2",
                "--folds", "3",
                "--out", str(out),
            ]
        )
        assert rc == 0
        outputs.append((out / "eval_report.tsv").read_bytes())
        assert (out / "eval_summary.png").exists()
    assert outputs[0] == outputs[1]


def test_cv_missing_embeddings_is_data_error(corpus_files, tmp_path, capsys):
    rc = main(
        [
            "cv",
            "--corpus", str(corpus_files / "manifest.tsv"),
            "--meta", str(corpus_files / "sessions.tsv"),
            "--task", "speech-voc",
            "--out", str(tmp_path / "out"),
        ]
    )
    assert rc == 2
    assert "embedding" in capsys.readouterr().err


def test_baseline(embedded_files, tmp_path):
    rc = main(
        [
            "baseline",
            "--corpus", str(embedded_files / "manifest.tsv"),
            "--meta", str(embedded_files / "sessions.tsv"),
            "--task", "child-adult",
            "--folds", "3",
            "--out", str(tmp_path),
        ]
    )
    assert rc == 0
    text = (tmp_path / "baseline.tsv").read_text()
    assert text.startswith("session_id\tbaseline_f1")


def test_project_flow(embedded_files, tmp_path):
    from nlskit import classifier as C
    from nlskit.checkpoint import save_model
    from nlskit.corpus import TaskKind, build_task_dataset, parse_corpus

    corpus = parse_corpus(
        embedded_files / "manifest.tsv", embedded_files / "sessions.tsv"
    )
    ds = build_task_dataset(corpus, TaskKind.CHILD_ADULT)
    model = C.train(ds, train_config=C.TrainConfig(seed=1, max_epochs=1))
    ckpt = tmp_path / "model.nlsmdl"
    save_model(model, ckpt)

    out = tmp_path / "proj"
    rc = main(
        [
            "project",
            "--corpus", str(embedded_files / "manifest.tsv"),
            "--meta", str(embedded_files / "sessions.tsv"),
            "--model", str(ckpt),
            "--session", "s0",
            "--view", "child-adult",
            "--perplexity", "2.0",
            "--out", str(out),
        ]
    )
    assert rc == 0
    lines = (out / "projection.csv").read_text().splitlines()
    assert lines[0] == "utterance_id,speaker,tag,x,y"
    # child-adult view keeps only intelligible speech
    assert all("intelligible" in line for line in lines[1:])
    assert (out / "projection.png").exists()


def test_inspect(embedded_files, capsys):
    rc = main(
        [
            "inspect",
            "--corpus", str(embedded_files / "manifest.tsv"),
            "--meta", str(embedded_files / "sessions.tsv"),
            "--check-embeddings",
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "sessions: 6" in out
    assert "0 invalid" in out


def test_help_documents_defaults(capsys):
    with pytest.raises(SystemExit):
        main(["cv", "--help"])
    text = capsys.readouterr().out
    for token in ("5e-5", "1e-4", "64", "40", "5", "0.2"):
        assert token in text


def test_env_seed_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("NLSKIT_SEED", "3")
    rc = main(
        ["synth-corpus", "--sessions-per-level", "2,2,2", "--out", str(tmp_path / "env")]
    )
    assert rc == 0
    monkeypatch.delenv("NLSKIT_SEED")
    rc = main(
        ["synth-corpus", "--seed", "3", "--sessions-per-level", "2,2,2",
         "--out", str(tmp_path / "flag")]
    )
    assert rc == 0
    assert (tmp_path / "env/manifest.tsv").read_bytes() == (
        tmp_path / "flag/manifest.tsv"
    ).read_bytes()


def test_config_file_supplies_defaults(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("seed=3\nsessions-per-level=2,2,2\n")
    rc = main(["synth-corpus", "--config", str(cfg), "--out", str(tmp_path / "cfg")])
    assert rc == 0
    rc = main(
        ["synth-corpus", "--seed", "3", "--sessions-per-level", "2,2,2",
         "--out", str(tmp_path / "flags")]
    )
    assert rc == 0
    assert (tmp_path / "cfg/manifest.tsv").read_bytes() == (
        tmp_path / "flags/manifest.tsv"
    ).read_bytes()
