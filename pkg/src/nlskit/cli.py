"""Command-line entry point.

Subcommands: synth-corpus, synth-embeddings, stats, cv, baseline,
project, inspect. Exit status 0 on success, 1 on usage errors, 2 on data
errors. Every run writes a run_manifest.txt under --out capturing the
resolved configuration, seed, and toolkit version.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, classifier, evaluation, plots, projection, stats
from .corpus import (
    SPEECH_TAGS,
    STAT_CATEGORIES,
    SpeakerRole,
    TaskKind,
    VocalTag,
    build_task_dataset,
    category_name,
    parse_corpus,
    synthesize_corpus,
    write_corpus,
)
from .embedding_io import read_embedding, synthesize_embeddings
from .errors import NlskitError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


_TASKS = {t.value: t for t in TaskKind}


def _read_config_file(path) -> dict[str, str]:
    """Flat key=value config; blank lines and # comments ignored."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise NlskitError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _resolve_seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("NLSKIT_SEED")
    return int(env) if env else 0


def _write_run_manifest(out_dir: Path, subcommand: str, args: argparse.Namespace):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "run_manifest.txt", "w", encoding="utf-8") as fh:
        fh.write(f"tool=nlskit {__version__}\n")
        fh.write(f"subcommand={subcommand}\n")
        for key, value in sorted(vars(args).items()):
            if key in ("func", "config"):
                continue
            fh.write(f"{key}={value}\n")


def _train_config(args) -> classifier.TrainConfig:
    return classifier.TrainConfig(
        lr=args.lr,
        weight_decay=args.weight_decay,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        patience=args.patience,
        val_fraction=args.val_fraction,
        seed=args.seed,
    )


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--lr", type=float, default=5e-5, help="Adam learning rate (default 5e-5)")
    p.add_argument("--weight-decay", type=float, default=1e-4,
                   help="L2 weight decay inside Adam (default 1e-4)")
    p.add_argument("--batch-size", type=int, default=64, help="batch size (default 64)")
    p.add_argument("--max-epochs", type=int, default=40, help="epoch cap (default 40)")
    p.add_argument("--patience", type=int, default=5,
                   help="early-stopping patience on validation loss (default 5)")
    p.add_argument("--val-fraction", type=float, default=0.2,
                   help="utterance-level validation fraction (default 0.2, an 8:2 split)")


def _add_corpus_flags(p: argparse.ArgumentParser):
    p.add_argument("--corpus", required=True, help="utterance manifest TSV")
    p.add_argument("--meta", required=True, help="session metadata TSV")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_synth_corpus(args):
    counts = tuple(int(c) for c in args.sessions_per_level.split(","))
    if len(counts) != 3:
        raise _UsageError("--sessions-per-level takes three comma-separated counts")
    corpus = synthesize_corpus(args.seed, counts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus(corpus, out / "manifest.tsv", out / "sessions.tsv")
    _write_run_manifest(out, "synth-corpus", args)
    print(f"wrote {len(corpus.sessions)} sessions, {len(corpus.utterances)} utterances to {out}")


def cmd_synth_embeddings(args):
    corpus = parse_corpus(args.corpus, args.meta)
    out = Path(args.out)
    updated = synthesize_embeddings(
        corpus,
        out / "emb",
        seed=args.seed,
        dim=args.dim,
        layers=args.layers,
        separation=args.separation,
        fps=args.fps,
    )
    write_corpus(updated, out / "manifest.tsv", out / "sessions.tsv")
    _write_run_manifest(out, "synth-embeddings", args)
    n = sum(1 for u in updated.utterances if u.embedding_path)
    print(f"wrote {n} embedding files under {out / 'emb'}")


def cmd_stats(args):
    corpus = parse_corpus(args.corpus, args.meta)
    out = Path(args.out)
    stats_path, box_path = stats.emit_stats_report(corpus, out)
    figures = plots.render_stats_boxplots(corpus, out / "figures")
    _write_run_manifest(out, "stats", args)
    print(f"wrote {stats_path}, {box_path}, and {len(figures)} figures")


def _require_embeddings(corpus, task):
    dataset = build_task_dataset(corpus, task)
    for u, _ in dataset.items:
        if not u.embedding_path:
            raise NlskitError(
                f"utterance {u.utterance_id} has no embedding path in the manifest"
            )
        if not Path(u.embedding_path).exists():
            raise NlskitError(f"missing embedding file {u.embedding_path}")


def cmd_cv(args):
    corpus = parse_corpus(args.corpus, args.meta)
    task = _TASKS[args.task]
    _require_embeddings(corpus, task)
    report = evaluation.run_cross_validation(
        corpus,
        task,
        train_config=_train_config(args),
        k=args.folds,
        seed=args.seed,
        jobs=args.jobs,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evaluation.write_eval_report(report, out / "eval_report.tsv")
    plots.render_eval_summary(report, out / "eval_summary.png")
    _write_run_manifest(out, "cv", args)
    print(f"overall F1 macro {report.overall:.4f} "
          f"(baseline {report.baseline_overall:.4f}) over {len(report.sessions)} sessions")


def cmd_baseline(args):
    corpus = parse_corpus(args.corpus, args.meta)
    task = _TASKS[args.task]
    plan = evaluation.make_folds(corpus, k=args.folds, seed=args.seed)
    dataset = build_task_dataset(corpus, task)
    by_session = {}
    for u, y in dataset.items:
        by_session.setdefault(u.session_id, []).append(y)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for fold in range(plan.k):
        test_ids = plan.test_sessions(fold)
        train_labels = [
            y for u, y in dataset.items if u.session_id not in test_ids
        ]
        for sid in sorted(test_ids):
            truth = by_session.get(sid)
            if not truth:
                continue
            rows.append((sid, evaluation.majority_baseline(train_labels, truth)))
    rows.sort()
    with open(out / "baseline.tsv", "w", encoding="utf-8") as fh:
        fh.write("session_id\tbaseline_f1\n")
        for sid, score in rows:
            fh.write(f"{sid}\t{score:.6g}\n")
        overall = sum(s for _, s in rows) / len(rows) if rows else float("nan")
        fh.write(f"#AGG\toverall\t{overall:.6g}\n")
    _write_run_manifest(out, "baseline", args)
    print(f"majority baseline overall F1 macro {overall:.4f}")


def cmd_project(args):
    corpus = parse_corpus(args.corpus, args.meta)
    from .checkpoint import load_model

    model = load_model(args.model)
    utts = corpus.utterances_of(args.session)
    if args.view == "child-adult":
        selected = [
            u for u in utts
            if u.tag is VocalTag.INTELLIGIBLE
            and u.speaker in (SpeakerRole.CHILD, SpeakerRole.ADULT)
        ]
    else:  # tags view: child utterances across the three task tags
        selected = [
            u for u in utts
            if u.speaker is SpeakerRole.CHILD
            and u.tag in {t for pair in STAT_CATEGORIES for t in (pair[1],)}
        ]
    selected = [u for u in selected if u.embedding_path]
    if len(selected) < 4:
        raise NlskitError(
            f"session {args.session}: only {len(selected)} eligible utterances "
            "with embeddings; need at least 4 for a projection"
        )
    pooled = np.stack(
        [classifier.predict(model, read_embedding(u.embedding_path).data)[2]
         for u in selected]
    )
    config = projection.TsneConfig(perplexity=args.perplexity, seed=args.seed)
    coords = projection.tsne(pooled, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [
        (u.utterance_id, u.speaker.value, u.tag.value, float(x), float(y))
        for u, (x, y) in zip(selected, coords)
    ]
    csv_path = out / "projection.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utterance_id", "speaker", "tag", "x", "y"])
        writer.writerows(rows)
    color_key = "speaker" if args.view == "child-adult" else "tag"
    plots.render_projection(rows, out / "projection.png", color_key)
    _write_run_manifest(out, "project", args)
    print(f"projected {len(rows)} utterances to {csv_path}")


def cmd_inspect(args):
    corpus = parse_corpus(args.corpus, args.meta)
    per_level = {1: 0, 2: 0, 3: 0}
    for m in corpus.sessions:
        per_level[int(m.level)] += 1
    print(f"sessions: {len(corpus.sessions)} "
          f"(LL1 {per_level[1]}, LL2 {per_level[2]}, LL3 {per_level[3]})")
    print(f"utterances: {len(corpus.utterances)}")
    for speaker, tag in STAT_CATEGORIES:
        n = sum(1 for u in corpus.utterances if u.speaker is speaker and u.tag is tag)
        print(f"  {category_name(speaker, tag)}: {n}")
    other = sum(1 for u in corpus.utterances
                if u.speaker is SpeakerRole.THIRD_PARTY
                or u.tag in (VocalTag.SINGING, VocalTag.OVERLAP))
    print(f"  excluded (third party / singing / overlap): {other}")
    for task in TaskKind:
        ds = build_task_dataset(corpus, task)
        pos = sum(y for _, y in ds.items)
        print(f"task {task.value}: {len(ds)} items ({pos} positive)")
    with_emb = [u for u in corpus.utterances if u.embedding_path]
    if with_emb and args.check_embeddings:
        bad = 0
        for u in with_emb:
            try:
                read_embedding(u.embedding_path)
            except NlskitError as exc:
                bad += 1
                print(f"  BAD {u.embedding_path}: {exc}")
        print(f"embeddings: {len(with_emb)} referenced, {bad} invalid")
    elif with_emb:
        print(f"embeddings: {len(with_emb)} referenced (use --check-embeddings to validate)")


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="nlskit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"nlskit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="flat key=value config file; flags override")
        p.add_argument("--seed", type=int, default=None,
                       help="RNG seed (falls back to NLSKIT_SEED, then 0)")

    p = sub.add_parser("synth-corpus", help="generate a calibrated synthetic corpus")
    common(p)
    p.add_argument("--sessions-per-level", default="14,15,16",
                   help="comma-separated session counts for LL1,LL2,LL3")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_corpus)

    p = sub.add_parser("synth-embeddings", help="generate synthetic embedding files")
    common(p)
    _add_corpus_flags(p)
    p.add_argument("--dim", type=int, default=32, help="embedding dimension")
    p.add_argument("--layers", type=int, default=4, help="number of layers")
    p.add_argument("--fps", type=float, default=50.0, help="frames per second (default 50)")
    p.add_argument("--separation", type=float, required=True,
                   help="class-mean separation in feature space")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_embeddings)

    p = sub.add_parser("stats", help="per-session statistics, ANOVA table, box plots")
    common(p)
    _add_corpus_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("cv", help="session-level cross-validated training and evaluation")
    common(p)
    _add_corpus_flags(p)
    p.add_argument("--task", choices=sorted(_TASKS), required=True)
    p.add_argument("--folds", type=int, default=5, help="number of folds (default 5)")
    p.add_argument("--jobs", type=int, default=1, help="concurrent folds (default 1)")
    _add_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("baseline", help="majority-vote baseline over the CV folds")
    common(p)
    _add_corpus_flags(p)
    p.add_argument("--task", choices=sorted(_TASKS), required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("project", help="t-SNE projection of pooled vectors for one session")
    common(p)
    _add_corpus_flags(p)
    p.add_argument("--model", required=True, help="trained model checkpoint")
    p.add_argument("--session", required=True, help="session id to project")
    p.add_argument("--view", choices=["child-adult", "tags"], required=True,
                   help="child-adult: intelligible speech only; tags: child utterances only")
    p.add_argument("--perplexity", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("inspect", help="summarize a corpus and validate embeddings")
    common(p)
    _add_corpus_flags(p)
    p.add_argument("--check-embeddings", action="store_true")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            overrides = _read_config_file(args.config)
            explicit = set()
            for token in (argv if argv is not None else sys.argv[1:]):
                if token.startswith("--"):
                    explicit.add(token[2:].split("=")[0].replace("-", "_"))
            for key, value in overrides.items():
                if key in explicit or not hasattr(args, key):
                    continue
                current = getattr(args, key)
                if isinstance(current, bool):
                    setattr(args, key, value.lower() in ("1", "true", "yes"))
                elif isinstance(current, int):
                    setattr(args, key, int(value))
                elif isinstance(current, float):
                    setattr(args, key, float(value))
                else:
                    setattr(args, key, value)
        if hasattr(args, "seed"):
            args.seed = _resolve_seed(args.seed)
        args.func(args)
        return 0
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except NlskitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
