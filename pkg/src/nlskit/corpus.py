"""Data model for annotated sessions and synthetic corpus generation.

A corpus is a set of sessions (clinical metadata) plus a list of timed,
speaker-attributed, tagged utterances. Manifests are plain UTF-8 TSV so
they can be produced and consumed by any tool.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import DuplicationError, NlskitError, ParseError, ReferentialError


class LanguageLevel(enum.IntEnum):
    """Expert-assigned spoken language level of the child in a session."""

    LL1 = 1
    LL2 = 2
    LL3 = 3


class SpeakerRole(enum.Enum):
    CHILD = "child"
    ADULT = "adult"
    THIRD_PARTY = "third_party"


class VocalTag(enum.Enum):
    INTELLIGIBLE = "intelligible"
    UNINTELLIGIBLE = "unintelligible"
    VOCALIZATION = "vocalization"
    SINGING = "singing"
    OVERLAP = "overlap"


class Gender(enum.Enum):
    MALE = "m"
    FEMALE = "f"


class TaskKind(enum.Enum):
    CHILD_ADULT = "child-adult"
    SPEECH_VOCALIZATION = "speech-voc"


#: Tags eligible for either classification task. Singing and overlap are
#: excluded everywhere; third-party utterances never enter a task dataset.
TASK_TAGS = frozenset(
    {VocalTag.INTELLIGIBLE, VocalTag.UNINTELLIGIBLE, VocalTag.VOCALIZATION}
)

#: Speech tags, the positive class of the speech/vocalization task.
SPEECH_TAGS = frozenset({VocalTag.INTELLIGIBLE, VocalTag.UNINTELLIGIBLE})


@dataclass(frozen=True)
class Utterance:
    """One timed, tagged vocal segment attributed to a speaker role.

    Times are stored with millisecond precision; duration must be
    strictly positive.
    """

    utterance_id: str
    session_id: str
    speaker: SpeakerRole
    tag: VocalTag
    start_s: float
    end_s: float
    embedding_path: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "start_s", round(float(self.start_s), 3))
        object.__setattr__(self, "end_s", round(float(self.end_s), 3))
        if self.start_s < 0:
            raise NlskitError(
                f"utterance {self.utterance_id}: negative start time {self.start_s}"
            )
        if self.end_s <= self.start_s:
            raise NlskitError(
                f"utterance {self.utterance_id}: zero or negative duration "
                f"({self.start_s} .. {self.end_s})"
            )

    @property
    def duration_s(self) -> float:
        return round(self.end_s - self.start_s, 3)


@dataclass(frozen=True)
class SessionMeta:
    """Per-session clinical metadata."""

    session_id: str
    level: LanguageLevel
    child_gender: Gender
    child_age_months: int
    activity_count: int

    def __post_init__(self):
        if not 1 <= self.child_age_months <= 240:
            raise NlskitError(
                f"session {self.session_id}: age {self.child_age_months} months "
                "outside [1, 240]"
            )
        if self.activity_count < 1:
            raise NlskitError(
                f"session {self.session_id}: activity count must be >= 1"
            )


@dataclass(frozen=True)
class Corpus:
    """Immutable collection of sessions and their utterances."""

    sessions: tuple[SessionMeta, ...]
    utterances: tuple[Utterance, ...]
    _by_session: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for meta in self.sessions:
            if meta.session_id in index:
                raise DuplicationError(f"duplicate session id {meta.session_id!r}")
            index[meta.session_id] = meta
        seen = set()
        for utt in self.utterances:
            if utt.utterance_id in seen:
                raise DuplicationError(f"duplicate utterance id {utt.utterance_id!r}")
            seen.add(utt.utterance_id)
            if utt.session_id not in index:
                raise ReferentialError(
                    f"utterance {utt.utterance_id!r} references unknown session "
                    f"{utt.session_id!r}"
                )
        object.__setattr__(self, "_by_session", index)

    def session(self, session_id: str) -> SessionMeta:
        try:
            return self._by_session[session_id]
        except KeyError:
            raise NlskitError(f"unknown session {session_id!r}") from None

    @property
    def session_ids(self) -> list[str]:
        return [m.session_id for m in self.sessions]

    def utterances_of(self, session_id: str) -> list[Utterance]:
        self.session(session_id)
        return [u for u in self.utterances if u.session_id == session_id]


@dataclass(frozen=True)
class TaskDataset:
    """Utterance references with binary labels for one task."""

    task: TaskKind
    items: tuple[tuple[Utterance, int], ...]

    def __len__(self) -> int:
        return len(self.items)


# ---------------------------------------------------------------------------
# TSV parsing / writing
# ---------------------------------------------------------------------------

MANIFEST_HEADER = (
    "utterance_id",
    "session_id",
    "speaker",
    "tag",
    "start_s",
    "end_s",
    "embedding_path",
)
META_HEADER = ("session_id", "level", "gender", "age_months", "activities")

_SPEAKER_TOKENS = {r.value: r for r in SpeakerRole}
_TAG_TOKENS = {t.value: t for t in VocalTag}
_GENDER_TOKENS = {g.value: g for g in Gender}


def _split_row(path, lineno, line, expected):
    cells = line.rstrip("\n").split("\t")
    if len(cells) != expected:
        raise ParseError(
            path, lineno, 1, f"expected {expected} columns, got {len(cells)}"
        )
    return cells


def _parse_enum(path, lineno, column, token, table, kind):
    try:
        return table[token]
    except KeyError:
        raise ParseError(
            path, lineno, column, f"unknown {kind} token {token!r}"
        ) from None


def _parse_float(path, lineno, column, token, kind):
    try:
        return float(token)
    except ValueError:
        raise ParseError(
            path, lineno, column, f"unparsable {kind} {token!r}"
        ) from None


def _parse_int(path, lineno, column, token, kind):
    try:
        return int(token)
    except ValueError:
        raise ParseError(
            path, lineno, column, f"unparsable {kind} {token!r}"
        ) from None


def parse_corpus(manifest_path, session_meta_path) -> Corpus:
    """Parse an utterance manifest and session metadata file into a Corpus.

    Raises ParseError on malformed cells, ReferentialError on dangling
    session ids, DuplicationError on repeated ids.
    """
    manifest_path = Path(manifest_path)
    session_meta_path = Path(session_meta_path)

    sessions = []
    with open(session_meta_path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or tuple(lines[0].split("\t")) != META_HEADER:
        raise ParseError(session_meta_path, 1, 1, "bad or missing header")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = _split_row(session_meta_path, lineno, line, len(META_HEADER))
        level_n = _parse_int(session_meta_path, lineno, 2, cells[1], "level")
        if level_n not in (1, 2, 3):
            raise ParseError(
                session_meta_path, lineno, 2, f"level must be 1, 2 or 3, got {level_n}"
            )
        try:
            meta = SessionMeta(
                session_id=cells[0],
                level=LanguageLevel(level_n),
                child_gender=_parse_enum(
                    session_meta_path, lineno, 3, cells[2], _GENDER_TOKENS, "gender"
                ),
                child_age_months=_parse_int(
                    session_meta_path, lineno, 4, cells[3], "age"
                ),
                activity_count=_parse_int(
                    session_meta_path, lineno, 5, cells[4], "activity count"
                ),
            )
        except NlskitError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(session_meta_path, lineno, 1, str(exc)) from None
        sessions.append(meta)

    utterances = []
    with open(manifest_path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or tuple(lines[0].split("\t")) != MANIFEST_HEADER:
        raise ParseError(manifest_path, 1, 1, "bad or missing header")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = _split_row(manifest_path, lineno, line, len(MANIFEST_HEADER))
        start = _parse_float(manifest_path, lineno, 5, cells[4], "start time")
        end = _parse_float(manifest_path, lineno, 6, cells[5], "end time")
        try:
            utt = Utterance(
                utterance_id=cells[0],
                session_id=cells[1],
                speaker=_parse_enum(
                    manifest_path, lineno, 3, cells[2], _SPEAKER_TOKENS, "speaker"
                ),
                tag=_parse_enum(manifest_path, lineno, 4, cells[3], _TAG_TOKENS, "tag"),
                start_s=start,
                end_s=end,
                embedding_path=cells[6] or None,
            )
        except NlskitError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(manifest_path, lineno, 5, str(exc)) from None
        utterances.append(utt)

    return Corpus(sessions=tuple(sessions), utterances=tuple(utterances))


def write_corpus(corpus: Corpus, manifest_path, session_meta_path) -> None:
    """Write a corpus back to the two TSV files; inverse of parse_corpus."""
    with open(session_meta_path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(META_HEADER) + "\n")
        for m in corpus.sessions:
            fh.write(
                f"{m.session_id}\t{int(m.level)}\t{m.child_gender.value}"
                f"\t{m.child_age_months}\t{m.activity_count}\n"
            )
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(MANIFEST_HEADER) + "\n")
        for u in corpus.utterances:
            fh.write(
                f"{u.utterance_id}\t{u.session_id}\t{u.speaker.value}\t{u.tag.value}"
                f"\t{u.start_s:.3f}\t{u.end_s:.3f}\t{u.embedding_path or ''}\n"
            )


# ---------------------------------------------------------------------------
# Task-dataset construction
# ---------------------------------------------------------------------------


def build_task_dataset(
    corpus: Corpus, task: TaskKind, min_duration_s: float = 0.1
) -> TaskDataset:
    """Select and label utterances for one classification task.

    Third-party speakers, singing and overlap tags, and utterances shorter
    than min_duration_s are excluded from both tasks. Ties at exactly
    min_duration_s are kept.
    """
    items = []
    for u in corpus.utterances:
        if u.speaker is SpeakerRole.THIRD_PARTY:
            continue
        if u.tag not in TASK_TAGS:
            continue
        if u.duration_s < min_duration_s:
            continue
        if task is TaskKind.CHILD_ADULT:
            items.append((u, 1 if u.speaker is SpeakerRole.CHILD else 0))
        else:
            if u.speaker is not SpeakerRole.CHILD:
                continue
            items.append((u, 1 if u.tag in SPEECH_TAGS else 0))
    return TaskDataset(task=task, items=tuple(items))


# ---------------------------------------------------------------------------
# Synthetic corpus generation
# ---------------------------------------------------------------------------

#: (speaker, tag) categories tracked by the per-session statistics, in
#: report order.
STAT_CATEGORIES: tuple[tuple[SpeakerRole, VocalTag], ...] = (
    (SpeakerRole.CHILD, VocalTag.INTELLIGIBLE),
    (SpeakerRole.CHILD, VocalTag.UNINTELLIGIBLE),
    (SpeakerRole.CHILD, VocalTag.VOCALIZATION),
    (SpeakerRole.ADULT, VocalTag.INTELLIGIBLE),
    (SpeakerRole.ADULT, VocalTag.UNINTELLIGIBLE),
    (SpeakerRole.ADULT, VocalTag.VOCALIZATION),
)


def category_name(speaker: SpeakerRole, tag: VocalTag) -> str:
    return f"{speaker.value}_{tag.value}"


#: Per-level (LL1, LL2, LL3) calibration of per-session utterance counts:
#: (mean, std) of the count distribution for each category.
COUNT_CALIBRATION: dict[tuple[SpeakerRole, VocalTag], tuple[tuple[float, float], ...]] = {
    (SpeakerRole.CHILD, VocalTag.INTELLIGIBLE): ((2.4, 3.8), (38.1, 20.8), (155.0, 54.0)),
    (SpeakerRole.CHILD, VocalTag.UNINTELLIGIBLE): ((3.7, 6.8), (25.2, 14.3), (23.6, 24.5)),
    (SpeakerRole.CHILD, VocalTag.VOCALIZATION): ((64.6, 37.9), (75.2, 57.4), (48.8, 33.4)),
    (SpeakerRole.ADULT, VocalTag.INTELLIGIBLE): ((202.0, 66.2), (188.0, 44.5), (182.0, 49.0)),
    (SpeakerRole.ADULT, VocalTag.UNINTELLIGIBLE): ((9.3, 8.6), (4.1, 4.8), (2.6, 3.0)),
    (SpeakerRole.ADULT, VocalTag.VOCALIZATION): ((42.2, 31.3), (22.5, 13.9), (17.5, 11.1)),
}

#: Per-level calibration of per-session mean utterance duration (seconds).
DURATION_CALIBRATION: dict[tuple[SpeakerRole, VocalTag], tuple[tuple[float, float], ...]] = {
    (SpeakerRole.CHILD, VocalTag.INTELLIGIBLE): ((0.5, 0.1), (0.9, 0.2), (1.2, 0.5)),
    (SpeakerRole.CHILD, VocalTag.UNINTELLIGIBLE): ((0.7, 0.2), (1.0, 0.3), (1.0, 0.3)),
    (SpeakerRole.CHILD, VocalTag.VOCALIZATION): ((0.9, 0.3), (0.9, 0.3), (0.8, 0.3)),
    (SpeakerRole.ADULT, VocalTag.INTELLIGIBLE): ((1.3, 0.5), (1.2, 0.4), (1.3, 0.5)),
    (SpeakerRole.ADULT, VocalTag.UNINTELLIGIBLE): ((0.8, 0.2), (0.6, 0.3), (0.9, 0.4)),
    (SpeakerRole.ADULT, VocalTag.VOCALIZATION): ((0.6, 0.2), (0.7, 0.3), (0.6, 0.1)),
}

#: Session counts per level in the reference cohort (used as the default
#: sessions_per_level) and its gender / age / activity summaries.
REFERENCE_SESSIONS_PER_LEVEL = (14, 15, 16)
_AGE_MEAN, _AGE_STD, _AGE_MIN, _AGE_MAX = 79.0, 12.3, 50, 95
_FEMALE_FRACTION = 7.0 / 45.0
_ACTIVITY_MEAN, _ACTIVITY_STD, _ACTIVITY_MIN, _ACTIVITY_MAX = 1.9, 1.1, 1, 5

_MIN_DURATION_S = 0.1


def synthesize_corpus(
    seed: int,
    sessions_per_level: tuple[int, int, int] = REFERENCE_SESSIONS_PER_LEVEL,
) -> Corpus:
    """Generate a corpus whose per-session statistics match the calibration
    tables above; fully deterministic given the seed.

    Category counts are drawn normal(mean, std), rounded, clipped at 0.
    Each session draws a category duration mean from the duration table,
    then per-utterance durations normal around it (std 0.3x the mean),
    clipped at 0.1 s.
    """
    if any(c < 2 for c in sessions_per_level):
        raise NlskitError("need at least 2 sessions per level")
    rng = np.random.default_rng(seed)

    sessions = []
    utterances = []
    session_n = 0
    for level_idx, level in enumerate(LanguageLevel):
        for _ in range(sessions_per_level[level_idx]):
            session_n += 1
            sid = f"s{session_n:03d}"
            age = int(np.clip(round(rng.normal(_AGE_MEAN, _AGE_STD)), _AGE_MIN, _AGE_MAX))
            gender = Gender.FEMALE if rng.random() < _FEMALE_FRACTION else Gender.MALE
            activities = int(
                np.clip(
                    round(rng.normal(_ACTIVITY_MEAN, _ACTIVITY_STD)),
                    _ACTIVITY_MIN,
                    _ACTIVITY_MAX,
                )
            )
            sessions.append(
                SessionMeta(
                    session_id=sid,
                    level=level,
                    child_gender=gender,
                    child_age_months=age,
                    activity_count=activities,
                )
            )

            cursor = 0.0
            utt_n = 0
            for speaker, tag in STAT_CATEGORIES:
                cmean, cstd = COUNT_CALIBRATION[(speaker, tag)][level_idx]
                count = max(0, int(round(rng.normal(cmean, cstd))))
                dmean, dstd = DURATION_CALIBRATION[(speaker, tag)][level_idx]
                session_mean = max(_MIN_DURATION_S, rng.normal(dmean, dstd))
                for _ in range(count):
                    utt_n += 1
                    dur = max(
                        _MIN_DURATION_S,
                        rng.normal(session_mean, 0.3 * session_mean),
                    )
                    dur = round(dur, 3)
                    gap = round(rng.uniform(0.05, 0.5), 3)
                    start = round(cursor + gap, 3)
                    end = round(start + dur, 3)
                    cursor = end
                    utterances.append(
                        Utterance(
                            utterance_id=f"{sid}_u{utt_n:04d}",
                            session_id=sid,
                            speaker=speaker,
                            tag=tag,
                            start_s=start,
                            end_s=end,
                        )
                    )

    return Corpus(sessions=tuple(sessions), utterances=tuple(utterances))


def with_embedding_paths(corpus: Corpus, paths: dict[str, str]) -> Corpus:
    """Return a copy of the corpus with embedding paths attached."""
    updated = tuple(
        replace(u, embedding_path=paths.get(u.utterance_id, u.embedding_path))
        for u in corpus.utterances
    )
    return Corpus(sessions=corpus.sessions, utterances=updated)
