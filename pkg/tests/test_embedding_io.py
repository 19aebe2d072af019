import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlskit.corpus import SpeakerRole, VocalTag, synthesize_corpus
from nlskit.embedding_io import (
    EmbeddingTensor,
    frame_count,
    read_embedding,
    synthesize_embeddings,
    write_embedding,
)
from nlskit.errors import DataError, FormatError


def test_minimal_file_size(tmp_path):
    path = tmp_path / "t.nlsemb"
    write_embedding(EmbeddingTensor(np.zeros((1, 1, 1), dtype=np.float32)), path)
    assert path.stat().st_size == 28


def test_round_trip_large(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.standard_normal((13, 150, 768)).astype("<f4")
    path = tmp_path / "t.nlsemb"
    write_embedding(EmbeddingTensor(data), path)
    back = read_embedding(path)
    assert back.data.tobytes() == data.tobytes()


def test_nan_rejected():
    data = np.zeros((1, 2, 2), dtype=np.float32)
    data[0, 0, 0] = np.nan
    with pytest.raises(DataError):
        EmbeddingTensor(data)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.nlsemb"
    path.write_bytes(b"XXXXXXXX" + struct.pack("<4I", 1, 1, 1, 0) + b"\0" * 4)
    with pytest.raises(FormatError, match="magic"):
        read_embedding(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "short.nlsemb"
    # header claims 10 frames, payload holds 9
    payload = np.zeros((1, 9, 1), dtype="<f4").tobytes()
    path.write_bytes(b"NLSEMB01" + struct.pack("<4I", 1, 10, 1, 0) + payload)
    with pytest.raises(FormatError, match="payload"):
        read_embedding(path)


def test_unknown_dtype_code(tmp_path):
    path = tmp_path / "dt.nlsemb"
    path.write_bytes(b"NLSEMB01" + struct.pack("<4I", 1, 1, 1, 7) + b"\0" * 4)
    with pytest.raises(FormatError, match="dtype"):
        read_embedding(path)


@given(
    st.integers(1, 4),
    st.integers(1, 20),
    st.integers(1, 16),
    st.integers(0, 2**32 - 1),
)
@settings(max_examples=40, deadline=None)
def test_round_trip_property(tmp_path_factory, layers, frames, dim, seed):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((layers, frames, dim)).astype("<f4")
    path = tmp_path_factory.mktemp("rt") / "t.nlsemb"
    write_embedding(EmbeddingTensor(data), path)
    assert read_embedding(path).data.tobytes() == data.tobytes()


def test_frame_count_arithmetic():
    assert frame_count(2.0, 50) == 100
    assert frame_count(5.0, 50) == 150  # 3 s cap
    assert frame_count(0.001, 50) == 1


def test_synthetic_frame_cap(small_corpus, tmp_path):
    fps = 10
    corpus = synthesize_embeddings(
        small_corpus, tmp_path, seed=2, dim=6, layers=2, separation=1.0, fps=fps
    )
    cap = math.ceil(3 * fps)
    checked = 0
    for u in corpus.utterances:
        if u.embedding_path is None:
            continue
        t = read_embedding(u.embedding_path).frames
        assert t <= cap
        assert t == frame_count(u.duration_s, fps)
        checked += 1
        if checked >= 200:
            break
    assert checked > 0


def test_synthesize_covers_eligible_only(small_corpus, tmp_path):
    corpus = synthesize_embeddings(
        small_corpus, tmp_path, seed=2, dim=6, layers=2, separation=1.0, fps=5
    )
    for u in corpus.utterances:
        eligible = (
            u.speaker in (SpeakerRole.CHILD, SpeakerRole.ADULT)
            and u.tag
            in (VocalTag.INTELLIGIBLE, VocalTag.UNINTELLIGIBLE, VocalTag.VOCALIZATION)
            and u.duration_s >= 0.1
        )
        assert (u.embedding_path is not None) == eligible


def test_synthesize_deterministic(small_corpus, tmp_path):
    a = synthesize_embeddings(
        small_corpus, tmp_path / "a", seed=9, dim=6, layers=2, separation=2.0, fps=5
    )
    b = synthesize_embeddings(
        small_corpus, tmp_path / "b", seed=9, dim=6, layers=2, separation=2.0, fps=5
    )
    for ua, ub in zip(a.utterances, b.utterances):
        if ua.embedding_path is None:
            continue
        da = read_embedding(ua.embedding_path).data
        db = read_embedding(ub.embedding_path).data
        assert np.array_equal(da, db)
        break
