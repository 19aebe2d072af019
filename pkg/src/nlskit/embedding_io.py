"""Bit-exact storage of layer-wise utterance embeddings (NLSEMB v1).

File layout: 8 magic bytes ``NLSEMB01``, four unsigned 32-bit
little-endian integers (layers, frames, dim, dtype code 0 = float32 LE),
then the layer-major payload. No padding, no trailer.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, SpeakerRole, TASK_TAGS, Utterance, with_embedding_paths
from .errors import DataError, FormatError, NlskitError

MAGIC = b"NLSEMB01"
_HEADER = struct.Struct("<4I")
DTYPE_F32_LE = 0

#: Maximum utterance duration fed to the model, in seconds.
MAX_DURATION_S = 3.0


@dataclass(frozen=True)
class EmbeddingTensor:
    """Layer-major [L, T, D] float32 hidden states for one utterance."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype="<f4")
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise DataError(f"embedding must be [L, T, D] with all dims >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DataError("embedding contains non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def layers(self) -> int:
        return self.data.shape[0]

    @property
    def frames(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]


def write_embedding(tensor: EmbeddingTensor, path) -> None:
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(
                _HEADER.pack(tensor.layers, tensor.frames, tensor.dim, DTYPE_F32_LE)
            )
            fh.write(tensor.data.tobytes())
    except OSError as exc:
        raise NlskitError(f"cannot write embedding to {path}: {exc}") from exc


def read_embedding(path) -> EmbeddingTensor:
    path = Path(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + _HEADER.size:
        raise FormatError(f"{path}: file too short for an NLSEMB header")
    if blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:8]!r}")
    layers, frames, dim, dtype = _HEADER.unpack_from(blob, len(MAGIC))
    if dtype != DTYPE_F32_LE:
        raise FormatError(f"{path}: unsupported dtype code {dtype}")
    if min(layers, frames, dim) < 1:
        raise FormatError(f"{path}: zero dimension in header ({layers},{frames},{dim})")
    expected = layers * frames * dim * 4
    payload = blob[len(MAGIC) + _HEADER.size :]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(layers, frames, dim)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: non-finite values in payload")
    return EmbeddingTensor(arr)


# ---------------------------------------------------------------------------
# Synthetic embeddings
# ---------------------------------------------------------------------------


def frame_count(duration_s: float, fps: float) -> int:
    """Frames for an utterance, capping duration at MAX_DURATION_S."""
    return max(1, int(round(min(duration_s, MAX_DURATION_S) * fps)))


def _class_directions(n_classes: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Fixed direction vectors, orthonormal when dim >= n_classes."""
    raw = rng.standard_normal((dim, max(n_classes, 2)))
    q, _ = np.linalg.qr(raw)
    cols = [q[:, c % q.shape[1]] for c in range(n_classes)]
    return np.stack(cols, axis=0)


def eligible_for_embedding(u: Utterance) -> bool:
    return (
        u.speaker in (SpeakerRole.CHILD, SpeakerRole.ADULT)
        and u.tag in TASK_TAGS
        and u.duration_s >= 0.1
    )


def synthesize_embeddings(
    corpus: Corpus,
    out_dir,
    seed: int,
    dim: int,
    layers: int,
    separation: float,
    fps: float = 50.0,
) -> Corpus:
    """Write a synthetic NLSEMB file per eligible utterance.

    Frames are unit-variance Gaussians around separation * u_c, where u_c
    is a fixed per-(speaker, tag) direction; separation 0 makes all
    classes indistinguishable. Returns a corpus copy with embedding paths
    attached. Deterministic given the seed.
    """
    if dim < 2 or layers < 1 or separation < 0 or fps <= 0:
        raise NlskitError("need dim >= 2, layers >= 1, separation >= 0, fps > 0")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    classes = [
        (sp, tag)
        for sp in (SpeakerRole.CHILD, SpeakerRole.ADULT)
        for tag in sorted(TASK_TAGS, key=lambda t: t.value)
    ]
    directions = _class_directions(len(classes), dim, rng)
    class_index = {c: i for i, c in enumerate(classes)}

    paths = {}
    for u in corpus.utterances:
        if not eligible_for_embedding(u):
            continue
        t = frame_count(u.duration_s, fps)
        mu = separation * directions[class_index[(u.speaker, u.tag)]]
        data = rng.standard_normal((layers, t, dim)) + mu
        path = out_dir / f"{u.utterance_id}.nlsemb"
        write_embedding(EmbeddingTensor(data.astype("<f4")), path)
        paths[u.utterance_id] = str(path)

    return with_embedding_paths(corpus, paths)
