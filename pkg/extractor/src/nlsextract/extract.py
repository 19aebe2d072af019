"""Run a manifest of utterances through an encoder and emit NLSEMB files.

The manifest is the utterance TSV used by nlskit (columns utterance_id,
session_id, speaker, tag, start_s, end_s, embedding_path); audio is one WAV
per session at <audio_dir>/<session_id>.wav. Each utterance is cropped to
[start_s, min(end_s, start_s + 3 s)], skipped if shorter than 0.1 s, and
written as one NLSEMB tensor holding every hidden state of the encoder.
"""

from __future__ import annotations

import csv
import json
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from nlskit.embedding_io import EmbeddingTensor, write_embedding

from .audio import AudioError, crop, load_wav_16k
from .encoders import LoadedEncoder

MAX_DURATION_S = 3.0
MIN_DURATION_S = 0.1

_MANIFEST_FIELDS = (
    "utterance_id",
    "session_id",
    "speaker",
    "tag",
    "start_s",
    "end_s",
    "embedding_path",
)


class DimensionMismatch(Exception):
    """Encoder output width disagrees with the family spec."""


@dataclass
class ExtractResult:
    written: dict[str, str] = field(default_factory=dict)
    skipped: dict[str, str] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    layer_count: int | None = None


def _read_manifest(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh, delimiter="\t"))
    missing = set(_MANIFEST_FIELDS[:6]) - set(rows[0] if rows else _MANIFEST_FIELDS)
    if rows and missing:
        raise ValueError(f"manifest missing columns: {sorted(missing)}")
    return rows


def _write_manifest(path: Path, rows: list[dict[str, str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_MANIFEST_FIELDS, delimiter="\t")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in _MANIFEST_FIELDS})


def _write_provenance(path: Path, encoder: LoadedEncoder, result: ExtractResult) -> None:
    import torch
    import transformers

    payload = {
        "family": encoder.spec.family.value,
        "checkpoint_id": encoder.spec.checkpoint_id,
        "weights_source": encoder.source,
        "expected_dim": encoder.spec.expected_dim,
        "expected_transformer_layers": encoder.spec.expected_transformer_layers,
        "emitted_layer_count": result.layer_count,
        "torch_version": torch.__version__,
        "transformers_version": transformers.__version__,
        "platform": platform.platform(),
    }
    path.write_text(json.dumps(payload, indent=2) + "\n")


def extract(
    audio_dir: str | Path,
    manifest_path: str | Path,
    encoder: LoadedEncoder,
    out_dir: str | Path,
    workers: int = 1,
) -> ExtractResult:
    """Embed every manifest utterance; return what was written or skipped.

    Writes NLSEMB files plus an updated manifest (embedding_path filled in),
    a provenance JSON, and a skip/error log under out_dir. Undecodable audio
    becomes a per-utterance error record; a dimension mismatch against the
    encoder spec aborts the run.
    """
    audio_dir = Path(audio_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = _read_manifest(Path(manifest_path))
    result = ExtractResult()

    waveforms: dict[str, np.ndarray | AudioError] = {}
    for sid in sorted({r["session_id"] for r in rows}):
        try:
            waveforms[sid] = load_wav_16k(audio_dir / f"{sid}.wav")
        except AudioError as exc:
            waveforms[sid] = exc

    def embed(row: dict[str, str]) -> None:
        uid = row["utterance_id"]
        wav = waveforms[row["session_id"]]
        if isinstance(wav, AudioError):
            result.errors[uid] = str(wav)
            return
        start = float(row["start_s"])
        end = min(float(row["end_s"]), start + MAX_DURATION_S)
        duration = end - start
        if duration < MIN_DURATION_S:
            result.skipped[uid] = "too_short"
            return
        segment = crop(wav, start, end)
        states = encoder.hidden_states(segment, duration)
        if states.shape[2] != encoder.spec.expected_dim:
            raise DimensionMismatch(
                f"{uid}: got D={states.shape[2]}, "
                f"expected {encoder.spec.expected_dim}"
            )
        result.layer_count = states.shape[0]
        path = out_dir / f"{uid}.nlsemb"
        write_embedding(EmbeddingTensor(states), path)
        result.written[uid] = str(path)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for future in [pool.submit(embed, r) for r in rows]:
                future.result()
    else:
        for row in rows:
            embed(row)

    for row in rows:
        if row["utterance_id"] in result.written:
            row["embedding_path"] = result.written[row["utterance_id"]]
    _write_manifest(out_dir / "manifest.tsv", rows)
    _write_provenance(out_dir / "provenance.json", encoder, result)
    with open(out_dir / "extract_log.tsv", "w") as fh:
        fh.write("utterance_id\tstatus\tdetail\n")
        for uid, reason in sorted(result.skipped.items()):
            fh.write(f"{uid}\tskipped\t{reason}\n")
        for uid, message in sorted(result.errors.items()):
            fh.write(f"{uid}\terror\t{message}\n")
    return result
