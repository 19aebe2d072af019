"""Model checkpoint serialization (NLSMDL v1).

Layout: 8 magic bytes ``NLSMDL01``; seven unsigned 32-bit LE integers
(input layers, input dim, conv channels, conv layers, conv kernel,
fc hidden, n classes); one float32 LE (dropout p); one unsigned 64-bit LE
footer offset; parameter blocks as float32 LE in PARAM_NAMES order; then
a UTF-8 TSV training-log footer starting at the recorded offset.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .classifier import (
    EpochStats,
    ModelConfig,
    ModelParams,
    PARAM_NAMES,
    TrainedModel,
    param_shapes,
)
from .errors import FormatError

MAGIC = b"NLSMDL01"
_HEADER = struct.Struct("<7IfQ")
_LOG_HEADER = "epoch\ttrain_loss\tval_loss\tval_f1"


def save_model(model: TrainedModel, path) -> None:
    cfg = model.config
    shapes = param_shapes(cfg)
    blocks = b"".join(
        np.ascontiguousarray(model.params[name], dtype="<f4").tobytes()
        for name in PARAM_NAMES
    )
    footer_offset = len(MAGIC) + _HEADER.size + len(blocks)
    footer_lines = [_LOG_HEADER]
    footer_lines += [
        f"{e.epoch}\t{e.train_loss!r}\t{e.val_loss!r}\t{e.val_f1!r}"
        for e in model.training_log
    ]
    footer = ("\n".join(footer_lines) + "\n").encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(
            _HEADER.pack(
                cfg.input_layers,
                cfg.input_dim,
                cfg.conv_channels,
                cfg.conv_layers,
                cfg.conv_kernel,
                cfg.fc_hidden,
                cfg.n_classes,
                cfg.dropout_p,
                footer_offset,
            )
        )
        assert sum(int(np.prod(shapes[n])) for n in PARAM_NAMES) * 4 == len(blocks)
        fh.write(blocks)
        fh.write(footer)


def load_model(path) -> TrainedModel:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < len(MAGIC) + _HEADER.size:
        raise FormatError(f"{path}: too short for a checkpoint header")
    if blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:8]!r}")
    (
        layers,
        dim,
        conv_channels,
        conv_layers,
        conv_kernel,
        fc_hidden,
        n_classes,
        dropout_p,
        footer_offset,
    ) = _HEADER.unpack_from(blob, len(MAGIC))
    cfg = ModelConfig(
        input_layers=layers,
        input_dim=dim,
        conv_channels=conv_channels,
        conv_layers=conv_layers,
        conv_kernel=conv_kernel,
        fc_hidden=fc_hidden,
        n_classes=n_classes,
        dropout_p=round(float(dropout_p), 6),
    )
    shapes = param_shapes(cfg)
    offset = len(MAGIC) + _HEADER.size
    expected = sum(int(np.prod(s)) for s in shapes.values()) * 4
    if footer_offset != offset + expected or footer_offset > len(blob):
        raise FormatError(f"{path}: parameter section length mismatch")
    arrays = {}
    for name in PARAM_NAMES:
        shape = shapes[name]
        n = int(np.prod(shape)) * 4
        arrays[name] = (
            np.frombuffer(blob, dtype="<f4", count=n // 4, offset=offset)
            .reshape(shape)
            .copy()
        )
        offset += n

    log = []
    footer = blob[footer_offset:].decode("utf-8")
    lines = footer.splitlines()
    if not lines or lines[0] != _LOG_HEADER:
        raise FormatError(f"{path}: bad training-log footer")
    for line in lines[1:]:
        if not line:
            continue
        epoch, tl, vl, vf = line.split("\t")
        log.append(EpochStats(int(epoch), float(tl), float(vl), float(vf)))

    return TrainedModel(config=cfg, params=ModelParams(arrays), training_log=log)
