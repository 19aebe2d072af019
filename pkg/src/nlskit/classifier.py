"""Embedding classification head with exact gradients.

Architecture: learnable softmax-weighted average over encoder layers,
three position-wise (kernel 1) conv layers of 256 channels with ReLU and
inverted dropout, mean pooling over time, then a 256 -> 256 -> 2 fully
connected classifier. Forward, backward, and Adam are implemented
directly in numpy; batches are processed as one stacked frame matrix,
which is numerically identical to gradient accumulation over items.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .embedding_io import EmbeddingTensor
from .errors import DataError, NlskitError, TrainingError

PARAM_NAMES = (
    "layer_logits",
    "conv1_w",
    "conv1_b",
    "conv2_w",
    "conv2_b",
    "conv3_w",
    "conv3_b",
    "fc1_w",
    "fc1_b",
    "fc2_w",
    "fc2_b",
)


@dataclass(frozen=True)
class ModelConfig:
    input_layers: int
    input_dim: int
    conv_channels: int = 256
    conv_layers: int = 3
    conv_kernel: int = 1
    fc_hidden: int = 256
    n_classes: int = 2
    dropout_p: float = 0.2


@dataclass
class ModelParams:
    """All learnable parameters, keyed by block name (see PARAM_NAMES)."""

    arrays: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.arrays.items()})

    def zeros_like(self) -> "ModelParams":
        return ModelParams({k: np.zeros_like(v) for k, v in self.arrays.items()})

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-5
    weight_decay: float = 1e-4
    batch_size: int = 64
    max_epochs: int = 40
    patience: int = 5
    val_fraction: float = 0.2
    seed: int = 0


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_f1: float


@dataclass
class TrainedModel:
    config: ModelConfig
    params: ModelParams
    training_log: list[EpochStats]


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    c, h = config.conv_channels, config.fc_hidden
    return {
        "layer_logits": (config.input_layers,),
        "conv1_w": (config.input_dim, c),
        "conv1_b": (c,),
        "conv2_w": (c, c),
        "conv2_b": (c,),
        "conv3_w": (c, c),
        "conv3_b": (c,),
        "fc1_w": (c, h),
        "fc1_b": (h,),
        "fc2_w": (h, config.n_classes),
        "fc2_b": (config.n_classes,),
    }


def init_params(config: ModelConfig, seed: int, dtype=np.float64) -> ModelParams:
    """Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights, zero biases,
    zero layer logits (uniform layer weighting at start)."""
    rng = np.random.default_rng(_mix(seed))
    arrays = {}
    for name, shape in param_shapes(config).items():
        if name == "layer_logits" or name.endswith("_b"):
            arrays[name] = np.zeros(shape, dtype=dtype)
        else:
            bound = np.sqrt(1.0 / shape[0])
            arrays[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return ModelParams(arrays)


def _mix(*parts: int) -> int:
    """Deterministically mix integers into one non-negative RNG seed."""
    entropy = [p & 0xFFFFFFFFFFFFFFFF for p in parts]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def _as_array(x, config: ModelConfig, dtype) -> np.ndarray:
    data = x.data if isinstance(x, EmbeddingTensor) else np.asarray(x)
    if data.ndim != 3:
        raise DataError(f"embedding must be [L, T, D], got shape {data.shape}")
    if data.shape[0] != config.input_layers or data.shape[2] != config.input_dim:
        raise DataError(
            f"embedding shape {data.shape} does not match model "
            f"(L={config.input_layers}, D={config.input_dim})"
        )
    return np.ascontiguousarray(data, dtype=dtype)


def _dropout_masks(
    config: ModelConfig, dropout_seed: int, item_index: int, frames: int, dtype
) -> Optional[list[np.ndarray]]:
    """Per-item inverted-dropout masks for the conv stack, or None when
    dropout is off. Drawn from a seeded stream so forward/backward pair up."""
    p = config.dropout_p
    if p <= 0.0:
        return None
    rng = np.random.default_rng(_mix(dropout_seed, item_index))
    keep = 1.0 - p
    return [
        (rng.random((frames, config.conv_channels)) >= p).astype(dtype) / keep
        for _ in range(config.conv_layers)
    ]


class _BatchCache:
    """Intermediate activations of one stacked-batch forward pass."""

    __slots__ = (
        "stack", "weights", "h", "pre", "out", "masks",
        "starts", "counts", "pooled", "z1_pre", "z1", "logits",
    )


def _forward_batch(
    params: ModelParams,
    config: ModelConfig,
    xs: Sequence[np.ndarray],
    train_mode: bool,
    dropout_seed: int,
    dtype=np.float64,
) -> _BatchCache:
    a = params.arrays
    counts = np.array([x.shape[1] for x in xs])
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    stack = np.concatenate(xs, axis=1)  # (L, sum T, D)

    cache = _BatchCache()
    cache.stack = stack
    cache.starts = starts
    cache.counts = counts
    cache.weights = softmax(a["layer_logits"])
    cache.h = np.tensordot(cache.weights, stack, axes=(0, 0))  # (sum T, D)

    if train_mode and config.dropout_p > 0.0:
        per_item = [
            _dropout_masks(config, dropout_seed, i, int(t), dtype)
            for i, t in enumerate(counts)
        ]
        cache.masks = [
            np.concatenate([m[k] for m in per_item], axis=0)
            for k in range(config.conv_layers)
        ]
    else:
        cache.masks = None

    cache.pre = []
    cache.out = []
    cur = cache.h
    for k in range(1, config.conv_layers + 1):
        pre = cur @ a[f"conv{k}_w"] + a[f"conv{k}_b"]
        act = np.maximum(pre, 0.0)
        if cache.masks is not None:
            act = act * cache.masks[k - 1]
        cache.pre.append(pre)
        cache.out.append(act)
        cur = act

    cache.pooled = np.add.reduceat(cur, starts, axis=0) / counts[:, None]
    cache.z1_pre = cache.pooled @ a["fc1_w"] + a["fc1_b"]
    cache.z1 = np.maximum(cache.z1_pre, 0.0)
    cache.logits = cache.z1 @ a["fc2_w"] + a["fc2_b"]
    return cache


def forward(
    params: ModelParams,
    config: ModelConfig,
    x,
    train_mode: bool = False,
    dropout_seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Run one utterance through the head; returns (logits, pooled)."""
    arr = _as_array(x, config, np.float64)
    cache = _forward_batch(params, config, [arr], train_mode, dropout_seed)
    return cache.logits[0], cache.pooled[0]


def loss_weighted_ce(
    logits: np.ndarray, labels: np.ndarray, class_weights: np.ndarray
) -> float:
    """Mean over the batch of w_y * (-log softmax(logits)[y])."""
    class_weights = np.asarray(class_weights, dtype=np.float64)
    if np.any(class_weights <= 0):
        raise NlskitError("class weights must be positive")
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels))
    z = logits - logits.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    nll = -log_p[np.arange(len(labels)), labels]
    return float(np.mean(class_weights[labels] * nll))


def class_weights_from_labels(labels: Sequence[int], n_classes: int = 2) -> np.ndarray:
    """w_c = N_total / (n_classes * N_c), inverse class frequency."""
    labels = np.asarray(labels)
    counts = np.bincount(labels, minlength=n_classes)
    if np.any(counts == 0):
        raise TrainingError(
            f"class counts {counts.tolist()}: every class must appear in the "
            "training split"
        )
    return len(labels) / (n_classes * counts.astype(np.float64))


def backward(
    params: ModelParams,
    config: ModelConfig,
    batch: Sequence[tuple[object, int]],
    class_weights: np.ndarray,
    dropout_seed: int = 0,
    train_mode: bool = True,
) -> tuple[float, ModelParams]:
    """Exact gradient of the weighted-CE batch loss w.r.t. all parameters.

    Returns (loss, gradients); gradients share the parameter layout.
    """
    a = params.arrays
    xs = [_as_array(x, config, np.float64) for x, _ in batch]
    labels = np.array([y for _, y in batch])
    class_weights = np.asarray(class_weights, dtype=np.float64)
    cache = _forward_batch(params, config, xs, train_mode, dropout_seed)

    b = len(batch)
    p = softmax(cache.logits, axis=1)
    loss = loss_weighted_ce(cache.logits, labels, class_weights)

    grads = params.zeros_like()
    g = grads.arrays
    dlogits = p.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits *= class_weights[labels][:, None] / b

    g["fc2_w"][...] = cache.z1.T @ dlogits
    g["fc2_b"][...] = dlogits.sum(axis=0)
    dz1 = (dlogits @ a["fc2_w"].T) * (cache.z1_pre > 0)
    g["fc1_w"][...] = cache.pooled.T @ dz1
    g["fc1_b"][...] = dz1.sum(axis=0)
    dpooled = dz1 @ a["fc1_w"].T

    dframe = np.repeat(dpooled / cache.counts[:, None], cache.counts, axis=0)
    for k in range(config.conv_layers, 0, -1):
        if cache.masks is not None:
            dframe = dframe * cache.masks[k - 1]
        dpre = dframe * (cache.pre[k - 1] > 0)
        prev = cache.out[k - 2] if k > 1 else cache.h
        g[f"conv{k}_w"][...] = prev.T @ dpre
        g[f"conv{k}_b"][...] = dpre.sum(axis=0)
        dframe = dpre @ a[f"conv{k}_w"].T

    # softmax-weighted layer sum: chain through the softmax Jacobian
    per_layer = np.einsum("ltd,td->l", cache.stack, dframe)
    w = cache.weights
    g["layer_logits"][...] = w * (per_layer - np.dot(w, per_layer))

    return loss, grads


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

_ADAM_B1, _ADAM_B2, _ADAM_EPS = 0.9, 0.999, 1e-8


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(
            m={k: np.zeros_like(v) for k, v in params.arrays.items()},
            v={k: np.zeros_like(v) for k, v in params.arrays.items()},
        )


def adam_step(
    params: ModelParams,
    grads: ModelParams,
    state: AdamState,
    t: int,
    train_config: TrainConfig,
) -> tuple[ModelParams, AdamState]:
    """One Adam update (in place); weight decay enters as an L2 gradient
    term before the moment updates."""
    if t < 1:
        raise NlskitError("Adam step index starts at 1")
    lr, wd = train_config.lr, train_config.weight_decay
    bc1 = 1.0 - _ADAM_B1**t
    bc2 = 1.0 - _ADAM_B2**t
    for name, theta in params.arrays.items():
        grad = grads.arrays[name]
        if not np.all(np.isfinite(grad)):
            raise NlskitError(f"non-finite gradient in block {name!r}")
        if wd != 0.0:
            grad = grad + wd * theta
        m = state.m[name]
        v = state.v[name]
        m *= _ADAM_B1
        m += (1.0 - _ADAM_B1) * grad
        v *= _ADAM_B2
        v += (1.0 - _ADAM_B2) * grad * grad
        theta -= lr * (m / bc1) / (np.sqrt(v / bc2) + _ADAM_EPS)
    return params, state


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

EmbeddingReader = Callable[[object], np.ndarray]


def file_embedding_reader(utterance) -> np.ndarray:
    """Default reader: loads the NLSEMB file named by the utterance."""
    from .embedding_io import read_embedding

    if utterance.embedding_path is None:
        raise DataError(f"utterance {utterance.utterance_id} has no embedding path")
    return read_embedding(utterance.embedding_path).data


def _evaluate(params, config, xs, labels, class_weights):
    cache = _forward_batch(params, config, xs, train_mode=False, dropout_seed=0)
    loss = loss_weighted_ce(cache.logits, labels, class_weights)
    preds = np.where(cache.logits[:, 1] > cache.logits[:, 0], 1, 0)
    from .evaluation import f1_macro

    return loss, f1_macro(list(labels), list(preds))


def train(
    dataset,
    embeddings: EmbeddingReader = file_embedding_reader,
    train_config: TrainConfig = TrainConfig(),
    model_config: Optional[ModelConfig] = None,
) -> TrainedModel:
    """Train the head on a task dataset with a seeded 8:2 utterance-level
    train/validation split, early stopping on validation loss, and
    best-epoch parameter restore. Deterministic given the seed."""
    items = list(dataset.items)
    if not items:
        raise TrainingError("empty dataset")
    xs_all = [np.asarray(embeddings(u), dtype=np.float64) for u, _ in items]
    labels_all = np.array([y for _, y in items])

    if model_config is None:
        model_config = ModelConfig(
            input_layers=xs_all[0].shape[0], input_dim=xs_all[0].shape[2]
        )
    for x in xs_all:
        if x.shape[0] != model_config.input_layers or x.shape[2] != model_config.input_dim:
            raise DataError(f"inconsistent embedding shape {x.shape}")

    rng = np.random.default_rng(_mix(train_config.seed))
    order = rng.permutation(len(items))
    n_val = max(1, int(round(train_config.val_fraction * len(items))))
    if n_val >= len(items):
        raise TrainingError("dataset too small for a validation split")
    val_idx, train_idx = order[:n_val], order[n_val:]
    class_weights = class_weights_from_labels(labels_all[train_idx])

    params = init_params(model_config, train_config.seed)
    state = AdamState.for_params(params)
    xs_val = [xs_all[i] for i in val_idx]
    y_val = labels_all[val_idx]

    log: list[EpochStats] = []
    best_loss = np.inf
    best_params = params.copy()
    stale = 0
    t = 0
    for epoch in range(1, train_config.max_epochs + 1):
        epoch_order = rng.permutation(train_idx)
        train_loss = 0.0
        for b0 in range(0, len(epoch_order), train_config.batch_size):
            batch_idx = epoch_order[b0 : b0 + train_config.batch_size]
            batch = [(xs_all[i], int(labels_all[i])) for i in batch_idx]
            seed = _mix(train_config.seed, epoch, b0)
            loss, grads = backward(
                params, model_config, batch, class_weights, dropout_seed=seed
            )
            t += 1
            adam_step(params, grads, state, t, train_config)
            train_loss += loss * len(batch)
        train_loss /= len(epoch_order)

        val_loss, val_f1 = _evaluate(params, model_config, xs_val, y_val, class_weights)
        log.append(EpochStats(epoch, train_loss, val_loss, val_f1))

        if val_loss < best_loss:
            best_loss = val_loss
            best_params = params.copy()
            stale = 0
        else:
            stale += 1
            if stale >= train_config.patience:
                break

    return TrainedModel(config=model_config, params=best_params, training_log=log)


def predict(model: TrainedModel, x) -> tuple[int, np.ndarray, np.ndarray]:
    """Eval-mode prediction: (label, class probabilities, pooled vector).

    Ties break toward label 0.
    """
    logits, pooled = forward(model.params, model.config, x, train_mode=False)
    probs = softmax(logits)
    label = 1 if logits[1] > logits[0] else 0
    return label, probs, pooled
