"""Encoder families and checkpoint loading.

Each family wraps a frozen pretrained encoder and exposes one method:
hidden_states(waveform_16k) -> float32 array of shape (L, T, D) holding
every available hidden state, layer 0 being the pre-transformer features.

Loading first tries the locally cached published checkpoint; if the cache
is cold (no network in many deployments), it falls back to a randomly
initialized model built from the published architecture config. Output
shapes and frame rates are architecture properties, so the fallback is
shape-faithful; the provenance record says which path was taken.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import torch

SAMPLE_RATE = 16_000
WHISPER_FPS = 50


class EncoderFamily(enum.Enum):
    W2V2_BASE = "w2v2-base"
    WAVLM_BASE_PLUS = "wavlm-base-plus"
    WHISPER_BASE_EN = "whisper-base-en"


@dataclass(frozen=True)
class EncoderSpec:
    family: EncoderFamily
    checkpoint_id: str
    expected_dim: int
    expected_transformer_layers: int


SPECS = {
    EncoderFamily.W2V2_BASE: EncoderSpec(
        EncoderFamily.W2V2_BASE, "facebook/wav2vec2-base", 768, 12
    ),
    EncoderFamily.WAVLM_BASE_PLUS: EncoderSpec(
        EncoderFamily.WAVLM_BASE_PLUS, "microsoft/wavlm-base-plus", 768, 12
    ),
    EncoderFamily.WHISPER_BASE_EN: EncoderSpec(
        EncoderFamily.WHISPER_BASE_EN, "openai/whisper-base.en", 512, 6
    ),
}


@dataclass
class LoadedEncoder:
    spec: EncoderSpec
    model: torch.nn.Module
    source: str  # "pretrained" or "random-init"
    feature_extractor: object | None = None

    @property
    def dim(self) -> int:
        return self.spec.expected_dim

    def hidden_states(self, waveform: np.ndarray, duration_s: float) -> np.ndarray:
        """Run a mono 16 kHz waveform through the encoder.

        Returns (L, T, D) float32 with all hidden states. Whisper output is
        cropped to ceil(duration_s * 50) frames to strip the padding its
        fixed 30 s input window introduces.
        """
        with torch.no_grad():
            if self.spec.family is EncoderFamily.WHISPER_BASE_EN:
                feats = self.feature_extractor(
                    waveform, sampling_rate=SAMPLE_RATE, return_tensors="pt"
                ).input_features
                out = self.model.encoder(feats, output_hidden_states=True)
                keep = math.ceil(duration_s * WHISPER_FPS)
                states = [h[0, :keep] for h in out.hidden_states]
            else:
                x = torch.from_numpy(waveform).float().unsqueeze(0)
                std = float(x.std())
                if std > 0:
                    x = (x - x.mean()) / std
                out = self.model(x, output_hidden_states=True)
                states = [h[0] for h in out.hidden_states]
        return torch.stack(states).numpy().astype("<f4")


def _build_random(spec: EncoderSpec) -> torch.nn.Module:
    if spec.family is EncoderFamily.W2V2_BASE:
        from transformers import Wav2Vec2Config, Wav2Vec2Model

        return Wav2Vec2Model(Wav2Vec2Config())
    if spec.family is EncoderFamily.WAVLM_BASE_PLUS:
        from transformers import WavLMConfig, WavLMModel

        return WavLMModel(WavLMConfig())
    from transformers import WhisperConfig, WhisperModel

    config = WhisperConfig(
        d_model=512,
        encoder_layers=6,
        encoder_attention_heads=8,
        encoder_ffn_dim=2048,
        decoder_layers=6,
        decoder_attention_heads=8,
        decoder_ffn_dim=2048,
    )
    return WhisperModel(config)


def load_encoder(family: EncoderFamily) -> LoadedEncoder:
    spec = SPECS[family]
    model = None
    source = "pretrained"
    try:
        from transformers import AutoModel

        model = AutoModel.from_pretrained(spec.checkpoint_id, local_files_only=True)
    except Exception:
        torch.manual_seed(0)
        model = _build_random(spec)
        source = "random-init"
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)

    feature_extractor = None
    if family is EncoderFamily.WHISPER_BASE_EN:
        from transformers import WhisperFeatureExtractor

        try:
            feature_extractor = WhisperFeatureExtractor.from_pretrained(
                spec.checkpoint_id, local_files_only=True
            )
        except Exception:
            feature_extractor = WhisperFeatureExtractor()
    return LoadedEncoder(spec=spec, model=model, source=source,
                         feature_extractor=feature_extractor)
