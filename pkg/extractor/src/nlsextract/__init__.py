"""Export layer-wise hidden states from pretrained speech encoders.

Reads session WAV files plus an utterance manifest, runs each cropped
utterance through a frozen encoder (wav2vec 2.0 Base, WavLM Base+, or the
English-only Whisper Base encoder), and writes one NLSEMB tensor per
utterance for downstream classification with nlskit.
"""

__version__ = "0.1.0"

from .encoders import EncoderFamily, EncoderSpec, LoadedEncoder, load_encoder
from .extract import ExtractResult, extract

__all__ = [
    "EncoderFamily",
    "EncoderSpec",
    "LoadedEncoder",
    "load_encoder",
    "ExtractResult",
    "extract",
]
