"""Command-line entry point: nlsextract --model ... --audio-dir ... ."""

from __future__ import annotations

import argparse
import sys

from .encoders import EncoderFamily, load_encoder
from .extract import extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlsextract",
        description="Export layer-wise encoder hidden states to NLSEMB files.",
    )
    parser.add_argument(
        "--model",
        required=True,
        choices=[f.value for f in EncoderFamily],
        help="encoder family",
    )
    parser.add_argument("--audio-dir", required=True,
                        help="directory with one <session_id>.wav per session")
    parser.add_argument("--manifest", required=True,
                        help="utterance manifest TSV")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel utterance workers (default 1)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    encoder = load_encoder(EncoderFamily(args.model))
    print(f"loaded {encoder.spec.checkpoint_id} ({encoder.source})")
    result = extract(args.audio_dir, args.manifest, encoder, args.out,
                     workers=args.workers)
    print(
        f"wrote {len(result.written)} embeddings "
        f"(L={result.layer_count}), skipped {len(result.skipped)}, "
        f"errors {len(result.errors)}"
    )
    return 1 if result.errors else 0


if __name__ == "__main__":
    sys.exit(main())
