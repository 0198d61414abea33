"""CLI: run an encoder over a manifest and emit a SEMB embedding file."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .encoders import EncoderError, available_models
from .jobs import ExportError, ExportJob, export_audio_embeddings, export_text_embeddings


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="export_embeddings.py",
        description="Export audio or text embeddings into a SEMB file.",
    )
    parser.add_argument("--mode", choices=["audio", "text"], required=True)
    parser.add_argument("--in", dest="input_manifest", type=Path, required=True,
                        help="pool manifest (audio) or concepts.jsonl (text)")
    parser.add_argument("--model", dest="model_tag", required=True,
                        help=f"audio: {', '.join(available_models('audio'))}; "
                             f"text: {', '.join(available_models('text'))}")
    parser.add_argument("--out", dest="output_path", type=Path, required=True)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    job = ExportJob(
        input_manifest=args.input_manifest,
        model_tag=args.model_tag,
        output_path=args.output_path,
        batch_size=args.batch_size,
    )
    export = export_audio_embeddings if args.mode == "audio" else export_text_embeddings
    try:
        written = export(job)
    except (ExportError, EncoderError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {written} embedding(s) to {args.output_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
