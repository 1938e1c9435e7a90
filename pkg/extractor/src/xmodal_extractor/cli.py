"""Command-line entry for the extraction adapter."""
from __future__ import annotations

import argparse
import json
import sys

from .encoders import EncoderError, available_models
from .extract import ExtractorError, ExtractorJob, extract, verify_roundtrip


def build_parser():
    parser = argparse.ArgumentParser(
        prog="xmodal-extract",
        description="Encode an image-caption dataset into XEB1 files",
    )
    parser.add_argument("--model", required=True,
                        help=f"one of: {', '.join(available_models())}")
    parser.add_argument("--dataset", required=True,
                        help="directory with images and captions.tsv")
    parser.add_argument("--captions", choices=("first", "all"), default="first")
    parser.add_argument("--out", required=True, help="output path prefix")
    parser.add_argument("--verify", action="store_true",
                        help="run the engine's ingest-check and a cosine retrieve")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    policy = "first_caption" if args.captions == "first" else "all_captions"
    job = ExtractorJob(args.model, args.dataset, policy, args.out)
    try:
        text_path, image_path, manifest_path = extract(job)
    except (ExtractorError, EncoderError, OSError) as exc:
        code = getattr(exc, "code", "io-error")
        print(f"error[{code}]: {exc}", file=sys.stderr)
        return 1
    result = {"text": text_path, "image": image_path, "manifest": manifest_path}
    if args.verify:
        result["verify"] = verify_roundtrip(text_path, image_path, manifest_path)
    print(json.dumps(result, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
