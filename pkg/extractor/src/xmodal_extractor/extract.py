"""Run an encoder over an image-caption dataset and emit XEB1 files.

Dataset layout: a directory of image files plus `captions.tsv` with lines
`image_filename<TAB>caption text`; multiple lines per image are multiple
captions. Images are resized to 224x224 and normalized to [0, 1] before
encoding. Outputs are consumable by the primary engine: two XEB1 files and
a pairing manifest.
"""
from __future__ import annotations

import json
import os
import subprocess
import sys
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .encoders import EncoderError, get_encoder

IMAGE_SIZE = 224


class ExtractorError(Exception):
    code = "extractor-error"


@dataclass
class ExtractorJob:
    model: object  # encoder name or encoder instance
    dataset_root: str
    caption_policy: str = "first_caption"  # or "all_captions"
    out_prefix: str = "out"

    def __post_init__(self):
        if self.caption_policy not in ("first_caption", "all_captions"):
            raise ExtractorError(f"unknown caption policy {self.caption_policy!r}")


def load_image(path) -> np.ndarray:
    """224x224x3 float32 array with pixel values in [0, 1]."""
    with Image.open(path) as im:
        im = im.convert("RGB").resize((IMAGE_SIZE, IMAGE_SIZE), Image.BILINEAR)
        return np.asarray(im, dtype=np.float32) / 255.0


def read_captions(dataset_root):
    """Ordered {image_filename: [captions...]} from captions.tsv."""
    path = os.path.join(dataset_root, "captions.tsv")
    if not os.path.exists(path):
        raise ExtractorError(f"missing captions file {path}")
    captions = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t", 1)
            if len(fields) != 2:
                raise ExtractorError(f"captions.tsv line {lineno}: need 2 fields")
            captions.setdefault(fields[0], []).append(fields[1])
    if not captions:
        raise ExtractorError(f"no captions found in {path}")
    return captions


def extract(job: ExtractorJob):
    """Returns (text_xeb_path, image_xeb_path, manifest_path)."""
    encoder = job.model if not isinstance(job.model, str) else get_encoder(job.model)
    captions = read_captions(job.dataset_root)

    image_ids, images = [], []
    caption_ids, caption_texts, pairs = [], [], []
    for filename, caps in captions.items():
        path = os.path.join(job.dataset_root, filename)
        if not os.path.exists(path):
            raise ExtractorError(f"missing image file {path}")
        image_id = os.path.splitext(filename)[0]
        if image_id in image_ids:
            raise ExtractorError(f"id collision: {image_id!r}")
        image_ids.append(image_id)
        images.append(load_image(path))
        selected = caps[:1] if job.caption_policy == "first_caption" else caps
        for idx, caption in enumerate(selected):
            cid = f"{image_id}#{idx}"
            caption_ids.append(cid)
            caption_texts.append(caption)
            pairs.append((cid, image_id))

    text_features = np.asarray(encoder.encode_texts(caption_texts), dtype=np.float32)
    image_features = np.asarray(encoder.encode_images(images), dtype=np.float32)
    if text_features.shape[0] != len(caption_ids):
        raise ExtractorError("encoder returned wrong number of text rows")
    if image_features.shape[0] != len(image_ids):
        raise ExtractorError("encoder returned wrong number of image rows")

    # write through the primary engine's own corpus module
    from xmodal import corpus as cp

    text_path = job.out_prefix + ".text.xeb"
    image_path = job.out_prefix + ".image.xeb"
    manifest_path = job.out_prefix + ".pairs.tsv"
    captions_per_item = max(
        sum(1 for _, img in pairs if img == image_id) for image_id in image_ids
    )
    cp.save_embeddings(
        cp.EmbeddingSet("text", text_features.shape[1], tuple(caption_ids),
                        text_features),
        text_path,
    )
    cp.save_embeddings(
        cp.EmbeddingSet("image", image_features.shape[1], tuple(image_ids),
                        image_features),
        image_path,
    )
    with open(manifest_path, "w", encoding="utf-8") as fh:
        if captions_per_item > 1:
            fh.write(f"# captions_per_item: {captions_per_item}\n")
        for cid, image_id in pairs:
            fh.write(f"{cid}\t{image_id}\n")
    return text_path, image_path, manifest_path


def _run_engine(args):
    proc = subprocess.run(
        [sys.executable, "-m", "xmodal.cli", *args],
        capture_output=True, text=True,
    )
    return proc.returncode, proc.stdout, proc.stderr


def verify_roundtrip(text_path, image_path, manifest_path, subset=None, seed=0):
    """Validate outputs through the primary engine's CLI; returns a report.

    Runs `ingest-check` and a cosine `retrieve`, reporting hit@1.
    """
    for path in (text_path, image_path, manifest_path):
        if not os.path.exists(path):
            raise ExtractorError(f"missing file {path}")
    code, _, err = _run_engine(
        ["ingest-check", text_path, image_path, "--manifest", manifest_path,
         "--quiet"]
    )
    if code != 0:
        return {"ok": False, "stage": "ingest-check", "error": err.strip()}
    args = ["retrieve", "--text", text_path, "--image", image_path,
            "--manifest", manifest_path, "--metric", "cosine", "--k", "1",
            "--seed", str(seed)]
    if subset:
        args += ["--subset", str(subset)]
    code, out, err = _run_engine(args)
    if code != 0:
        return {"ok": False, "stage": "retrieve", "error": err.strip()}
    report = json.loads(out)
    return {"ok": True, "hit_at_1": report["hit_rate_at_k"]["1"],
            "query_count": report["query_count"]}
