"""End-to-end pipeline: raw images + captions -> XEB1 files -> retrieval.

Uses the offline hash-debug encoder from the extractor package so the demo
runs without downloaded model weights, then validates the outputs through
the engine's CLI (ingest-check plus a cosine retrieve).
"""
import json
import tempfile
from pathlib import Path

from PIL import Image

from xmodal_extractor import ExtractorJob, extract, verify_roundtrip

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp) / "dataset"
    root.mkdir()
    lines = []
    for i, color in enumerate([(200, 30, 30), (30, 200, 30), (30, 30, 200),
                               (220, 220, 40)]):
        Image.new("RGB", (96, 96), color).save(root / f"photo{i}.png")
        lines.append(f"photo{i}.png\ta solid block of color number {i}")
    (root / "captions.tsv").write_text("\n".join(lines) + "\n")

    job = ExtractorJob("hash-debug", str(root), "first_caption",
                       str(Path(tmp) / "run"))
    text_path, image_path, manifest_path = extract(job)
    print(f"wrote {Path(text_path).name}, {Path(image_path).name}, "
          f"{Path(manifest_path).name}")

    report = verify_roundtrip(text_path, image_path, manifest_path)
    print(json.dumps(report, indent=2))
