"""Encoder registry: pretrained vision/language models behind one interface.

An encoder exposes `encode_texts(list[str]) -> float32 array` and
`encode_images(list[np.ndarray]) -> float32 array`, where images arrive as
224x224x3 arrays with values in [0, 1]. Pretrained backends (CLIP-class,
BLIP-class, unimodal pairs) load lazily so the package works without torch.
"""
from __future__ import annotations

import numpy as np


class EncoderError(Exception):
    code = "encoder-error"


_REGISTRY = {}


def register(name, factory):
    _REGISTRY[name] = factory


def get_encoder(name):
    if name not in _REGISTRY:
        raise EncoderError(
            f"unknown model {name!r}; available: {sorted(_REGISTRY)}"
        )
    return _REGISTRY[name]()


def available_models():
    return sorted(_REGISTRY)


class ClipEncoder:
    """CLIP-class model; embeddings are the official projection outputs (512-d)."""

    def __init__(self, checkpoint="openai/clip-vit-base-patch32"):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise EncoderError(f"CLIP backend needs torch+transformers: {exc}")
        self._torch = torch
        self.model = CLIPModel.from_pretrained(checkpoint)
        self.model.eval()
        self.processor = CLIPProcessor.from_pretrained(checkpoint)

    def encode_texts(self, texts):
        inputs = self.processor(text=list(texts), return_tensors="pt",
                                padding=True, truncation=True)
        with self._torch.no_grad():
            out = self.model.get_text_features(**inputs)
        return out.numpy().astype(np.float32)

    def encode_images(self, images):
        from PIL import Image
        pil = [Image.fromarray((np.asarray(im) * 255).astype(np.uint8))
               for im in images]
        inputs = self.processor(images=pil, return_tensors="pt")
        with self._torch.no_grad():
            out = self.model.get_image_features(**inputs)
        return out.numpy().astype(np.float32)


class BlipEncoder:
    """BLIP-class retrieval model; uses its projection heads (256-d)."""

    def __init__(self, checkpoint="Salesforce/blip-itm-base-coco"):
        try:
            import torch
            from transformers import BlipForImageTextRetrieval, BlipProcessor
        except ImportError as exc:
            raise EncoderError(f"BLIP backend needs torch+transformers: {exc}")
        self._torch = torch
        self.model = BlipForImageTextRetrieval.from_pretrained(checkpoint)
        self.model.eval()
        self.processor = BlipProcessor.from_pretrained(checkpoint)

    def encode_texts(self, texts):
        inputs = self.processor(text=list(texts), return_tensors="pt",
                                padding=True, truncation=True)
        with self._torch.no_grad():
            hidden = self.model.text_encoder(**inputs).last_hidden_state[:, 0]
            out = self.model.text_proj(hidden)
        return out.numpy().astype(np.float32)

    def encode_images(self, images):
        from PIL import Image
        pil = [Image.fromarray((np.asarray(im) * 255).astype(np.uint8))
               for im in images]
        inputs = self.processor(images=pil, return_tensors="pt")
        with self._torch.no_grad():
            hidden = self.model.vision_model(**inputs).last_hidden_state[:, 0]
            out = self.model.vision_proj(hidden)
        return out.numpy().astype(np.float32)


class HashEncoder:
    """Deterministic offline encoder: content digest seeds a unit vector.

    Not a learned model; exists so the pipeline runs end to end (and is
    testable) without downloaded weights. Identical content always maps to
    the identical embedding.
    """

    def __init__(self, dim=32):
        self.dim = dim

    def _embed(self, payload: bytes):
        import hashlib
        seed = int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
        v = np.random.default_rng(seed).standard_normal(self.dim)
        return (v / np.linalg.norm(v)).astype(np.float32)

    def encode_texts(self, texts):
        return np.stack([self._embed(t.encode("utf-8")) for t in texts])

    def encode_images(self, images):
        return np.stack([
            self._embed(np.ascontiguousarray(im, dtype=np.float32).tobytes())
            for im in images
        ])


register("clip-vit-b32", ClipEncoder)
register("blip-base-coco", BlipEncoder)
register("hash-debug", HashEncoder)
