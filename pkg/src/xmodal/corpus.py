"""Embedding file format (XEB1), relevance manifests, and corpus assembly.

An EmbeddingSet is one modality's N x dim matrix of float32 rows, keyed by
stable string ids. A PairedCorpus ties a text set and an image set together
with ground-truth relevance in both directions.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"XEB1"
VERSION = 1
_MODALITY_CODE = {"text": 0, "image": 1}
_MODALITY_NAME = {v: k for k, v in _MODALITY_CODE.items()}
_DTYPE_F32 = 0

_HEADER = struct.Struct("<4sHBBQI")  # magic, version, modality, dtype, count, dim


class CorpusError(Exception):
    """Base error; `code` is a stable machine-readable identifier."""

    code = "corpus-error"


class BadMagicError(CorpusError):
    code = "bad-magic"


class UnsupportedVersionError(CorpusError):
    code = "unsupported-version"


class TruncatedFileError(CorpusError):
    code = "truncated"


class DuplicateIdError(CorpusError):
    code = "duplicate-id"


class NonFiniteError(CorpusError):
    code = "non-finite"


class UnresolvedIdError(CorpusError):
    code = "unresolved-id"


class ManifestError(CorpusError):
    code = "bad-manifest"


class SplitError(CorpusError):
    code = "bad-split"


@dataclass(frozen=True)
class EmbeddingSet:
    """One modality's embeddings: immutable after construction."""

    modality: str
    dim: int
    ids: tuple
    data: np.ndarray  # (count, dim) float32, row-major

    def __post_init__(self):
        if self.modality not in _MODALITY_CODE:
            raise CorpusError(f"unknown modality {self.modality!r}")
        if self.dim <= 0:
            raise CorpusError("dim must be positive")
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 2 or data.shape[1] != self.dim:
            raise CorpusError(
                f"data shape {data.shape} does not match dim {self.dim}"
            )
        if data.shape[0] != len(self.ids):
            raise CorpusError("row count does not match number of ids")
        if len(set(self.ids)) != len(self.ids):
            raise DuplicateIdError("duplicate ids in embedding set")
        if data.size and not np.all(np.isfinite(data)):
            raise NonFiniteError("non-finite value in embedding data")
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "data", data)
        data.setflags(write=False)

    @property
    def count(self) -> int:
        return self.data.shape[0]

    def index_of(self, sample_id: str) -> int:
        return self.ids.index(sample_id)

    def subset(self, ids) -> "EmbeddingSet":
        pos = {s: i for i, s in enumerate(self.ids)}
        try:
            rows = [pos[s] for s in ids]
        except KeyError as exc:
            raise UnresolvedIdError(f"unknown id {exc.args[0]!r}") from None
        return EmbeddingSet(self.modality, self.dim, tuple(ids), self.data[rows])

    def __eq__(self, other):
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return (
            self.modality == other.modality
            and self.dim == other.dim
            and self.ids == other.ids
            and self.data.shape == other.data.shape
            and np.array_equal(
                self.data.view(np.uint32), other.data.view(np.uint32)
            )
        )


def save_embeddings(emb: EmbeddingSet, path) -> None:
    """Write `emb` in the XEB1 binary format (little-endian)."""
    header = _HEADER.pack(
        MAGIC, VERSION, _MODALITY_CODE[emb.modality], _DTYPE_F32, emb.count, emb.dim
    )
    parts = [header]
    for sample_id in emb.ids:
        raw = sample_id.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise CorpusError(f"id too long: {sample_id[:32]!r}...")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    parts.append(emb.data.tobytes(order="C"))
    blob = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(blob)


def load_embeddings(path) -> EmbeddingSet:
    """Read an XEB1 file, validating magic, version, and payload size."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise BadMagicError(f"bad magic {blob[:4]!r} in {path}")
    if len(blob) < _HEADER.size:
        raise TruncatedFileError(f"file shorter than header: {path}")
    _, version, modality, dtype, count, dim = _HEADER.unpack_from(blob, 0)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    if modality not in _MODALITY_NAME:
        raise CorpusError(f"unknown modality code {modality}")
    if dtype != _DTYPE_F32:
        raise CorpusError(f"unsupported dtype code {dtype}")
    off = _HEADER.size
    ids = []
    for _ in range(count):
        if off + 2 > len(blob):
            raise TruncatedFileError("id table truncated")
        (n,) = struct.unpack_from("<H", blob, off)
        off += 2
        if off + n > len(blob):
            raise TruncatedFileError("id table truncated")
        ids.append(blob[off : off + n].decode("utf-8"))
        off += n
    payload = count * dim * 4
    if len(blob) - off < payload:
        raise TruncatedFileError(
            f"payload truncated: expected {payload} bytes, got {len(blob) - off}"
        )
    data = np.frombuffer(blob[off : off + payload], dtype="<f4").reshape(count, dim)
    return EmbeddingSet(_MODALITY_NAME[modality], dim, tuple(ids), data.copy())


@dataclass
class RelevanceMap:
    """query id -> ordered list of relevant candidate ids."""

    entries: dict = field(default_factory=dict)

    def relevant(self, query_id: str):
        try:
            return self.entries[query_id]
        except KeyError:
            raise UnresolvedIdError(f"no relevance entry for {query_id!r}") from None


@dataclass
class PairedCorpus:
    side_a: EmbeddingSet  # text
    side_b: EmbeddingSet  # image
    relevance_a_to_b: RelevanceMap
    relevance_b_to_a: RelevanceMap
    captions_per_item: int = 1


def parse_manifest(path):
    """Yield (query_id, candidate_id) pairs plus the declared captions_per_item.

    Lines are `query_id<TAB>candidate_id`; `#` starts a comment. A comment of
    the form `# captions_per_item: N` declares a one-to-many corpus.
    """
    pairs = []
    captions_per_item = 1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.lstrip().startswith("#"):
                body = line.lstrip()[1:].strip()
                if body.startswith("captions_per_item:"):
                    captions_per_item = int(body.split(":", 1)[1])
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ManifestError(f"line {lineno}: expected 2 tab-separated fields")
            pairs.append((fields[0], fields[1]))
    return pairs, captions_per_item


def build_corpus(a: EmbeddingSet, b: EmbeddingSet, manifest_path,
                 captions_per_item=None) -> PairedCorpus:
    """Assemble a PairedCorpus from two sets and a pairing manifest.

    The manifest maps side-a (text) queries to side-b (image) candidates;
    the reverse relevance map is the inverse relation.
    """
    pairs, declared = parse_manifest(manifest_path)
    if captions_per_item is None:
        captions_per_item = declared
    if captions_per_item < 1:
        raise ManifestError("captions_per_item must be >= 1")
    a_ids = set(a.ids)
    b_ids = set(b.ids)
    a_to_b = {}
    b_to_a = {}
    for query, cand in pairs:
        if query not in a_ids:
            raise UnresolvedIdError(f"manifest query {query!r} not in text set")
        if cand not in b_ids:
            raise UnresolvedIdError(f"manifest candidate {cand!r} not in image set")
        if query in a_to_b:
            raise ManifestError(f"duplicate manifest line for query {query!r}")
        a_to_b[query] = [cand]
        b_to_a.setdefault(cand, []).append(query)
    for cand, queries in b_to_a.items():
        if len(queries) > captions_per_item:
            raise ManifestError(
                f"{cand!r} has {len(queries)} relevant texts, "
                f"limit is {captions_per_item}"
            )
    return PairedCorpus(a, b, RelevanceMap(a_to_b), RelevanceMap(b_to_a),
                        captions_per_item)


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios):
            raise SplitError("ratios must be three non-negative fractions")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise SplitError("ratios must sum to 1")


def split_corpus(corpus: PairedCorpus, spec: SplitSpec):
    """Deterministic (train, val, test) partition of paired items.

    The unit of splitting is a side-b item together with all its relevant
    side-a queries, so one-to-many corpora never straddle a split boundary.
    Sizes are floor(ratio * N); remainder goes to the training split.
    """
    units = [bid for bid in corpus.side_b.ids if bid in corpus.relevance_b_to_a.entries]
    n = len(units)
    if n < 3:
        raise SplitError("need at least 3 paired items to split")
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(n)
    n_train = int(spec.ratios[0] * n)
    n_val = int(spec.ratios[1] * n)
    n_test = int(spec.ratios[2] * n)
    n_train += n - (n_train + n_val + n_test)
    bounds = (n_train, n_train + n_val, n)
    parts = []
    start = 0
    for stop in bounds:
        b_ids = [units[i] for i in order[start:stop]]
        start = stop
        a_ids = [q for bid in b_ids for q in corpus.relevance_b_to_a.entries[bid]]
        parts.append(
            PairedCorpus(
                corpus.side_a.subset(a_ids),
                corpus.side_b.subset(b_ids),
                RelevanceMap({q: list(corpus.relevance_a_to_b.entries[q]) for q in a_ids}),
                RelevanceMap({bid: list(corpus.relevance_b_to_a.entries[bid]) for bid in b_ids}),
                corpus.captions_per_item,
            )
        )
    return tuple(parts)
