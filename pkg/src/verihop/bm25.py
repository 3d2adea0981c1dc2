"""Sentence-level BM25: tokenizer, inverted index, search, binary persistence.

Scoring rule (per query token, summed with multiplicity):

    score(t, s) = idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(s) / avgdl))
    idf(t)      = ln(1 + (N + 0.5) / (df(t) + 0.5))

so idf stays positive even for terms present in every sentence. Results are
sorted by descending score, ties broken by ascending address string; zero
scores never appear (only matching sentences are accumulated).
"""

from __future__ import annotations

import io
import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus, SentenceAddress, address_key
from .errors import FormatError, IngestError

# Unicode alphanumeric runs; underscore is a separator, not a word character.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_MAGIC = b"M3BM"
_VERSION = 1


def tokenize(text: str) -> list[str]:
    """Lowercase and split on maximal runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self):
        if not self.k1 > 0:
            raise ValueError(f"k1 must be positive, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass
class Bm25Index:
    params: Bm25Params
    addresses: list[SentenceAddress]            # ordinal -> address
    doc_lengths: list[int]                      # token count per ordinal
    avgdl: float
    postings: dict[str, list[tuple[int, int]]]  # token -> [(ordinal, tf)], ordinal-sorted
    _ordinal_of: dict[SentenceAddress, int] = field(default_factory=dict, repr=False)

    @property
    def num_sentences(self) -> int:
        return len(self.addresses)

    def idf(self, token: str) -> float:
        postings = self.postings.get(token)
        if not postings:
            return 0.0
        df = len(postings)
        return math.log(1.0 + (self.num_sentences + 0.5) / (df + 0.5))


def build_bm25(corpus: Corpus, params: Bm25Params | None = None) -> Bm25Index:
    """Index every non-blank sentence of the corpus, in corpus order."""
    params = params or Bm25Params()
    addresses: list[SentenceAddress] = []
    doc_lengths: list[int] = []
    postings: dict[str, list[tuple[int, int]]] = {}
    for addr, text in corpus.iter_sentences(skip_blank=True):
        ordinal = len(addresses)
        addresses.append(addr)
        tokens = tokenize(text)
        doc_lengths.append(len(tokens))
        counts: dict[str, int] = {}
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
        for tok, tf in counts.items():
            postings.setdefault(tok, []).append((ordinal, tf))
    if not addresses:
        raise IngestError("no indexable (non-blank) sentences in corpus")
    avgdl = sum(doc_lengths) / len(doc_lengths)
    index = Bm25Index(params, addresses, doc_lengths, avgdl, postings)
    index._ordinal_of = {a: i for i, a in enumerate(addresses)}
    return index


def bm25_search(index: Bm25Index, query: str, k: int) -> list[tuple[SentenceAddress, float]]:
    """Top-k sentences for a query; empty query or no matching term gives []."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    k1, b = index.params.k1, index.params.b
    n = index.num_sentences
    scores: dict[int, float] = {}
    for tok in tokenize(query):
        postings = index.postings.get(tok)
        if not postings:
            continue
        idf = math.log(1.0 + (n + 0.5) / (len(postings) + 0.5))
        for ordinal, tf in postings:
            norm = tf + k1 * (1.0 - b + b * index.doc_lengths[ordinal] / index.avgdl)
            scores[ordinal] = scores.get(ordinal, 0.0) + idf * tf * (k1 + 1.0) / norm
    ranked = sorted(
        ((index.addresses[o], s) for o, s in scores.items()),
        key=lambda pair: (-pair[1], address_key(pair[0])),
    )
    return ranked[:k]


# --- binary persistence -----------------------------------------------------
#
# Layout (all integers little-endian, fixed width):
#   magic "M3BM" | version u32 | k1 f64 | b f64 | avgdl f64 | N u64
#   N x (u32 byte-length + UTF-8 address string)
#   N x u32 sentence token length
#   vocab count u64, then per token (in index insertion order):
#     u32 byte-length + UTF-8 token | u64 postings length | pairs of (u32, u32)


def _write_str(out: io.BufferedIOBase, text: str) -> None:
    data = text.encode("utf-8")
    out.write(struct.pack("<I", len(data)))
    out.write(data)


def _read_exact(inp: io.BufferedIOBase, size: int) -> bytes:
    data = inp.read(size)
    if len(data) != size:
        raise FormatError("truncated BM25 index file")
    return data


def _read_str(inp: io.BufferedIOBase) -> str:
    (length,) = struct.unpack("<I", _read_exact(inp, 4))
    return _read_exact(inp, length).decode("utf-8")


def save_bm25(index: Bm25Index, path: str | Path) -> None:
    with Path(path).open("wb") as out:
        out.write(_MAGIC)
        out.write(struct.pack("<I", _VERSION))
        out.write(struct.pack("<ddd", index.params.k1, index.params.b, index.avgdl))
        out.write(struct.pack("<Q", index.num_sentences))
        for addr in index.addresses:
            _write_str(out, str(addr))
        out.write(struct.pack(f"<{index.num_sentences}I", *index.doc_lengths))
        out.write(struct.pack("<Q", len(index.postings)))
        for token, postings in index.postings.items():
            _write_str(out, token)
            out.write(struct.pack("<Q", len(postings)))
            flat = [v for pair in postings for v in pair]
            out.write(struct.pack(f"<{len(flat)}I", *flat))


def load_bm25(path: str | Path) -> Bm25Index:
    with Path(path).open("rb") as inp:
        if _read_exact(inp, 4) != _MAGIC:
            raise FormatError(f"{path}: not a BM25 index file (bad magic)")
        (version,) = struct.unpack("<I", _read_exact(inp, 4))
        if version != _VERSION:
            raise FormatError(f"{path}: unsupported BM25 index version {version}")
        k1, b, avgdl = struct.unpack("<ddd", _read_exact(inp, 24))
        (n,) = struct.unpack("<Q", _read_exact(inp, 8))
        addresses = [SentenceAddress.parse(_read_str(inp)) for _ in range(n)]
        doc_lengths = list(struct.unpack(f"<{n}I", _read_exact(inp, 4 * n)))
        (vocab,) = struct.unpack("<Q", _read_exact(inp, 8))
        postings: dict[str, list[tuple[int, int]]] = {}
        for _ in range(vocab):
            token = _read_str(inp)
            (plen,) = struct.unpack("<Q", _read_exact(inp, 8))
            flat = struct.unpack(f"<{2 * plen}I", _read_exact(inp, 8 * plen))
            postings[token] = [(flat[2 * i], flat[2 * i + 1]) for i in range(plen)]
        if inp.read(1):
            raise FormatError(f"{path}: trailing bytes after BM25 index")
    index = Bm25Index(Bm25Params(k1, b), addresses, doc_lengths, avgdl, postings)
    index._ordinal_of = {a: i for i, a in enumerate(addresses)}
    return index
