"""Pairwise sentence reranking: relevance = 1 - P(NEI).

A pair scorer maps (query text, sentence text) to three logits over
{SUPPORTS, REFUTES, NEI}. The reference scorer is a linear model over hashed
features of the concatenated pair (a separator pseudo-token sits between the
two token streams); externally produced logits plug in through a JSONL
adapter file keyed by (claim id, sentence address).

Reranking rescores the top-depth candidates and re-sorts them on relevance
alone: retrieval scores are dropped, not fused (fusion happens later, in the
hybrid ranking stage). Sentence texts fed to scorers carry their document
title ("title . sentence", underscores as spaces) via Corpus.pair_text.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .bm25 import tokenize
from .corpus import (Claim, Corpus, LABELS, LABEL_TO_INDEX, NEI_INDEX,
                     SentenceAddress, address_key)
from .errors import DataError, FormatError
from .training import hash_token

logger = logging.getLogger(__name__)

# Cannot collide with real tokens: tokenize never emits brackets.
SEP_TOKEN = "[sep]"

_MAGIC = b"M3RR"
_VERSION = 1

# A pair scorer: (query text, sentence text) -> logits ndarray of shape (3,).
PairScorer = Callable[[str, str], np.ndarray]


@dataclass
class RerankConfig:
    depth: int = 200
    k: int = 5

    def __post_init__(self):
        if not self.depth >= self.k >= 1:
            raise ValueError(f"need depth >= k >= 1, got depth={self.depth}, k={self.k}")


def relevance_score(logits) -> float:
    """1 - softmax(logits)[NEI]."""
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    if z.shape[0] != 3:
        raise ValueError(f"expected 3 logits, got shape {z.shape}")
    z = z - z.max()
    p = np.exp(z)
    return float(1.0 - p[NEI_INDEX] / p.sum())


def rerank(query: str, candidates: list[tuple[SentenceAddress, float]],
           scorer: PairScorer, cfg: RerankConfig,
           texts: Callable[[SentenceAddress], str]
           ) -> list[tuple[SentenceAddress, float]]:
    """Rescore the top-depth candidates (incoming order) and sort by relevance.

    Returns the whole rescored subset, descending relevance, ties by
    ascending address string; deeper candidates are discarded.
    """
    scored = [
        (addr, relevance_score(scorer(query, texts(addr))))
        for addr, _ in candidates[:cfg.depth]
    ]
    scored.sort(key=lambda pair: (-pair[1], address_key(pair[0])))
    return scored


# --- reference linear pair scorer ------------------------------------------------


class LinearPairScorer:
    """Linear 3-way classifier over hashed features of the concatenated pair."""

    def __init__(self, weights: np.ndarray, bias: np.ndarray, seed: int):
        self.weights = np.asarray(weights, dtype=np.float64)  # (feature_dim, 3)
        self.bias = np.asarray(bias, dtype=np.float64)        # (3,)
        self.seed = seed
        if self.weights.ndim != 2 or self.weights.shape[1] != 3 or self.bias.shape != (3,):
            raise ValueError("pair scorer needs (feature_dim, 3) weights and (3,) bias")

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def zeros(cls, feature_dim: int = 4096, seed: int = 0) -> "LinearPairScorer":
        return cls(np.zeros((feature_dim, 3)), np.zeros(3), seed)

    def features(self, query: str, sentence: str) -> np.ndarray:
        vec = np.zeros(self.feature_dim, dtype=np.float64)
        for token in tokenize(query) + [SEP_TOKEN] + tokenize(sentence):
            vec[hash_token(token, self.seed, self.feature_dim)] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0.0:
            vec /= norm
        return vec

    def __call__(self, query: str, sentence: str) -> np.ndarray:
        return self.features(query, sentence) @ self.weights + self.bias


@dataclass
class PairRecord:
    query: str
    sentence: str
    label: int


def load_pair_records(path: str | Path) -> list[PairRecord]:
    records: list[PairRecord] = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for raw in handle:
            if not raw.strip():
                continue
            rec = json.loads(raw)
            label = rec["label"]
            if not isinstance(label, int):
                if label not in LABEL_TO_INDEX:
                    raise DataError(f"unknown pair label {label!r}")
                label = LABEL_TO_INDEX[label]
            records.append(PairRecord(rec["query"], rec["sentence"], label))
    return records


def train_pair_scorer(records: list[PairRecord], feature_dim: int = 4096,
                      seed: int = 0, learning_rate: float = 1.0,
                      epochs: int = 200) -> LinearPairScorer:
    """Full-batch softmax regression on hashed pair features."""
    if not records:
        raise DataError("no pair records to train on")
    scorer = LinearPairScorer.zeros(feature_dim, seed)
    x = np.stack([scorer.features(r.query, r.sentence) for r in records])
    gold = np.array([r.label for r in records])
    n = len(records)
    for _ in range(epochs):
        z = x @ scorer.weights + scorer.bias
        z -= z.max(axis=1, keepdims=True)
        probs = np.exp(z)
        probs /= probs.sum(axis=1, keepdims=True)
        dz = probs
        dz[np.arange(n), gold] -= 1.0
        dz /= n
        scorer.weights -= learning_rate * (x.T @ dz)
        scorer.bias -= learning_rate * dz.sum(axis=0)
    return scorer


def save_pair_scorer(scorer: LinearPairScorer, path: str | Path) -> None:
    with Path(path).open("wb") as out:
        out.write(_MAGIC)
        out.write(struct.pack("<IIQ", _VERSION, scorer.feature_dim, scorer.seed))
        out.write(np.ascontiguousarray(scorer.weights, dtype="<f8").tobytes())
        out.write(np.ascontiguousarray(scorer.bias, dtype="<f8").tobytes())


def load_pair_scorer(path: str | Path) -> LinearPairScorer:
    with Path(path).open("rb") as inp:
        if inp.read(4) != _MAGIC:
            raise FormatError(f"{path}: not a pair-scorer file (bad magic)")
        header = inp.read(16)
        if len(header) != 16:
            raise FormatError(f"{path}: truncated header")
        version, feature_dim, seed = struct.unpack("<IIQ", header)
        if version != _VERSION:
            raise FormatError(f"{path}: unsupported pair-scorer version {version}")
        w = inp.read(feature_dim * 3 * 8)
        b = inp.read(3 * 8)
        if len(w) != feature_dim * 24 or len(b) != 24 or inp.read(1):
            raise FormatError(f"{path}: truncated weight block")
    return LinearPairScorer(
        np.frombuffer(w, dtype="<f8").reshape(feature_dim, 3).copy(),
        np.frombuffer(b, dtype="<f8").copy(),
        seed,
    )


# --- external-logits adapter -------------------------------------------------------


def load_logits_file(path: str | Path) -> dict[tuple[int, str], np.ndarray]:
    """Read adapter records {claim_id, sentence, logits:[3]} into a lookup table."""
    table: dict[tuple[int, str], np.ndarray] = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for raw in handle:
            if not raw.strip():
                continue
            rec = json.loads(raw)
            logits = np.asarray(rec["logits"], dtype=np.float64)
            if logits.shape != (3,):
                raise DataError(f"logits must have 3 entries, got {rec['logits']!r}")
            table[(int(rec["claim_id"]), str(rec["sentence"]))] = logits
    return table


def rerank_from_logits(claim_id: int,
                       candidates: list[tuple[SentenceAddress, float]],
                       table: dict[tuple[int, str], np.ndarray],
                       cfg: RerankConfig) -> list[tuple[SentenceAddress, float]]:
    """rerank() against a logits table instead of a live scorer."""
    scored = []
    for addr, _ in candidates[:cfg.depth]:
        key = (claim_id, str(addr))
        if key not in table:
            raise DataError(f"no logits for claim {claim_id}, sentence {addr}")
        scored.append((addr, relevance_score(table[key])))
    scored.sort(key=lambda pair: (-pair[1], address_key(pair[0])))
    return scored


# --- reranker training data ----------------------------------------------------------


def build_reranker_training_data(claims: list[Claim], corpus: Corpus,
                                 retrievals: dict[int, list[SentenceAddress]],
                                 out_path: str | Path, *,
                                 num_negatives: int = 10,
                                 from_top: int = 100) -> int:
    """Write {query, sentence, label} records for reranker training.

    Per claim: every gold sentence labeled with the claim's label, then the
    first ``num_negatives`` non-gold addresses from the claim's top
    ``from_top`` retrievals labeled NEI (rank order, no randomness).
    """
    count = 0
    with Path(out_path).open("w", encoding="utf-8") as out:
        for claim in sorted(claims, key=lambda c: c.claim_id):
            gold = claim.gold_addresses()
            gold_set = set(gold)
            records: list[dict] = []
            for addr in gold:
                if not corpus.has_sentence(addr):
                    logger.warning("claim %d: gold %s not in corpus, skipped",
                                   claim.claim_id, addr)
                    continue
                records.append({"query": claim.text,
                                "sentence": corpus.pair_text(addr),
                                "label": claim.label})
            negatives = 0
            for addr in retrievals.get(claim.claim_id, [])[:from_top]:
                if negatives >= num_negatives:
                    break
                if addr in gold_set:
                    continue
                records.append({"query": claim.text,
                                "sentence": corpus.pair_text(addr),
                                "label": "NEI"})
                negatives += 1
            if negatives < num_negatives:
                logger.warning("claim %d: only %d of %d NEI pairs available",
                               claim.claim_id, negatives, num_negatives)
            for rec in records:
                out.write(json.dumps(rec, sort_keys=True))
                out.write("\n")
            count += len(records)
    return count
