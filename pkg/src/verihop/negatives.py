"""Hard-negative construction for contrastive training.

Candidates come from BM25 over the whole corpus; gold sentences are removed,
candidates too similar to the claim (likely unmarked paraphrases, i.e. false
negatives) are filtered with a pluggable similarity scorer, and the first
``keep`` survivors are taken in BM25 order.

Two scorers ship: a normalized-token-overlap baseline and an adapter around
a trained pair scorer. Their output ranges differ, so the filter threshold
is a free parameter of whichever scorer is plugged in.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .bm25 import Bm25Index, bm25_search, tokenize
from .corpus import Claim, Corpus, SentenceAddress
from .rerank import PairScorer, relevance_score

logger = logging.getLogger(__name__)

# Similarity scorer: (claim text, sentence text) -> value in [0, 1].
SimilarityScorer = Callable[[str, str], float]


@dataclass
class NegativeSamplingConfig:
    pool: int = 50
    threshold: float = 0.999
    keep: int = 2

    def __post_init__(self):
        if not self.pool >= self.keep >= 1:
            raise ValueError(f"need pool >= keep >= 1, got pool={self.pool}, keep={self.keep}")
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError(f"threshold must be in (0, 1], got {self.threshold}")


@dataclass
class NegativeSample:
    addresses: list[SentenceAddress]
    warning: str | None = None


def token_overlap_similarity(a: str, b: str) -> float:
    """Jaccard overlap of token sets; 0 when either side is empty."""
    ta, tb = set(tokenize(a)), set(tokenize(b))
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def reranker_similarity(scorer: PairScorer) -> SimilarityScorer:
    """Use a trained pair scorer's relevance (1 - P(NEI)) as similarity."""
    return lambda claim_text, sentence_text: relevance_score(
        scorer(claim_text, sentence_text))


def sample_negatives(claim: Claim, index: Bm25Index, corpus: Corpus,
                     scorer: SimilarityScorer,
                     cfg: NegativeSamplingConfig) -> NegativeSample:
    """BM25 top-pool minus gold, minus near-duplicates, first ``keep`` kept."""
    gold = set(claim.gold_addresses())
    survivors: list[SentenceAddress] = []
    for addr, _ in bm25_search(index, claim.text, cfg.pool):
        if addr in gold:
            continue
        if scorer(claim.text, corpus.get_sentence(addr)) > cfg.threshold:
            continue
        survivors.append(addr)
        if len(survivors) == cfg.keep:
            break
    warning = None
    if len(survivors) < cfg.keep:
        warning = (f"claim {claim.claim_id}: only {len(survivors)} of "
                   f"{cfg.keep} negatives survived filtering")
        logger.warning("%s", warning)
    return NegativeSample(survivors, warning)


def build_contrastive_file(claims: list[Claim], corpus: Corpus,
                           index: Bm25Index, scorer: SimilarityScorer,
                           cfg: NegativeSamplingConfig,
                           out_path: str | Path) -> int:
    """Write one training record per verifiable claim with >= 1 negative.

    Records carry the claim label, so the same file feeds contrastive and
    multitask training. The positive is the first gold sentence of the first
    evidence group. NEI claims are skipped. Output is in claim-id order and
    fully deterministic.
    """
    count = 0
    with Path(out_path).open("w", encoding="utf-8") as out:
        for claim in sorted(claims, key=lambda c: c.claim_id):
            if claim.label == "NEI" or not claim.evidence_sets:
                continue
            positive_addr = claim.evidence_sets[0][0]
            sample = sample_negatives(claim, index, corpus, scorer, cfg)
            if not sample.addresses:
                logger.warning("claim %d: no surviving negatives, record skipped",
                               claim.claim_id)
                continue
            record = {
                "query": claim.text,
                "positive": corpus.get_sentence(positive_addr),
                "negatives": [corpus.get_sentence(a) for a in sample.addresses],
                "label": claim.label,
            }
            out.write(json.dumps(record, sort_keys=True))
            out.write("\n")
            count += 1
    return count
