"""Iterative retrieve-and-rerank over a sentence corpus.

Hop 1 retrieves and reranks candidates for the raw claim and fills the
single-hop score map. Each further hop expands the current beam: the query
is recomposed as claim + retrieved sentence texts (space-joined, in order),
retrieval and reranking run again, and the top continuations extend the
path. After every hop past the first, the hybrid ranking of everything
found so far is computed; the loop stops when its leading addresses stop
changing, or at the hop budget.

Retrievers are plain callables (query, depth) -> [(address, score), ...];
factories for the BM25 and dense-index backends live here. Path step scores
are rerank relevances, never raw retrieval scores.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .bm25 import Bm25Index, bm25_search
from .corpus import Corpus, SentenceAddress
from .dense import DenseIndex, mips_search
from .fuse import HybridParams, hybrid_rank, sequence_score
from .rerank import PairScorer, RerankConfig, rerank
from .training import LinearDualEncoder, encode

Retriever = Callable[[str, int], list[tuple[SentenceAddress, float]]]


@dataclass
class HopConfig:
    retrievers: tuple[str, ...] = ("dense",)   # per hop; last entry repeats
    retrieval_depths: tuple[int, ...] = (200,)  # per hop; last entry repeats
    rerank_depth: int = 200
    beam_width: int = 10       # hop-1 results expanded (b1)
    fanout: int = 10           # continuations kept per expansion (b2)
    max_hops: int = 2
    stop_check_size: int = 5

    def __post_init__(self):
        if self.max_hops < 1:
            raise ValueError("max_hops must be >= 1")
        for name in ("rerank_depth", "beam_width", "fanout", "stop_check_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.retrievers or not self.retrieval_depths:
            raise ValueError("need at least one retriever choice and depth")
        if any(d < 1 for d in self.retrieval_depths):
            raise ValueError("retrieval depths must be positive")

    def retriever_for(self, hop: int) -> str:
        return self.retrievers[min(hop - 1, len(self.retrievers) - 1)]

    def depth_for(self, hop: int) -> int:
        return self.retrieval_depths[min(hop - 1, len(self.retrieval_depths) - 1)]


@dataclass(frozen=True)
class EvidenceSequence:
    """One multi-hop retrieval path: (address, step score) per hop."""

    steps: tuple[tuple[SentenceAddress, float], ...]

    def __post_init__(self):
        if len(self.steps) < 1:
            raise ValueError("a path needs at least one step")
        addrs = [addr for addr, _ in self.steps]
        if len(set(addrs)) != len(addrs):
            raise ValueError("path revisits a sentence")

    def __iter__(self):
        return iter(self.steps)

    def __len__(self):
        return len(self.steps)

    def addresses(self) -> set[SentenceAddress]:
        return {addr for addr, _ in self.steps}


@dataclass
class PipelineComponents:
    retrievers: dict[str, Retriever]
    scorer: PairScorer
    texts: Callable[[SentenceAddress], str]
    hybrid: HybridParams = field(default_factory=HybridParams)


@dataclass
class MultihopResult:
    single: dict[SentenceAddress, float]
    single_ranking: list[tuple[SentenceAddress, float]]
    sequences: list[EvidenceSequence]
    hops: int


def make_sparse_retriever(index: Bm25Index) -> Retriever:
    return lambda query, depth: bm25_search(index, query, depth)


def make_dense_retriever(index: DenseIndex, encoder: LinearDualEncoder) -> Retriever:
    def retrieve(query: str, depth: int):
        vector = encode(encoder, "query", query)
        return [(SentenceAddress.parse(id_), score)
                for id_, score in mips_search(index, vector, depth)]
    return retrieve


def compose_query(claim: str, sentences: list[str]) -> str:
    """Claim and retrieved sentence texts joined with single spaces, in order."""
    return " ".join([claim, *sentences])


def run_hop(query: str, retriever: Retriever, scorer: PairScorer,
            cfg: HopConfig, texts: Callable[[SentenceAddress], str],
            depth: int) -> list[tuple[SentenceAddress, float]]:
    """One retrieve-then-rerank round; scores in the result are relevances."""
    candidates = retriever(query, depth)
    if not candidates:
        return []
    rcfg = RerankConfig(depth=cfg.rerank_depth, k=min(cfg.stop_check_size, cfg.rerank_depth))
    return rerank(query, candidates, scorer, rcfg, texts)


def _top_addresses(ranking: list[tuple[SentenceAddress, float]], size: int
                   ) -> list[SentenceAddress]:
    return [addr for addr, _ in ranking[:size]]


def run_multihop(claim_text: str, cfg: HopConfig,
                 components: PipelineComponents) -> MultihopResult:
    """Full iterative retrieval for one claim."""
    retriever = components.retrievers[cfg.retriever_for(1)]
    hop1 = run_hop(claim_text, retriever, components.scorer, cfg,
                   components.texts, cfg.depth_for(1))
    single = dict(hop1)
    sequences: list[EvidenceSequence] = []
    hops = 1
    previous_top = _top_addresses(
        hybrid_rank(single, [], components.hybrid), cfg.stop_check_size)

    while hops < cfg.max_hops:
        hop = hops + 1
        if hop == 2:
            prefixes = [((addr, score),) for addr, score in hop1[:cfg.beam_width]]
        else:
            newest = [seq for seq in sequences if len(seq) == hops]
            newest.sort(key=lambda seq: -sequence_score(seq))  # stable: generation order on ties
            prefixes = [seq.steps for seq in newest[:cfg.beam_width]]
        retriever = components.retrievers[cfg.retriever_for(hop)]
        depth = cfg.depth_for(hop)
        for prefix in prefixes:
            prefix_addrs = {addr for addr, _ in prefix}
            query = compose_query(
                claim_text, [components.texts(addr) for addr, _ in prefix])
            ranked = run_hop(query, retriever, components.scorer, cfg,
                             components.texts, depth)
            taken = 0
            for addr, score in ranked:
                if addr in prefix_addrs:
                    continue
                sequences.append(EvidenceSequence(prefix + ((addr, score),)))
                taken += 1
                if taken == cfg.fanout:
                    break
        hops = hop
        top = _top_addresses(
            hybrid_rank(single, sequences, components.hybrid), cfg.stop_check_size)
        if top == previous_top:
            break
        previous_top = top

    return MultihopResult(single=single, single_ranking=hop1,
                          sequences=sequences, hops=hops)


# --- run artifacts --------------------------------------------------------------


def result_to_record(claim_id: int, result: MultihopResult) -> dict:
    """One JSON record per claim: single-hop ranking, paths, hop count."""
    return {
        "claim_id": claim_id,
        "single": [[str(addr), score] for addr, score in result.single_ranking],
        "sequences": [
            [[str(addr), score] for addr, score in seq] for seq in result.sequences
        ],
        "hops": result.hops,
    }


def record_to_result(record: dict) -> tuple[int, MultihopResult]:
    ranking = [(SentenceAddress.parse(a), float(s)) for a, s in record["single"]]
    sequences = [
        EvidenceSequence(tuple((SentenceAddress.parse(a), float(s)) for a, s in seq))
        for seq in record["sequences"]
    ]
    result = MultihopResult(single=dict(ranking), single_ranking=ranking,
                            sequences=sequences, hops=int(record["hops"]))
    return int(record["claim_id"]), result


def write_run_artifact(path: str | Path,
                       results: list[tuple[int, MultihopResult]]) -> None:
    with Path(path).open("w", encoding="utf-8") as out:
        for claim_id, result in results:
            out.write(json.dumps(result_to_record(claim_id, result), sort_keys=True))
            out.write("\n")


def read_run_artifact(path: str | Path) -> list[tuple[int, MultihopResult]]:
    results = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for raw in handle:
            if raw.strip():
                results.append(record_to_result(json.loads(raw)))
    return results
