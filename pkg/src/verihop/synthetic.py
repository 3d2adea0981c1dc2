"""Seed-deterministic synthetic fixtures with planted retrieval structure.

The planted corpus is built from disjoint token namespaces so retrieval
behavior is fully controlled:

* every document owns an entity token (``entNNN``) present in each of its
  sentences, plus per-sentence marker and private filler tokens;
* distractor documents share a pool of common filler tokens that also
  appear in claims, so first-hop retrieval returns a realistically crowded
  candidate list;
* a two-hop claim names entity X; one sentence of document X names entity
  Y; the second gold sentence lives in document Y and shares no token with
  the claim, so it is unreachable in one hop and only a second hop (query =
  claim + first gold sentence) can surface it.

The planted oracle pair scorer gives gold pairs a strongly negative NEI
logit and everything else a positive one with a small text-keyed jitter, so
non-gold relevances are spread rather than tied (ties would make score maps
degenerate and mask ranking effects).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Claim, Corpus, Document, SentenceAddress
from .training import TrainExample

GOLD_NEI_LOGIT = -10.0
JUNK_NEI_LOGIT = 10.0


@dataclass
class PlantedFixture:
    corpus: Corpus
    claims: list[Claim]

    def gold_pair_texts(self) -> set[str]:
        texts = set()
        for claim in self.claims:
            for addr in claim.gold_addresses():
                texts.add(self.corpus.pair_text(addr))
        return texts


class PlantedOracleScorer:
    """Pair scorer that recognizes gold sentences of a fixture by their text."""

    def __init__(self, gold_texts: set[str], jitter_seed: int = 0):
        self.gold_texts = gold_texts
        self.jitter_seed = jitter_seed

    def _jitter(self, text: str) -> float:
        digest = hashlib.blake2b(
            text.encode("utf-8"), digest_size=8,
            key=self.jitter_seed.to_bytes(8, "little")).digest()
        return int.from_bytes(digest, "little") % 1_000_000 / 1_000_000

    def __call__(self, query: str, sentence: str) -> np.ndarray:
        if sentence in self.gold_texts:
            return np.array([0.0, 0.0, GOLD_NEI_LOGIT])
        return np.array([0.0, 0.0, JUNK_NEI_LOGIT + self._jitter(sentence)])


def _fillers(rng: np.random.Generator, pool: list[str], n: int) -> str:
    return " ".join(rng.choice(pool, size=n, replace=False))


def make_planted_fixture(seed: int = 0, n_twohop: int = 50, n_singlehop: int = 50,
                         n_nei: int = 20, sentences_per_doc: int = 5,
                         n_distractor_docs: int = 50) -> PlantedFixture:
    """Corpus of 200 docs / 1000 sentences with 50+50+20 planted claims.

    Documents: [0, n_twohop) are first-hop docs, [50, 100) single-hop docs,
    [100, 150) second-hop docs, [150, 200) distractors (at the defaults).
    """
    rng = np.random.default_rng(seed)
    common_pool = [f"common{i:02d}" for i in range(40)]

    n_docs = n_twohop + n_singlehop + n_twohop + n_distractor_docs
    hop1_base, single_base = 0, n_twohop
    hop2_base = n_twohop + n_singlehop
    distractor_base = hop2_base + n_twohop

    corpus = Corpus()
    for d in range(n_docs):
        doc_id = f"Topic_{d:03d}"
        entity = f"ent{d:03d}"
        sentences = []
        for s in range(sentences_per_doc):
            marker = f"mark{d:03d}x{s}"
            if d >= distractor_base:
                body = _fillers(rng, common_pool, 3)
            else:
                body = f"own{d:03d}a own{d:03d}b"
            sentences.append((s, f"{entity} {marker} {body} ."))
        corpus.documents[doc_id] = Document(doc_id, sentences)

    def doc_id_of(d: int) -> str:
        return f"Topic_{d:03d}"

    def plant_link(src: int, src_sent: int, dst: int) -> None:
        """Make sentence (src, src_sent) name dst's entity token."""
        doc = corpus.documents[doc_id_of(src)]
        idx, text = doc.sentences[src_sent]
        doc.sentences[src_sent] = (idx, text.replace(" .", f" ent{dst:03d} ."))

    claims: list[Claim] = []
    claim_id = 0
    for i in range(n_twohop):
        x, y = hop1_base + i, hop2_base + i
        sx = int(rng.integers(sentences_per_doc))
        sy = int(rng.integers(sentences_per_doc))
        plant_link(x, sx, y)
        label = "SUPPORTS" if i % 2 == 0 else "REFUTES"
        text = f"ent{x:03d} {_fillers(rng, common_pool, 3)} ."
        claims.append(Claim(
            claim_id=claim_id, text=text, label=label,
            evidence_sets=[(SentenceAddress(doc_id_of(x), sx),
                            SentenceAddress(doc_id_of(y), sy))],
        ))
        claim_id += 1

    for i in range(n_singlehop):
        a = single_base + i
        sa = int(rng.integers(sentences_per_doc))
        label = "SUPPORTS" if i % 2 == 0 else "REFUTES"
        text = f"ent{a:03d} {_fillers(rng, common_pool, 3)} ."
        claims.append(Claim(
            claim_id=claim_id, text=text, label=label,
            evidence_sets=[(SentenceAddress(doc_id_of(a), sa),)],
        ))
        claim_id += 1

    for _ in range(n_nei):
        text = f"{_fillers(rng, common_pool, 4)} ."
        claims.append(Claim(claim_id=claim_id, text=text, label="NEI"))
        claim_id += 1

    return PlantedFixture(corpus, claims)


def write_fixture(fixture: PlantedFixture, directory: str | Path
                  ) -> tuple[Path, Path]:
    """Write corpus.jsonl and claims.jsonl in the ingestion formats."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    corpus_path = directory / "corpus.jsonl"
    claims_path = directory / "claims.jsonl"
    with corpus_path.open("w", encoding="utf-8") as out:
        for doc in fixture.corpus.documents.values():
            lines = "\n".join(f"{i}\t{t}" for i, t in doc.sentences)
            out.write(json.dumps({"id": doc.doc_id, "lines": lines}, sort_keys=True))
            out.write("\n")
    with claims_path.open("w", encoding="utf-8") as out:
        for claim in fixture.claims:
            if claim.label == "NEI":
                evidence = [[[claim.claim_id, claim.claim_id, None, None]]]
                label = "NOT ENOUGH INFO"
            else:
                evidence = [
                    [[claim.claim_id, claim.claim_id, a.doc_id, a.sent_index]
                     for a in group]
                    for group in claim.evidence_sets
                ]
                label = claim.label
            record = {"id": claim.claim_id, "claim": claim.text,
                      "label": label, "evidence": evidence}
            out.write(json.dumps(record, sort_keys=True))
            out.write("\n")
    return corpus_path, claims_path


def write_oracle_predictions(fixture: PlantedFixture, path: str | Path) -> None:
    """Gold labels as a predictions file (the oracle-verdict plug-in)."""
    with Path(path).open("w", encoding="utf-8") as out:
        for claim in fixture.claims:
            out.write(json.dumps({"claim_id": claim.claim_id, "label": claim.label},
                                 sort_keys=True))
            out.write("\n")


def make_separable_training_set(seed: int = 0, n_examples: int = 24
                                ) -> list[TrainExample]:
    """Linearly separable contrastive set: positives share the query's topic
    token family, negatives come from a disjoint family."""
    rng = np.random.default_rng(seed)
    topics = [f"topic{i:02d}" for i in range(8)]
    off_topics = [f"other{i:02d}" for i in range(8)]
    examples = []
    for i in range(n_examples):
        topic = topics[i % len(topics)]
        off = off_topics[int(rng.integers(len(off_topics)))]
        suffix = int(rng.integers(1000))
        examples.append(TrainExample(
            query=f"{topic} question {suffix}",
            positive=f"{topic} statement fact {suffix}",
            negatives=[f"{off} statement fact {suffix}",
                       f"{off} unrelated note {suffix}"],
            label=i % 3,
        ))
    return examples
