"""Sentence-addressable corpus and claim ingestion.

The corpus file is JSONL, one document per line, with string fields ``id``
and ``lines``; ``lines`` packs the document's sentences as
``"<index>\\t<sentence>\\t<extra fields ignored>"`` rows joined by newlines.
Claims are JSONL records ``{id, claim, label, evidence}`` where ``evidence``
is a list of evidence groups, each a list of
``[annotation_id, evidence_id, page, sent_index]`` items (null page/sent
marks the not-enough-info convention).

Texts are NFC-normalized on ingest so tokenization is deterministic.
A sentence is globally addressed by ``(doc_id, sent_index)``; the string
form ``"doc_id::sent_index"`` is the opaque id used by every index and
score map, and ordering by that string is the universal tie-break.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IngestError, NotFoundError, ParseError

LABELS = ("SUPPORTS", "REFUTES", "NEI")
LABEL_TO_INDEX = {"SUPPORTS": 0, "REFUTES": 1, "NEI": 2}
NEI_INDEX = 2

_LABEL_ALIASES = {
    "SUPPORTS": "SUPPORTS",
    "REFUTES": "REFUTES",
    "NEI": "NEI",
    "NOT ENOUGH INFO": "NEI",
}


@dataclass(frozen=True)
class SentenceAddress:
    """Global address of one sentence: (document id, sentence index)."""

    doc_id: str
    sent_index: int

    def __post_init__(self):
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if self.sent_index < 0:
            raise ValueError("sent_index must be non-negative")

    def __str__(self) -> str:
        return f"{self.doc_id}::{self.sent_index}"

    @classmethod
    def parse(cls, text: str) -> "SentenceAddress":
        doc_id, sep, idx = text.rpartition("::")
        if not sep or not doc_id:
            raise ValueError(f"not a sentence address: {text!r}")
        return cls(doc_id, int(idx))


def address_key(addr) -> str:
    """Canonical tie-break key: the address string form."""
    return str(addr)


@dataclass
class Document:
    doc_id: str
    sentences: list[tuple[int, str]]  # (sent_index, text), strictly increasing index

    def text_of(self, sent_index: int) -> str | None:
        for idx, text in self.sentences:
            if idx == sent_index:
                return text
        return None


@dataclass
class Claim:
    claim_id: int
    text: str
    label: str  # one of LABELS
    # Alternative gold evidence groups; each group is an order-preserving,
    # deduplicated tuple of addresses (set semantics, stable "first" element).
    evidence_sets: list[tuple[SentenceAddress, ...]] = field(default_factory=list)

    def gold_addresses(self) -> list[SentenceAddress]:
        """All gold addresses across groups, deduplicated, file order."""
        seen: dict[SentenceAddress, None] = {}
        for group in self.evidence_sets:
            for addr in group:
                seen.setdefault(addr)
        return list(seen)


@dataclass
class Corpus:
    documents: dict[str, Document] = field(default_factory=dict)

    @property
    def num_documents(self) -> int:
        return len(self.documents)

    @property
    def num_sentences(self) -> int:
        return sum(len(d.sentences) for d in self.documents.values())

    @property
    def num_nonblank_sentences(self) -> int:
        return sum(1 for _ in self.iter_sentences(skip_blank=True))

    def iter_sentences(self, skip_blank: bool = False):
        """Yield (SentenceAddress, text) in document ingestion order."""
        for doc in self.documents.values():
            for idx, text in doc.sentences:
                if skip_blank and not text.strip():
                    continue
                yield SentenceAddress(doc.doc_id, idx), text

    def get_sentence(self, addr: SentenceAddress) -> str:
        doc = self.documents.get(addr.doc_id)
        if doc is None:
            raise NotFoundError(addr.doc_id, addr.sent_index)
        text = doc.text_of(addr.sent_index)
        if text is None:
            raise NotFoundError(addr.doc_id, addr.sent_index)
        return text

    def has_sentence(self, addr: SentenceAddress) -> bool:
        doc = self.documents.get(addr.doc_id)
        return doc is not None and doc.text_of(addr.sent_index) is not None

    def pair_text(self, addr: SentenceAddress) -> str:
        """Sentence text with its document title prepended ("title . text")."""
        title = addr.doc_id.replace("_", " ")
        return f"{title} . {self.get_sentence(addr)}"


def _nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def _parse_lines_field(lines: str, path: str, lineno: int) -> list[tuple[int, str]]:
    sentences: list[tuple[int, str]] = []
    prev = -1
    for row in lines.split("\n"):
        if row == "":
            continue
        fields = row.split("\t")
        try:
            idx = int(fields[0])
        except ValueError:
            raise ParseError(f"non-integer sentence index {fields[0]!r}", path, lineno)
        if idx <= prev:
            raise ParseError(f"sentence index {idx} not strictly increasing", path, lineno)
        prev = idx
        text = fields[1] if len(fields) > 1 else ""
        sentences.append((idx, _nfc(text)))
    return sentences


def load_corpus(path: str | Path, nfc: bool = True) -> Corpus:
    """Load a sentence-segmented document collection from JSONL.

    Blank sentence texts keep their index (they stay addressable) but are
    excluded from search indexes downstream. Duplicate doc ids are rejected.
    """
    corpus = Corpus()
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, 1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed JSON ({exc.msg})", str(path), lineno)
            if not isinstance(record, dict) or "id" not in record or "lines" not in record:
                raise ParseError("expected object with 'id' and 'lines'", str(path), lineno)
            doc_id = record["id"]
            lines = record["lines"]
            if not isinstance(doc_id, str) or not isinstance(lines, str):
                raise ParseError("'id' and 'lines' must be strings", str(path), lineno)
            if nfc:
                doc_id = _nfc(doc_id)
            if not doc_id:
                raise ParseError("empty doc id", str(path), lineno)
            if doc_id in corpus.documents:
                raise IngestError(f"duplicate doc id {doc_id!r}")
            sentences = _parse_lines_field(lines, str(path), lineno)
            if not nfc:
                sentences = [(i, t) for i, t in sentences]
            corpus.documents[doc_id] = Document(doc_id, sentences)
    return corpus


def dump_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus back to the ingestion format (round-trip safe)."""
    with Path(path).open("w", encoding="utf-8") as handle:
        for doc in corpus.documents.values():
            lines = "\n".join(f"{idx}\t{text}" for idx, text in doc.sentences)
            handle.write(json.dumps({"id": doc.doc_id, "lines": lines}, sort_keys=True))
            handle.write("\n")


def _parse_evidence(evidence, path: str, lineno: int) -> list[tuple[SentenceAddress, ...]]:
    groups: list[tuple[SentenceAddress, ...]] = []
    if not evidence:
        return groups
    for group in evidence:
        addrs: dict[SentenceAddress, None] = {}
        for item in group:
            if not isinstance(item, (list, tuple)) or len(item) < 4:
                raise ParseError(f"bad evidence item {item!r}", path, lineno)
            page, sent = item[2], item[3]
            if page is None or sent is None:
                continue
            addrs.setdefault(SentenceAddress(_nfc(str(page)), int(sent)))
        if addrs:
            groups.append(tuple(addrs))
    return groups


def load_claims(path: str | Path, corpus: Corpus | None = None,
                strict: bool = True) -> list[Claim]:
    """Load claims from JSONL; optionally validate gold addresses against a corpus.

    With a corpus and ``strict``, a SUPPORTS/REFUTES claim with no fully
    resolvable evidence group raises; otherwise problems only show up in
    ``validate_claims``.
    """
    claims: list[Claim] = []
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, 1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed JSON ({exc.msg})", str(path), lineno)
            raw_label = record.get("label")
            label = _LABEL_ALIASES.get(raw_label)
            if label is None:
                raise ParseError(f"unknown label {raw_label!r}", str(path), lineno)
            groups = _parse_evidence(record.get("evidence"), str(path), lineno)
            if label == "NEI":
                groups = []
            claims.append(Claim(
                claim_id=int(record["id"]),
                text=_nfc(record["claim"]),
                label=label,
                evidence_sets=groups,
            ))
    if corpus is not None:
        report = validate_claims(claims, corpus)
        if strict and report["claims_without_resolvable_set"]:
            bad = report["claims_without_resolvable_set"]
            raise IngestError(
                f"{len(bad)} verifiable claim(s) have no resolvable evidence set: "
                f"{bad[:10]}"
            )
    return claims


def validate_claims(claims: list[Claim], corpus: Corpus) -> dict:
    """Check every gold address against the corpus.

    Returns a JSON-ready report: unresolvable addresses, claims whose every
    evidence group has a hole, and label counts (the report also carries both
    sentence tallies, with and without blanks, since dumps contain blanks).
    """
    unresolvable: list[dict] = []
    no_set: list[int] = []
    label_counts = {label: 0 for label in LABELS}
    for claim in claims:
        label_counts[claim.label] += 1
        if claim.label == "NEI":
            continue
        any_complete = False
        for group in claim.evidence_sets:
            complete = True
            for addr in group:
                if not corpus.has_sentence(addr):
                    complete = False
                    unresolvable.append(
                        {"claim_id": claim.claim_id, "address": str(addr)})
            any_complete = any_complete or complete
        if not any_complete:
            no_set.append(claim.claim_id)
    return {
        "num_claims": len(claims),
        "label_counts": label_counts,
        "unresolvable_addresses": unresolvable,
        "claims_without_resolvable_set": no_set,
        "corpus_sentences_total": corpus.num_sentences,
        "corpus_sentences_nonblank": corpus.num_nonblank_sentences,
    }
