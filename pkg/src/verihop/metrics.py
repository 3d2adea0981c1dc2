"""FEVER-style retrieval and verification metrics.

Recall@k counts a verifiable (SUPPORTS/REFUTES) claim as covered when its
top-k evidence contains at least one *complete* gold evidence group; the
document-level variant compares document-id sets the same way. The FEVER
score is label-correct AND covered (NEI claims need only the label). The
multi-hop subset is, by default, claims whose every gold group spans at
least two documents ("any" group is available as an alternative rule).

A metric with an empty denominator is reported as absent (None), never 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Claim, SentenceAddress
from .errors import DataError


@dataclass
class RunEntry:
    """Ranked evidence and (optionally) a predicted verdict for one claim."""

    evidence: list[SentenceAddress] = field(default_factory=list)
    predicted_label: str | None = None

    def __post_init__(self):
        if len(set(self.evidence)) != len(self.evidence):
            raise ValueError("evidence addresses must be distinct")


RetrievalRun = dict[int, RunEntry]


def is_multihop(claim: Claim, rule: str = "every") -> bool:
    """Multi-hop membership: 'every' (all groups span >= 2 docs) or 'any'."""
    if rule not in ("every", "any"):
        raise ValueError(f"unknown multihop rule {rule!r}")
    if not claim.evidence_sets:
        return False
    spans = [len({addr.doc_id for addr in group}) >= 2 for group in claim.evidence_sets]
    return all(spans) if rule == "every" else any(spans)


def _top_k(run: RetrievalRun, claim_id: int, k: int) -> list[SentenceAddress]:
    entry = run.get(claim_id)
    return entry.evidence[:k] if entry else []


def _covered_sentences(claim: Claim, top: list[SentenceAddress]) -> bool:
    have = set(top)
    return any(set(group) <= have for group in claim.evidence_sets)


def _covered_documents(claim: Claim, top: list[SentenceAddress],
                       coverage: str = "full") -> bool:
    have = {addr.doc_id for addr in top}
    if coverage == "full":
        return any({addr.doc_id for addr in group} <= have
                   for group in claim.evidence_sets)
    if coverage == "any":
        gold_docs = {addr.doc_id for group in claim.evidence_sets for addr in group}
        return bool(gold_docs & have)
    raise ValueError(f"unknown document coverage rule {coverage!r}")


def _subset(claims: list[Claim], subset: str, multihop_rule: str) -> list[Claim]:
    verifiable = [c for c in claims if c.label != "NEI"]
    if subset == "all":
        return verifiable
    if subset == "multihop":
        return [c for c in verifiable if is_multihop(c, multihop_rule)]
    raise ValueError(f"unknown subset {subset!r}")


def sentence_recall_at_k(run: RetrievalRun, claims: list[Claim], k: int = 5,
                         subset: str = "all",
                         multihop_rule: str = "every") -> float | None:
    chosen = _subset(claims, subset, multihop_rule)
    if not chosen:
        return None
    hits = sum(_covered_sentences(c, _top_k(run, c.claim_id, k)) for c in chosen)
    return hits / len(chosen)


def document_recall_at_k(run: RetrievalRun, claims: list[Claim], k: int = 5,
                         subset: str = "all", multihop_rule: str = "every",
                         coverage: str = "full") -> float | None:
    chosen = _subset(claims, subset, multihop_rule)
    if not chosen:
        return None
    hits = sum(_covered_documents(c, _top_k(run, c.claim_id, k), coverage)
               for c in chosen)
    return hits / len(chosen)


def mean_distinct_docs(run: RetrievalRun, claims: list[Claim], k: int = 5
                       ) -> float | None:
    """Mean number of distinct document ids among each claim's top-k sentences."""
    if not claims:
        return None
    total = sum(len({a.doc_id for a in _top_k(run, c.claim_id, k)}) for c in claims)
    return total / len(claims)


def label_accuracy(run: RetrievalRun, claims: list[Claim]) -> float:
    """Exact-match verdict accuracy over all claims, NEI included."""
    if not claims:
        raise DataError("no claims to score")
    hits = 0
    for claim in claims:
        entry = run.get(claim.claim_id)
        if entry is None or entry.predicted_label is None:
            raise DataError(f"claim {claim.claim_id} has no predicted label")
        hits += entry.predicted_label == claim.label
    return hits / len(claims)


def fever_score(run: RetrievalRun, claims: list[Claim], k: int = 5) -> float:
    """Label correct AND (for verifiable claims) a complete gold group in top-k."""
    if not claims:
        raise DataError("no claims to score")
    hits = 0
    for claim in claims:
        entry = run.get(claim.claim_id)
        if entry is None or entry.predicted_label is None:
            raise DataError(f"claim {claim.claim_id} has no predicted label")
        if entry.predicted_label != claim.label:
            continue
        if claim.label == "NEI" or _covered_sentences(claim, entry.evidence[:k]):
            hits += 1
    return hits / len(claims)


@dataclass
class MetricsReport:
    k: int
    num_claims: int
    num_verifiable: int
    num_multihop: int
    sentence_recall: float | None
    sentence_recall_multihop: float | None
    document_recall: float | None
    document_recall_multihop: float | None
    document_recall_any: float | None
    label_accuracy: float | None
    fever_score: float | None
    mean_distinct_docs: float | None

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, indent=2) + "\n"


def compute_metrics(run: RetrievalRun, claims: list[Claim], k: int = 5,
                    multihop_rule: str = "every") -> MetricsReport:
    """Assemble the full report; verdict metrics appear only with predictions."""
    have_predictions = claims and all(
        run.get(c.claim_id) is not None and run[c.claim_id].predicted_label is not None
        for c in claims)
    some_predictions = any(
        run.get(c.claim_id) is not None and run[c.claim_id].predicted_label is not None
        for c in claims)
    if some_predictions and not have_predictions:
        raise DataError("predictions present for some claims but missing for others")
    return MetricsReport(
        k=k,
        num_claims=len(claims),
        num_verifiable=sum(c.label != "NEI" for c in claims),
        num_multihop=sum(c.label != "NEI" and is_multihop(c, multihop_rule)
                         for c in claims),
        sentence_recall=sentence_recall_at_k(run, claims, k, "all", multihop_rule),
        sentence_recall_multihop=sentence_recall_at_k(
            run, claims, k, "multihop", multihop_rule),
        document_recall=document_recall_at_k(run, claims, k, "all", multihop_rule),
        document_recall_multihop=document_recall_at_k(
            run, claims, k, "multihop", multihop_rule),
        document_recall_any=document_recall_at_k(
            run, claims, k, "all", multihop_rule, coverage="any"),
        label_accuracy=label_accuracy(run, claims) if have_predictions else None,
        fever_score=fever_score(run, claims, k) if have_predictions else None,
        mean_distinct_docs=mean_distinct_docs(run, claims, k),
    )


def format_table(report: MetricsReport) -> str:
    """Plain-text table: document/sentence recall by multi-hop and overall."""
    def cell(value: float | None) -> str:
        return "   --" if value is None else f"{value:.3f}"

    lines = [
        f"{'':24s} {'multi-hop':>10s} {'Overall':>10s}",
        f"{'Document-level Rec@' + str(report.k):24s} "
        f"{cell(report.document_recall_multihop):>10s} {cell(report.document_recall):>10s}",
        f"{'Sentence-level Rec@' + str(report.k):24s} "
        f"{cell(report.sentence_recall_multihop):>10s} {cell(report.sentence_recall):>10s}",
        "",
        f"Label accuracy:     {cell(report.label_accuracy)}",
        f"FEVER score:        {cell(report.fever_score)}",
        f"Mean distinct docs: {cell(report.mean_distinct_docs)}",
        f"Claims: {report.num_claims} total, {report.num_verifiable} verifiable, "
        f"{report.num_multihop} multi-hop",
    ]
    return "\n".join(lines) + "\n"


# --- file interfaces ----------------------------------------------------------------


def write_evidence_file(path: str | Path,
                        evidence: dict[int, list[tuple[SentenceAddress, float]]]) -> None:
    """Ranked-evidence JSONL: {claim_id, evidence: [[address, score], ...]}."""
    with Path(path).open("w", encoding="utf-8") as out:
        for claim_id in sorted(evidence):
            record = {"claim_id": claim_id,
                      "evidence": [[str(a), s] for a, s in evidence[claim_id]]}
            out.write(json.dumps(record, sort_keys=True))
            out.write("\n")


def load_run(path: str | Path) -> RetrievalRun:
    run: RetrievalRun = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for raw in handle:
            if not raw.strip():
                continue
            rec = json.loads(raw)
            addrs = [SentenceAddress.parse(item[0]) for item in rec["evidence"]]
            run[int(rec["claim_id"])] = RunEntry(evidence=addrs)
    return run


def load_predictions(path: str | Path, run: RetrievalRun) -> RetrievalRun:
    """Attach {claim_id, label} JSONL predictions to a run (in place)."""
    with Path(path).open("r", encoding="utf-8") as handle:
        for raw in handle:
            if not raw.strip():
                continue
            rec = json.loads(raw)
            claim_id = int(rec["claim_id"])
            label = rec["label"]
            if label == "NOT ENOUGH INFO":
                label = "NEI"
            entry = run.setdefault(claim_id, RunEntry())
            entry.predicted_label = label
    return run
