"""Command-line surface: reproducible ingest/index/train/retrieve/fuse/evaluate runs.

Every command is a thin wrapper over the library, writes its declared
artifact plus a ``<artifact>.manifest.json`` (content hashes of inputs and
outputs, the full config, the seed), and exits 0 on success, 1 on usage
errors, 2 on data errors.

A JSON run config can seed any command's flags via ``--config``; explicit
flags override it, and unknown config keys are usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bm25 import Bm25Params, build_bm25, load_bm25, save_bm25
from .corpus import Corpus, SentenceAddress, load_claims, load_corpus, validate_claims
from .dense import DenseIndex, EmbeddingStore, load_embeddings, save_embeddings
from .errors import DataError
from .fuse import HybridParams, hybrid_rank, scale_merge, threshold_merge
from .manifest import write_manifest
from .metrics import (compute_metrics, format_table, load_predictions,
                      load_run, sentence_recall_at_k, write_evidence_file)
from .negatives import (NegativeSamplingConfig, build_contrastive_file,
                        reranker_similarity, token_overlap_similarity)
from .pipeline import (HopConfig, PipelineComponents, make_dense_retriever,
                       make_sparse_retriever, read_run_artifact, run_multihop,
                       write_run_artifact)
from .rerank import (RerankConfig, build_reranker_training_data,
                     load_pair_scorer, rerank, save_pair_scorer,
                     train_pair_scorer, load_pair_records)
from .synthetic import (PlantedOracleScorer, make_planted_fixture,
                        write_fixture, write_oracle_predictions)
from .training import (CONTRASTIVE, MULTITASK, ClassificationHead,
                       LinearDualEncoder, MixedObjectiveSchedule,
                       ScheduleEntry, encode, load_encoder,
                       load_training_file, run_schedule, save_encoder)


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors, per the CLI contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _config_dict(args: argparse.Namespace, skip=("config", "func", "command")) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _scorer_from_spec(spec: str, corpus: Corpus | None = None, claims=None):
    """Pair scorer from 'reranker:PATH' or 'oracle' (gold-aware, eval only)."""
    if spec.startswith("reranker:"):
        return load_pair_scorer(spec.split(":", 1)[1])
    if spec == "oracle":
        if corpus is None or claims is None:
            raise DataError("oracle scorer needs both claims and corpus")
        gold_texts = set()
        for claim in claims:
            for addr in claim.gold_addresses():
                gold_texts.add(corpus.pair_text(addr))
        return PlantedOracleScorer(gold_texts)
    raise DataError(f"unknown pair scorer spec {spec!r}")


def _similarity_from_spec(spec: str):
    if spec == "overlap":
        return token_overlap_similarity
    if spec.startswith("reranker:"):
        return reranker_similarity(load_pair_scorer(spec.split(":", 1)[1]))
    raise DataError(f"unknown similarity scorer spec {spec!r}")


def _parse_schedule(text: str) -> list[ScheduleEntry]:
    entries = []
    for chunk in text.split(","):
        parts = chunk.strip().split(":")
        if len(parts) != 3:
            raise DataError(f"schedule entry must be TAG:OBJECTIVE:EPOCHS, got {chunk!r}")
        tag, objective, epochs = parts
        objective = objective.lower()
        if objective not in (CONTRASTIVE, MULTITASK):
            raise DataError(f"objective must be contrastive or multitask, got {objective!r}")
        entries.append(ScheduleEntry(tag, objective, int(epochs)))
    return entries


def _write_json(path: str, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


# --- commands ---------------------------------------------------------------------


def cmd_make_fixture(args) -> None:
    fixture = make_planted_fixture(seed=args.seed)
    corpus_path, claims_path = write_fixture(fixture, args.out_dir)
    predictions = Path(args.out_dir) / "oracle_predictions.jsonl"
    write_oracle_predictions(fixture, predictions)
    write_manifest(corpus_path, "make-fixture", _config_dict(args), [],
                   [str(corpus_path), str(claims_path), str(predictions)],
                   args.seed, __version__)


def cmd_ingest_corpus(args) -> None:
    corpus = load_corpus(args.corpus)
    report = {
        "documents": corpus.num_documents,
        "sentences_total": corpus.num_sentences,
        "sentences_nonblank": corpus.num_nonblank_sentences,
        "sentences_blank": corpus.num_sentences - corpus.num_nonblank_sentences,
    }
    _write_json(args.out, report)
    write_manifest(args.out, "ingest-corpus", _config_dict(args),
                   [args.corpus], [args.out], None, __version__)


def cmd_ingest_claims(args) -> None:
    corpus = load_corpus(args.corpus) if args.corpus else None
    claims = load_claims(args.claims, corpus, strict=not args.no_strict)
    if corpus is not None:
        report = validate_claims(claims, corpus)
    else:
        counts = {"SUPPORTS": 0, "REFUTES": 0, "NEI": 0}
        for claim in claims:
            counts[claim.label] += 1
        report = {"num_claims": len(claims), "label_counts": counts}
    _write_json(args.out, report)
    inputs = [args.claims] + ([args.corpus] if args.corpus else [])
    write_manifest(args.out, "ingest-claims", _config_dict(args),
                   inputs, [args.out], None, __version__)


def cmd_build_sparse(args) -> None:
    corpus = load_corpus(args.corpus)
    index = build_bm25(corpus, Bm25Params(k1=args.k1, b=args.b))
    save_bm25(index, args.out)
    write_manifest(args.out, "build-sparse", _config_dict(args),
                   [args.corpus], [args.out], None, __version__)


def cmd_train(args) -> None:
    if args.task == "encoder":
        datasets = {}
        for item in args.data:
            if "=" not in item:
                raise DataError(f"--data expects TAG=PATH, got {item!r}")
            tag, path = item.split("=", 1)
            datasets[tag] = load_training_file(path)
        spec = MixedObjectiveSchedule(_parse_schedule(args.schedule), args.cycles)
        encoder = LinearDualEncoder.random(args.feature_dim, args.embed_dim, args.seed)
        head = ClassificationHead.zeros(args.embed_dim)
        encoder, head, history = run_schedule(
            encoder, head, datasets, spec, alpha=args.alpha, beta=args.beta,
            learning_rate=args.lr, tau=args.tau)
        save_encoder(encoder, args.out)
        for step in history:
            print(f"cycle {step['cycle']} {step['tag']} {step['objective']}: "
                  f"loss {step['loss']:.6f}")
        inputs = [item.split("=", 1)[1] for item in args.data]
    else:
        records = load_pair_records(args.data[0])
        scorer = train_pair_scorer(records, feature_dim=args.feature_dim,
                                   seed=args.seed, learning_rate=args.lr,
                                   epochs=args.epochs)
        save_pair_scorer(scorer, args.out)
        inputs = [args.data[0]]
    write_manifest(args.out, "train", _config_dict(args), inputs, [args.out],
                   args.seed, __version__)


def cmd_build_dense(args) -> None:
    corpus = load_corpus(args.corpus)
    encoder = load_encoder(args.weights)
    ids, vectors = [], []
    for addr, text in corpus.iter_sentences(skip_blank=True):
        ids.append(str(addr))
        vectors.append(encode(encoder, "sentence", text))
    store = EmbeddingStore(ids, np.asarray(vectors, dtype=np.float32))
    save_embeddings(store, args.out)
    write_manifest(args.out, "build-dense", _config_dict(args),
                   [args.corpus, args.weights], [args.out], None, __version__)


def cmd_encode(args) -> None:
    encoder = load_encoder(args.weights)
    ids, texts = [], []
    if args.kind == "claims":
        for claim in load_claims(args.input):
            ids.append(str(claim.claim_id))
            texts.append(claim.text)
    else:
        with Path(args.input).open("r", encoding="utf-8") as handle:
            for raw in handle:
                if raw.strip():
                    rec = json.loads(raw)
                    ids.append(str(rec["id"]))
                    texts.append(rec["text"])
    vectors = [encode(encoder, args.side, text) for text in texts]
    store = EmbeddingStore(ids, np.asarray(vectors, dtype=np.float32))
    save_embeddings(store, args.out)
    write_manifest(args.out, "encode", _config_dict(args),
                   [args.input, args.weights], [args.out], None, __version__)


def cmd_sample_negatives(args) -> None:
    corpus = load_corpus(args.corpus)
    claims = load_claims(args.claims, corpus)
    index = load_bm25(args.index)
    scorer = _similarity_from_spec(args.scorer)
    cfg = NegativeSamplingConfig(pool=args.pool, threshold=args.threshold,
                                 keep=args.keep)
    count = build_contrastive_file(claims, corpus, index, scorer, cfg, args.out)
    print(f"wrote {count} training records to {args.out}")
    inputs = [args.claims, args.corpus, args.index]
    if args.scorer.startswith("reranker:"):
        inputs.append(args.scorer.split(":", 1)[1])
    write_manifest(args.out, "sample-negatives", _config_dict(args),
                   inputs, [args.out], args.seed, __version__)


def cmd_build_reranker_data(args) -> None:
    corpus = load_corpus(args.corpus)
    claims = load_claims(args.claims, corpus)
    run = load_run(args.retrievals)
    retrievals = {cid: entry.evidence for cid, entry in run.items()}
    count = build_reranker_training_data(
        claims, corpus, retrievals, args.out,
        num_negatives=args.negatives, from_top=args.from_top)
    print(f"wrote {count} pair records to {args.out}")
    write_manifest(args.out, "build-reranker-data", _config_dict(args),
                   [args.claims, args.corpus, args.retrievals], [args.out],
                   None, __version__)


def _build_retriever(args, corpus: Corpus, kind: str):
    if kind == "sparse":
        if not args.index:
            raise DataError("sparse retrieval needs --index")
        return make_sparse_retriever(load_bm25(args.index))
    if kind == "dense":
        if not (args.embeddings and args.weights):
            raise DataError("dense retrieval needs --embeddings and --weights")
        store = load_embeddings(args.embeddings)
        return make_dense_retriever(DenseIndex(store), load_encoder(args.weights))
    raise DataError(f"unknown retriever kind {kind!r}")


def cmd_retrieve(args) -> None:
    corpus = load_corpus(args.corpus)
    claims = load_claims(args.claims, corpus if args.scorer == "oracle" else None,
                         strict=False)
    retriever = _build_retriever(args, corpus, args.retriever)
    scorer = None
    if args.scorer:
        scorer = _scorer_from_spec(args.scorer, corpus, claims)
    evidence = {}
    for claim in claims:
        candidates = retriever(claim.text, args.depth)
        if scorer is not None and candidates:
            cfg = RerankConfig(depth=args.rerank_depth, k=1)
            candidates = rerank(claim.text, candidates, scorer, cfg, corpus.pair_text)
        if args.k:
            candidates = candidates[:args.k]
        evidence[claim.claim_id] = candidates
    write_evidence_file(args.out, evidence)
    inputs = [args.claims, args.corpus]
    inputs += [p for p in (args.index, args.embeddings, args.weights) if p]
    write_manifest(args.out, "retrieve", _config_dict(args), inputs,
                   [args.out], None, __version__)


def cmd_multihop(args) -> None:
    corpus = load_corpus(args.corpus)
    claims = load_claims(args.claims, corpus if args.scorer == "oracle" else None,
                         strict=False)
    kinds = tuple(args.retriever.split(","))
    retrievers = {kind: _build_retriever(args, corpus, kind) for kind in set(kinds)}
    scorer = _scorer_from_spec(args.scorer, corpus, claims)
    cfg = HopConfig(
        retrievers=kinds,
        retrieval_depths=tuple(int(d) for d in args.depth.split(",")),
        rerank_depth=args.rerank_depth,
        beam_width=args.beam, fanout=args.fanout, max_hops=args.max_hops,
        stop_check_size=args.stop_check_size)
    components = PipelineComponents(
        retrievers=retrievers, scorer=scorer, texts=corpus.pair_text,
        hybrid=HybridParams(mth=args.mth, gamma=args.gamma))
    results = [(claim.claim_id, run_multihop(claim.text, cfg, components))
               for claim in claims]
    write_run_artifact(args.out, results)
    inputs = [args.claims, args.corpus]
    inputs += [p for p in (args.index, args.embeddings, args.weights) if p]
    if args.scorer.startswith("reranker:"):
        inputs.append(args.scorer.split(":", 1)[1])
    write_manifest(args.out, "multihop", _config_dict(args), inputs,
                   [args.out], None, __version__)


def _fuse_one(result, args):
    if args.strategy == "hybrid":
        params = HybridParams(mth=args.mth, gamma=args.gamma)
        return hybrid_rank(result.single, result.sequences, params)
    if args.strategy == "threshold":
        return threshold_merge(result.single, result.sequences, args.threshold)
    if args.strategy == "scale":
        return scale_merge(result.single, result.sequences, args.factor)
    raise DataError(f"unknown fuse strategy {args.strategy!r}")


def cmd_fuse(args) -> None:
    evidence = {}
    for claim_id, result in read_run_artifact(args.runs):
        ranking = _fuse_one(result, args)
        if args.k:
            ranking = ranking[:args.k]
        evidence[claim_id] = ranking
    write_evidence_file(args.out, evidence)
    write_manifest(args.out, "fuse", _config_dict(args), [args.runs],
                   [args.out], None, __version__)


def cmd_grid_search(args) -> None:
    results = read_run_artifact(args.runs)
    claims = load_claims(args.claims)
    mths = [float(x) for x in args.mth_grid.split(",")]
    gammas = [float(x) for x in args.gamma_grid.split(",")]
    cells = []
    for mth in mths:
        for gamma in gammas:
            params = HybridParams(mth=mth, gamma=gamma)
            run = {}
            for claim_id, result in results:
                ranking = hybrid_rank(result.single, result.sequences, params)
                from .metrics import RunEntry
                run[claim_id] = RunEntry([a for a, _ in ranking[:args.k]])
            recall = sentence_recall_at_k(run, claims, k=args.k)
            cells.append({"mth": mth, "gamma": gamma,
                          "recall": recall if recall is not None else -1.0})
    best = max(cells, key=lambda c: (c["recall"], -c["mth"], -c["gamma"]))
    report = {"best": best, "cells": cells, "k": args.k}
    _write_json(args.out, report)
    write_manifest(args.out, "grid-search", _config_dict(args),
                   [args.runs, args.claims], [args.out], None, __version__)


def cmd_evaluate(args) -> None:
    claims = load_claims(args.claims)
    run = load_run(args.evidence)
    if args.predictions:
        load_predictions(args.predictions, run)
    report = compute_metrics(run, claims, k=args.k, multihop_rule=args.multihop_rule)
    Path(args.out).write_text(report.to_json(), encoding="utf-8")
    if args.table:
        print(format_table(report), end="")
    inputs = [args.evidence, args.claims]
    if args.predictions:
        inputs.append(args.predictions)
    write_manifest(args.out, "evaluate", _config_dict(args), inputs,
                   [args.out], None, __version__)


# --- parser -----------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="verihop",
                     description="multi-hop sentence retrieval for fact verification")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON run config; flags override its values")
        p.set_defaults(func=func)
        return p

    p = add("make-fixture", cmd_make_fixture, "generate the planted synthetic fixture")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)

    p = add("ingest-corpus", cmd_ingest_corpus, "parse a corpus file, write stats")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)

    p = add("ingest-claims", cmd_ingest_claims, "parse claims, write a validation report")
    p.add_argument("--claims", required=True)
    p.add_argument("--corpus")
    p.add_argument("--no-strict", action="store_true",
                   help="do not fail on unresolvable evidence")
    p.add_argument("--out", required=True)

    p = add("build-sparse", cmd_build_sparse, "build the BM25 index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--k1", type=float, default=0.9)
    p.add_argument("--b", type=float, default=0.4)
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, "train the dual encoder or the reranker")
    p.add_argument("--task", choices=["encoder", "reranker"], default="encoder")
    p.add_argument("--data", action="append", required=True,
                   help="encoder: TAG=PATH (repeatable); reranker: PATH")
    p.add_argument("--schedule", default="main:contrastive:1",
                   help="TAG:OBJECTIVE:EPOCHS[,TAG:OBJECTIVE:EPOCHS...]")
    p.add_argument("--cycles", type=int, default=1)
    p.add_argument("--feature-dim", type=int, default=4096)
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--epochs", type=int, default=200, help="reranker epochs")
    p.add_argument("--out", required=True)

    p = add("build-dense", cmd_build_dense, "encode corpus sentences to an embedding file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)

    p = add("encode", cmd_encode, "encode claims or {id,text} records")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=["claims", "texts"], default="claims")
    p.add_argument("--weights", required=True)
    p.add_argument("--side", choices=["query", "sentence"], default="query")
    p.add_argument("--out", required=True)

    p = add("sample-negatives", cmd_sample_negatives,
            "write contrastive training data with filtered BM25 negatives")
    p.add_argument("--claims", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--scorer", default="overlap", help="overlap or reranker:PATH")
    p.add_argument("--pool", type=int, default=50)
    p.add_argument("--threshold", type=float, default=0.999)
    p.add_argument("--keep", type=int, default=2)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = add("build-reranker-data", cmd_build_reranker_data,
            "write reranker pair records from first-stage retrievals")
    p.add_argument("--claims", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--retrievals", required=True)
    p.add_argument("--negatives", type=int, default=10)
    p.add_argument("--from-top", type=int, default=100)
    p.add_argument("--out", required=True)

    def retrieval_flags(p):
        p.add_argument("--index", help="BM25 index path (sparse)")
        p.add_argument("--embeddings", help="sentence embedding file (dense)")
        p.add_argument("--weights", help="encoder weights (dense)")

    p = add("retrieve", cmd_retrieve, "single-hop retrieval (optionally reranked)")
    p.add_argument("--claims", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--retriever", choices=["sparse", "dense"], default="sparse")
    retrieval_flags(p)
    p.add_argument("--scorer", help="reranker:PATH or oracle; omit for raw retrieval")
    p.add_argument("--depth", type=int, default=200)
    p.add_argument("--rerank-depth", type=int, default=200)
    p.add_argument("--k", type=int, default=0, help="truncate output (0 = keep depth)")
    p.add_argument("--out", required=True)

    p = add("multihop", cmd_multihop, "iterative retrieve-and-rerank runs")
    p.add_argument("--claims", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--retriever", default="sparse",
                   help="per-hop kinds, comma separated (sparse,dense)")
    retrieval_flags(p)
    p.add_argument("--scorer", required=True, help="reranker:PATH or oracle")
    p.add_argument("--depth", default="200", help="per-hop depths, comma separated")
    p.add_argument("--rerank-depth", type=int, default=200)
    p.add_argument("--beam", type=int, default=10)
    p.add_argument("--fanout", type=int, default=10)
    p.add_argument("--max-hops", type=int, default=2)
    p.add_argument("--stop-check-size", type=int, default=5)
    p.add_argument("--mth", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--out", required=True)

    p = add("fuse", cmd_fuse, "fuse a stored multihop run into ranked evidence")
    p.add_argument("--runs", required=True)
    p.add_argument("--strategy", choices=["hybrid", "threshold", "scale"],
                   default="hybrid")
    p.add_argument("--mth", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--factor", type=float, default=0.5)
    p.add_argument("--k", type=int, default=5, help="evidence size (0 = no truncation)")
    p.add_argument("--out", required=True)

    p = add("grid-search", cmd_grid_search,
            "grid search (mth x gamma) maximizing sentence recall@k")
    p.add_argument("--runs", required=True)
    p.add_argument("--claims", required=True)
    p.add_argument("--mth-grid", required=True, help="comma-separated mth values")
    p.add_argument("--gamma-grid", required=True, help="comma-separated gamma values")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "score ranked evidence with the metric suite")
    p.add_argument("--evidence", required=True)
    p.add_argument("--claims", required=True)
    p.add_argument("--predictions")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--multihop-rule", choices=["every", "any"], default="every")
    p.add_argument("--table", action="store_true", help="print the text table")
    p.add_argument("--out", required=True)

    return parser


def _apply_config(parser: _Parser, argv: list[str]) -> argparse.Namespace:
    """Two-phase parse so --config supplies defaults and flags override them."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {args.config}: {exc}")
    known = set(vars(args))
    unknown = [k for k in config if k not in known]
    if unknown:
        parser.error(f"unknown config key(s): {', '.join(sorted(unknown))}")
    # Re-parse with config values as defaults; explicit flags win.
    sub = parser._subparsers._group_actions[0].choices[args.command]  # type: ignore[union-attr]
    sub.set_defaults(**config)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except DataError as exc:
        print(f"verihop: data error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"verihop: data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
