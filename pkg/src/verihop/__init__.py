"""Multi-hop dense sentence retrieval engine for open-domain fact verification.

Ingest a sentence-segmented corpus and claims, retrieve with BM25 or exact
inner-product search over embeddings, rerank candidate sentences with a
pairwise classifier, expand queries over multiple hops, fuse single-hop and
multi-hop evidence with the hybrid ranker, and score runs with FEVER-style
metrics (recall@5, label accuracy, FEVER score).
"""

__version__ = "0.1.0"

from .corpus import (Claim, Corpus, Document, SentenceAddress, dump_corpus,
                     load_claims, load_corpus, validate_claims)
from .bm25 import (Bm25Index, Bm25Params, bm25_search, build_bm25, load_bm25,
                   save_bm25, tokenize)
from .dense import (DenseIndex, EmbeddingStore, batch_mips_search,
                    load_embeddings, mips_search, save_embeddings)
from .training import (CONTRASTIVE, MULTITASK, ClassificationHead,
                       ContrastiveBatch, EpochSlot, LinearDualEncoder,
                       MixedObjectiveSchedule, MultiTaskWeights, ScheduleEntry,
                       TrainExample, build_schedule, classification_probs,
                       contrastive_loss, encode, joint_loss, load_encoder,
                       load_training_file, nli_loss, run_schedule,
                       save_encoder, train_step)
from .negatives import (NegativeSample, NegativeSamplingConfig,
                        build_contrastive_file, reranker_similarity,
                        sample_negatives, token_overlap_similarity)
from .rerank import (LinearPairScorer, RerankConfig,
                     build_reranker_training_data, load_logits_file,
                     load_pair_scorer, relevance_score, rerank,
                     rerank_from_logits, save_pair_scorer, train_pair_scorer)
from .pipeline import (EvidenceSequence, HopConfig, MultihopResult,
                       PipelineComponents, compose_query, make_dense_retriever,
                       make_sparse_retriever, read_run_artifact, run_hop,
                       run_multihop, write_run_artifact)
from .fuse import (HybridParams, hybrid_rank, normalize_scores, scale_merge,
                   sequence_score, threshold_merge)
from .metrics import (MetricsReport, RetrievalRun, RunEntry, compute_metrics,
                      document_recall_at_k, fever_score, format_table,
                      is_multihop, label_accuracy, load_predictions, load_run,
                      mean_distinct_docs, sentence_recall_at_k,
                      write_evidence_file)
from .synthetic import (PlantedFixture, PlantedOracleScorer,
                        make_planted_fixture, make_separable_training_set,
                        write_fixture, write_oracle_predictions)
from .errors import (DataError, DimensionError, FormatError, IngestError,
                     NotFoundError, ParseError)
