"""Dual-encoder representation learning at desk scale.

A linear dual encoder stands in for the transformer: a text is tokenized,
token counts are hashed into a fixed-width feature vector, L2-normalized,
and projected by a side-specific weight matrix (separate query and sentence
matrices, DPR-style). All losses keep their exact form:

* contrastive: softmax over the positive against every in-batch positive
  and every in-batch negative (n negatives per example), temperature-scaled
  inner products;
* 3-way classification over the concatenated (query, positive) embedding;
* joint: alpha * contrastive + beta * classification.

Gradients are analytic and exact; training is full-batch gradient descent,
one step per schedule epoch, fully determined by the seed.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .bm25 import tokenize
from .corpus import LABEL_TO_INDEX
from .errors import DataError, DimensionError, FormatError

logger = logging.getLogger(__name__)

CONTRASTIVE = "contrastive"
MULTITASK = "multitask"

NLI_PROB_FLOOR = 1e-30

_MAGIC = b"M3WT"
_VERSION = 1


# --- hashed bag-of-tokens features -------------------------------------------


def hash_token(token: str, seed: int, feature_dim: int) -> int:
    digest = hashlib.blake2b(
        token.encode("utf-8"), digest_size=8,
        key=seed.to_bytes(8, "little")).digest()
    return int.from_bytes(digest, "little") % feature_dim


def hashed_features(text: str, seed: int, feature_dim: int) -> np.ndarray:
    """Token counts hashed into feature_dim buckets, L2-normalized."""
    vec = np.zeros(feature_dim, dtype=np.float64)
    for token in tokenize(text):
        vec[hash_token(token, seed, feature_dim)] += 1.0
    norm = np.linalg.norm(vec)
    if norm > 0.0:
        vec /= norm
    return vec


# --- model parameters ---------------------------------------------------------


@dataclass
class LinearDualEncoder:
    w_query: np.ndarray     # (feature_dim, embed_dim)
    w_sentence: np.ndarray  # (feature_dim, embed_dim)
    seed: int

    def __post_init__(self):
        self.w_query = np.asarray(self.w_query, dtype=np.float64)
        self.w_sentence = np.asarray(self.w_sentence, dtype=np.float64)
        if self.w_query.shape != self.w_sentence.shape:
            raise ValueError("query and sentence weight shapes differ")
        if not (np.isfinite(self.w_query).all() and np.isfinite(self.w_sentence).all()):
            raise ValueError("non-finite encoder weights")

    @property
    def feature_dim(self) -> int:
        return self.w_query.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.w_query.shape[1]

    @classmethod
    def random(cls, feature_dim: int = 4096, embed_dim: int = 64,
               seed: int = 0, scale: float = 0.1) -> "LinearDualEncoder":
        rng = np.random.default_rng(seed)
        return cls(
            w_query=rng.normal(0.0, scale, (feature_dim, embed_dim)),
            w_sentence=rng.normal(0.0, scale, (feature_dim, embed_dim)),
            seed=seed,
        )


def encode(encoder: LinearDualEncoder, side: str, text: str) -> np.ndarray:
    """Embed one text with the requested side's projection."""
    if side not in ("query", "sentence"):
        raise ValueError(f"side must be 'query' or 'sentence', got {side!r}")
    features = hashed_features(text, encoder.seed, encoder.feature_dim)
    weights = encoder.w_query if side == "query" else encoder.w_sentence
    return features @ weights


def encode_batch(encoder: LinearDualEncoder, side: str, texts) -> np.ndarray:
    return np.stack([encode(encoder, side, t) for t in texts]) if texts else \
        np.zeros((0, encoder.embed_dim))


@dataclass
class ClassificationHead:
    weights: np.ndarray  # (2 * embed_dim, 3)
    bias: np.ndarray     # (3,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[1] != 3 or self.bias.shape != (3,):
            raise ValueError("head must map 2d features to 3 logits")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValueError("non-finite head parameters")

    @classmethod
    def zeros(cls, embed_dim: int) -> "ClassificationHead":
        return cls(np.zeros((2 * embed_dim, 3)), np.zeros(3))

    @classmethod
    def random(cls, embed_dim: int, seed: int = 0, scale: float = 0.1) -> "ClassificationHead":
        rng = np.random.default_rng(seed)
        return cls(rng.normal(0.0, scale, (2 * embed_dim, 3)), rng.normal(0.0, scale, 3))


@dataclass
class MultiTaskWeights:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise ValueError("alpha and beta must lie in [0, 1]")
        if self.alpha == 0.0 and self.beta == 0.0:
            raise ValueError("alpha and beta cannot both be zero")


# --- losses -------------------------------------------------------------------


@dataclass
class ContrastiveBatch:
    queries: np.ndarray    # (N, d)
    positives: np.ndarray  # (N, d)
    negatives: np.ndarray  # (N, n, d); n may be 0
    tau: float = 1.0

    def __post_init__(self):
        self.queries = np.asarray(self.queries, dtype=np.float64)
        self.positives = np.asarray(self.positives, dtype=np.float64)
        self.negatives = np.asarray(self.negatives, dtype=np.float64)
        n_ex = self.queries.shape[0]
        if n_ex < 1:
            raise ValueError("batch must hold at least one example")
        if self.positives.shape != self.queries.shape:
            raise DimensionError("positives shape must match queries")
        if self.negatives.ndim != 3 or self.negatives.shape[0] != n_ex \
                or self.negatives.shape[2] != self.queries.shape[1]:
            raise DimensionError("negatives must be (N, n, d)")
        if self.tau <= 0.0:
            raise ValueError(f"temperature must be positive, got {self.tau}")

    @property
    def size(self) -> int:
        return self.queries.shape[0]

    @property
    def num_negatives(self) -> int:
        return self.negatives.shape[1]


@dataclass
class ContrastiveGrads:
    queries: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray


def contrastive_loss(batch: ContrastiveBatch, in_batch: bool = True
                     ) -> tuple[float, ContrastiveGrads]:
    """Mean contrastive loss and exact gradients w.r.t. every embedding.

    Each example's softmax denominator runs over every in-batch positive and
    every in-batch negative (n terms per example); with ``in_batch=False`` it
    is restricted to the example's own positive and negatives.
    """
    n_ex, n_neg = batch.size, batch.num_negatives
    tau = batch.tau
    s_pos = (batch.queries @ batch.positives.T) / tau             # (N, N)
    s_neg = np.einsum("id,jmd->ijm", batch.queries,
                      batch.negatives) / tau                      # (N, N, n)

    if in_batch:
        mask = np.ones((n_ex, n_ex), dtype=bool)
    else:
        mask = np.eye(n_ex, dtype=bool)
    s_pos_m = np.where(mask, s_pos, -np.inf)
    s_neg_m = np.where(mask[:, :, None], s_neg, -np.inf)

    logits = np.concatenate([s_pos_m, s_neg_m.reshape(n_ex, n_ex * n_neg)], axis=1)
    lse = logsumexp(logits, axis=1)                               # (N,)
    loss = float(np.mean(-np.diagonal(s_pos) + lse))

    probs = np.exp(logits - lse[:, None])
    p_pos = probs[:, :n_ex]
    p_neg = probs[:, n_ex:].reshape(n_ex, n_ex, n_neg)

    coeff = (p_pos - np.eye(n_ex)) / (n_ex * tau)
    grad_q = coeff @ batch.positives
    if n_neg:
        grad_q = grad_q + np.einsum("ijm,jmd->id", p_neg, batch.negatives) / (n_ex * tau)
    grad_p = coeff.T @ batch.queries
    grad_n = np.einsum("ijm,id->jmd", p_neg, batch.queries) / (n_ex * tau)
    return loss, ContrastiveGrads(grad_q, grad_p, grad_n)


def classification_probs(head: ClassificationHead, h: np.ndarray,
                         h_pos: np.ndarray) -> np.ndarray:
    """P(label | query embedding, positive embedding): softmax over 3 classes."""
    h = np.asarray(h, dtype=np.float64).reshape(-1)
    h_pos = np.asarray(h_pos, dtype=np.float64).reshape(-1)
    pair = np.concatenate([h, h_pos])
    if pair.shape[0] != head.weights.shape[0]:
        raise DimensionError(
            f"pair dim {pair.shape[0]} != head input dim {head.weights.shape[0]}")
    z = pair @ head.weights + head.bias
    z = z - z.max()
    p = np.exp(z)
    return p / p.sum()


def nli_loss(probs: np.ndarray, gold: int) -> float:
    """Cross entropy against the gold label index, floored at 1e-30."""
    probs = np.asarray(probs, dtype=np.float64)
    if gold not in (0, 1, 2):
        raise ValueError(f"gold label index must be 0, 1 or 2, got {gold}")
    p = float(probs[gold])
    if p < NLI_PROB_FLOOR:
        logger.warning("gold-class probability %.3g floored at %.0e", p, NLI_PROB_FLOOR)
        p = NLI_PROB_FLOOR
    return -math.log(p)


def joint_loss(alpha: float, beta: float, cl: float, nli: float) -> float:
    MultiTaskWeights(alpha, beta)
    return alpha * cl + beta * nli


# --- full-batch training --------------------------------------------------------


@dataclass
class TrainExample:
    query: str
    positive: str
    negatives: list[str] = field(default_factory=list)
    label: int | None = None


def load_training_file(path: str | Path) -> list[TrainExample]:
    """Read contrastive or multitask JSONL records."""
    examples: list[TrainExample] = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for raw in handle:
            if not raw.strip():
                continue
            rec = json.loads(raw)
            label = rec.get("label")
            if label is not None and not isinstance(label, int):
                label = LABEL_TO_INDEX.get(label)
                if label is None:
                    raise DataError(f"unknown training label {rec.get('label')!r}")
            examples.append(TrainExample(
                query=rec["query"],
                positive=rec["positive"],
                negatives=list(rec.get("negatives", [])),
                label=label,
            ))
    return examples


@dataclass
class ObjectiveGrads:
    loss: float
    cl: float
    nli: float | None
    w_query: np.ndarray
    w_sentence: np.ndarray
    head_weights: np.ndarray
    head_bias: np.ndarray


def objective_grads(encoder: LinearDualEncoder, head: ClassificationHead,
                    minibatch: list[TrainExample], objective: str,
                    alpha: float = 1.0, beta: float = 0.0, tau: float = 1.0,
                    in_batch: bool = True) -> ObjectiveGrads:
    """Loss and analytic gradients of the selected objective w.r.t. all parameters.

    The negative tensor is rectangular: ragged per-example negative lists are
    truncated to the batch minimum.
    """
    if not minibatch:
        raise ValueError("minibatch must be non-empty")
    if objective not in (CONTRASTIVE, MULTITASK):
        raise ValueError(f"unknown objective {objective!r}")
    n_ex = len(minibatch)
    n_neg = min(len(ex.negatives) for ex in minibatch)

    feats = lambda text: hashed_features(text, encoder.seed, encoder.feature_dim)
    x_q = np.stack([feats(ex.query) for ex in minibatch])
    x_p = np.stack([feats(ex.positive) for ex in minibatch])
    x_n = np.stack([
        np.stack([feats(t) for t in ex.negatives[:n_neg]]) if n_neg else
        np.zeros((0, encoder.feature_dim))
        for ex in minibatch
    ])

    q = x_q @ encoder.w_query
    p = x_p @ encoder.w_sentence
    neg = np.einsum("inf,fd->ind", x_n, encoder.w_sentence)

    cl, cgrads = contrastive_loss(ContrastiveBatch(q, p, neg, tau), in_batch)
    grad_q, grad_p, grad_n = cgrads.queries, cgrads.positives, cgrads.negatives
    head_w_grad = np.zeros_like(head.weights)
    head_b_grad = np.zeros_like(head.bias)
    nli = None

    if objective == MULTITASK:
        MultiTaskWeights(alpha, beta)
        labels = [ex.label for ex in minibatch]
        if any(lab is None for lab in labels):
            raise DataError("multitask objective needs a label on every example")
        pair = np.concatenate([q, p], axis=1)                  # (N, 2d)
        z = pair @ head.weights + head.bias
        z = z - z.max(axis=1, keepdims=True)
        probs = np.exp(z)
        probs /= probs.sum(axis=1, keepdims=True)
        gold = np.array(labels)
        picked = np.maximum(probs[np.arange(n_ex), gold], NLI_PROB_FLOOR)
        nli = float(np.mean(-np.log(picked)))

        dz = probs.copy()
        dz[np.arange(n_ex), gold] -= 1.0
        dz /= n_ex
        d = encoder.embed_dim
        grad_q = alpha * grad_q + beta * (dz @ head.weights[:d].T)
        grad_p = alpha * grad_p + beta * (dz @ head.weights[d:].T)
        grad_n = alpha * grad_n
        head_w_grad = beta * (pair.T @ dz)
        head_b_grad = beta * dz.sum(axis=0)
        loss = alpha * cl + beta * nli
    else:
        loss = cl

    wq_grad = x_q.T @ grad_q
    ws_grad = x_p.T @ grad_p
    if n_neg:
        ws_grad = ws_grad + x_n.reshape(n_ex * n_neg, -1).T @ grad_n.reshape(n_ex * n_neg, -1)
    return ObjectiveGrads(loss, cl, nli, wq_grad, ws_grad, head_w_grad, head_b_grad)


def train_step(encoder: LinearDualEncoder, head: ClassificationHead,
               minibatch: list[TrainExample], objective: str,
               alpha: float = 1.0, beta: float = 0.0,
               learning_rate: float = 0.1, tau: float = 1.0,
               in_batch: bool = True
               ) -> tuple[LinearDualEncoder, ClassificationHead, float]:
    """One full-batch gradient-descent update; returns new parameters and loss."""
    grads = objective_grads(encoder, head, minibatch, objective, alpha, beta,
                            tau, in_batch)
    if not math.isfinite(grads.loss):
        raise DataError(
            f"non-finite loss {grads.loss} (objective={objective}, "
            f"batch={len(minibatch)}, tau={tau}, alpha={alpha}, beta={beta})")
    new_encoder = LinearDualEncoder(
        encoder.w_query - learning_rate * grads.w_query,
        encoder.w_sentence - learning_rate * grads.w_sentence,
        encoder.seed,
    )
    new_head = ClassificationHead(
        head.weights - learning_rate * grads.head_weights,
        head.bias - learning_rate * grads.head_bias,
    )
    return new_encoder, new_head, grads.loss


# --- mixed-objective scheduling --------------------------------------------------


@dataclass
class ScheduleEntry:
    tag: str
    objective: str
    epochs: int

    def __post_init__(self):
        if self.objective not in (CONTRASTIVE, MULTITASK):
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.epochs < 1:
            raise ValueError("epochs per cycle must be >= 1")


@dataclass
class MixedObjectiveSchedule:
    entries: list[ScheduleEntry]
    cycles: int

    def __post_init__(self):
        if not self.entries:
            raise ValueError("schedule must have at least one entry")
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")


@dataclass(frozen=True)
class EpochSlot:
    cycle: int
    tag: str
    objective: str


def build_schedule(spec: MixedObjectiveSchedule) -> list[EpochSlot]:
    """Expand the schedule: per cycle, entries in order, each repeated its epochs."""
    slots: list[EpochSlot] = []
    for cycle in range(spec.cycles):
        for entry in spec.entries:
            slots.extend(EpochSlot(cycle, entry.tag, entry.objective)
                         for _ in range(entry.epochs))
    return slots


def run_schedule(encoder: LinearDualEncoder, head: ClassificationHead,
                 datasets: dict[str, list[TrainExample]],
                 spec: MixedObjectiveSchedule, *,
                 alpha: float = 1.0, beta: float = 0.0,
                 learning_rate: float = 0.1, tau: float = 1.0
                 ) -> tuple[LinearDualEncoder, ClassificationHead, list[dict]]:
    """Run every epoch slot (one full-batch step each) over its tagged dataset."""
    history: list[dict] = []
    for slot in build_schedule(spec):
        if slot.tag not in datasets:
            raise DataError(f"schedule references unknown dataset tag {slot.tag!r}")
        encoder, head, loss = train_step(
            encoder, head, datasets[slot.tag], slot.objective,
            alpha=alpha, beta=beta, learning_rate=learning_rate, tau=tau)
        history.append({"cycle": slot.cycle, "tag": slot.tag,
                        "objective": slot.objective, "loss": loss})
    return encoder, head, history


# --- encoder persistence ----------------------------------------------------------


def save_encoder(encoder: LinearDualEncoder, path: str | Path) -> None:
    with Path(path).open("wb") as out:
        out.write(_MAGIC)
        out.write(struct.pack("<IIIQ", _VERSION, encoder.feature_dim,
                              encoder.embed_dim, encoder.seed))
        out.write(np.ascontiguousarray(encoder.w_query, dtype="<f8").tobytes())
        out.write(np.ascontiguousarray(encoder.w_sentence, dtype="<f8").tobytes())


def load_encoder(path: str | Path) -> LinearDualEncoder:
    with Path(path).open("rb") as inp:
        if inp.read(4) != _MAGIC:
            raise FormatError(f"{path}: not an encoder weights file (bad magic)")
        header = inp.read(20)
        if len(header) != 20:
            raise FormatError(f"{path}: truncated header")
        version, feature_dim, embed_dim, seed = struct.unpack("<IIIQ", header)
        if version != _VERSION:
            raise FormatError(f"{path}: unsupported weights version {version}")
        expected = feature_dim * embed_dim * 8
        blobs = [inp.read(expected), inp.read(expected)]
        if any(len(b) != expected for b in blobs) or inp.read(1):
            raise FormatError(f"{path}: truncated or oversized weight block")
    shape = (feature_dim, embed_dim)
    return LinearDualEncoder(
        np.frombuffer(blobs[0], dtype="<f8").reshape(shape).copy(),
        np.frombuffer(blobs[1], dtype="<f8").reshape(shape).copy(),
        seed,
    )
