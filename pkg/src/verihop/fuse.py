"""Fusion of single-hop and multi-hop evidence into one ranked list.

The hybrid ranker: multi-hop paths are scored by the product of their step
scores, paths under the ``mth`` threshold are dropped, each member sentence
keeps the best product among its admitted paths, both score maps are
min-max normalized, sentences missing from a map are filled with that map's
minimum, and the final score is ``single + gamma * multi``.

Normalization is min-max onto [0, 1]; a degenerate map (all values equal,
or a single entry) maps everything to 1.0 so a lone strong signal is not
zeroed, and the min-fill of an empty map is 0.0.

Two baseline merges are included for ablations: threshold (admit paths over
a cutoff, pool raw scores) and scale (rescale path scores by a factor, pool
raw scores). All functions are pure and generic over hashable sentence ids;
ties always break by ascending id string.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

from .corpus import address_key

ScoreMap = Mapping[Hashable, float]
Path_ = Sequence[tuple[Hashable, float]]


@dataclass
class HybridParams:
    mth: float = 0.5
    gamma: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.mth <= 1.0:
            raise ValueError(f"mth must be in (0, 1], got {self.mth}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")


def sequence_score(seq: Path_) -> float:
    """Product of the per-step scores along a retrieval path."""
    return math.prod(score for _, score in seq)


def normalize_scores(scores: ScoreMap) -> dict[Hashable, float]:
    """Min-max normalize onto [0, 1]; degenerate maps go to all-1.0."""
    if not scores:
        return {}
    low, high = min(scores.values()), max(scores.values())
    if low == high:
        return {key: 1.0 for key in scores}
    span = high - low
    return {key: (value - low) / span for key, value in scores.items()}


def _ranked(scores: Mapping[Hashable, float]) -> list[tuple[Hashable, float]]:
    return sorted(scores.items(), key=lambda kv: (-kv[1], address_key(kv[0])))


def _best_path_scores(sequences: Iterable[Path_], min_score: float
                      ) -> dict[Hashable, float]:
    best: dict[Hashable, float] = {}
    for seq in sequences:
        score = sequence_score(seq)
        if score < min_score:
            continue
        for key, _ in seq:
            if key not in best or score > best[key]:
                best[key] = score
    return best


def hybrid_rank(single: ScoreMap, sequences: Iterable[Path_],
                params: HybridParams) -> list[tuple[Hashable, float]]:
    """Fused ranking of single-hop scores and multi-hop path scores."""
    multi = _best_path_scores(sequences, params.mth)
    norm_single = normalize_scores(single)
    norm_multi = normalize_scores(multi)
    fill_single = min(norm_single.values()) if norm_single else 0.0
    fill_multi = min(norm_multi.values()) if norm_multi else 0.0
    hybrid = {
        key: norm_single.get(key, fill_single) + params.gamma * norm_multi.get(key, fill_multi)
        for key in set(norm_single) | set(norm_multi)
    }
    return _ranked(hybrid)


def threshold_merge(single: ScoreMap, sequences: Iterable[Path_],
                    threshold: float) -> list[tuple[Hashable, float]]:
    """Pool members of paths scoring >= threshold with the raw single map."""
    pooled = dict(single)
    for key, score in _best_path_scores(sequences, threshold).items():
        pooled[key] = max(pooled.get(key, -math.inf), score)
    return _ranked(pooled)


def scale_merge(single: ScoreMap, sequences: Iterable[Path_],
                factor: float) -> list[tuple[Hashable, float]]:
    """Pool members of all paths, path scores rescaled by ``factor``."""
    pooled = dict(single)
    for key, score in _best_path_scores(sequences, -math.inf).items():
        pooled[key] = max(pooled.get(key, -math.inf), factor * score)
    return _ranked(pooled)
