"""Semantic entity embeddings and their linear aggregation with base vectors.

The semantic embedding of an entity is the arithmetic mean of the word
vectors of its first ``min(T, |types|)`` extracted type words; when an entity
has fewer type words than T, the divisor shrinks with it.  The reinforced
embedding is the weighted sum

    reinforced = (1 - alpha) * base + alpha * semantic

where ``alpha`` trades heterogeneity of the base vectors against homogeneity
of the type-driven ones.  Accumulation happens in float64 in extraction
order; table storage stays float32.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .embed_io import EmbeddingTable, VectorRef
from .errors import DimensionError, MissingLabelError, MissingWordVectorError
from .type_extraction import EntityTypeAssignment

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AggregationConfig:
    """T = max type words per entity; alpha = semantic weight in [0, 1]."""

    T: int = 11
    alpha: float = 0.2

    def __post_init__(self):
        if int(self.T) < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if not 0.0 <= float(self.alpha) <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


@dataclass
class SemanticEmbeddingResult:
    entity_id: str
    used_words: list[str]
    vector: np.ndarray
    coverage_flag: bool = False  # True when the entity had no type words

    def __post_init__(self):
        if not np.isfinite(self.vector).all():
            raise ValueError(f"non-finite semantic vector for {self.entity_id!r}")


def semantic_embedding(
    assignment: EntityTypeAssignment,
    words: EmbeddingTable,
    cfg: AggregationConfig,
) -> SemanticEmbeddingResult:
    """Mean of the first min(T, len(type_words)) word vectors, float64.

    Entities without type words get a zero vector and a raised coverage
    flag so callers can fall back to the base embedding.
    """
    used = list(assignment.type_words[: cfg.T])
    if not used:
        return SemanticEmbeddingResult(
            assignment.entity_id, [], np.zeros(words.dim, dtype=np.float64), coverage_flag=True
        )
    acc = np.zeros(words.dim, dtype=np.float64)
    for word in used:
        ref = words.lookup(word)
        if ref is None:
            raise MissingWordVectorError(
                f"no vector for type word {word!r} of entity {assignment.entity_id!r}"
            )
        acc += ref.values.astype(np.float64)
    return SemanticEmbeddingResult(assignment.entity_id, used, acc / len(used))


def _as_array(v) -> np.ndarray:
    if isinstance(v, VectorRef):
        v = v.values
    return np.asarray(v, dtype=np.float64)


def aggregate(wikitext, semantic, alpha: float) -> np.ndarray:
    """Componentwise (1 - alpha) * base + alpha * semantic, in float64."""
    if not 0.0 <= float(alpha) <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    base = _as_array(wikitext)
    sem = _as_array(semantic)
    if base.shape != sem.shape:
        raise DimensionError(f"dimension mismatch: {base.shape} vs {sem.shape}")
    return (1.0 - alpha) * base + alpha * sem


def aggregate_table(
    wikitext: EmbeddingTable,
    assignments: Mapping[str, EntityTypeAssignment],
    words: EmbeddingTable,
    cfg: AggregationConfig,
) -> EmbeddingTable:
    """Reinforce every covered entity; uncovered rows pass through bit-exact.

    Output labels and order are identical to the input table.  A coverage
    histogram (how many type words each entity contributed) is logged since
    the same alpha applies regardless of coverage.
    """
    if wikitext.dim != words.dim:
        raise DimensionError(
            f"entity table dim {wikitext.dim} != word table dim {words.dim}"
        )
    out = np.empty_like(wikitext.matrix)
    coverage: Counter = Counter()
    for i, label in enumerate(wikitext.labels):
        assignment = assignments.get(label)
        if assignment is None or not assignment.type_words:
            out[i] = wikitext.matrix[i]
            coverage[0] += 1
            continue
        sem = semantic_embedding(assignment, words, cfg)
        coverage[len(sem.used_words)] += 1
        out[i] = aggregate(wikitext.matrix[i], sem.vector, cfg.alpha).astype(np.float32)
    if coverage:
        log.info(
            "reinforced %d entities (T=%d, alpha=%g); coverage histogram %s",
            len(wikitext), cfg.T, cfg.alpha, dict(sorted(coverage.items())),
        )
    return EmbeddingTable(wikitext.dim, list(wikitext.labels), out)


def cosine(u, v) -> float:
    """Cosine similarity; zero vectors yield 0 by convention."""
    u = _as_array(u)
    v = _as_array(v)
    if u.shape != v.shape:
        raise DimensionError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def _cosines_to(table: EmbeddingTable, query_vec: np.ndarray) -> np.ndarray:
    m = table.matrix.astype(np.float64)
    norms = np.linalg.norm(m, axis=1)
    qn = np.linalg.norm(query_vec)
    if qn == 0.0:
        return np.zeros(len(table))
    safe = np.where(norms == 0.0, 1.0, norms)
    scores = (m @ query_vec) / (safe * qn)
    scores[norms == 0.0] = 0.0
    return scores


def neighbor_report(
    table: EmbeddingTable, query: str, k: int = 10
) -> list[tuple[str, float]]:
    """Top-k labels by cosine to the query row, ties lexicographic."""
    if query not in table:
        raise MissingLabelError(f"label {query!r} not in table")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores = _cosines_to(table, table.vector(query).astype(np.float64))
    order = sorted(
        (i for i, label in enumerate(table.labels) if label != query),
        key=lambda i: (-scores[i], table.labels[i]),
    )
    return [(table.labels[i], float(scores[i])) for i in order[:k]]


@dataclass
class HomogeneityStats:
    """Mean/std of cosine over sampled distinct entity pairs."""

    mean: float
    std: float
    pairs_sampled: int


def homogeneity_stats(
    table: EmbeddingTable, sample_pairs: int, seed: int = 0
) -> HomogeneityStats:
    """Deterministic pairwise-cosine summary; exhaustive when sample covers all."""
    n = len(table)
    if n < 2:
        raise ValueError("need at least 2 entries")
    if sample_pairs < 1:
        raise ValueError("sample_pairs must be >= 1")
    total = n * (n - 1) // 2

    m = table.matrix.astype(np.float64)
    norms = np.linalg.norm(m, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    unit = m / safe[:, None]
    unit[norms == 0.0] = 0.0

    if sample_pairs >= total:
        gram = unit @ unit.T
        iu = np.triu_indices(n, k=1)
        values = gram[iu]
    else:
        rng = np.random.default_rng(seed)
        seen: set[tuple[int, int]] = set()
        values_list = []
        while len(values_list) < sample_pairs:
            i, j = int(rng.integers(n)), int(rng.integers(n))
            if i == j:
                continue
            pair = (min(i, j), max(i, j))
            if pair in seen:
                continue
            seen.add(pair)
            values_list.append(float(np.dot(unit[pair[0]], unit[pair[1]])))
        values = np.asarray(values_list)
    return HomogeneityStats(float(values.mean()), float(values.std()), len(values))


def coverage_histogram(
    labels: Iterable[str], assignments: Mapping[str, EntityTypeAssignment], T: int
) -> dict[int, int]:
    """How many entities would contribute 0, 1, ..., T type words."""
    hist: Counter = Counter()
    for label in labels:
        assignment = assignments.get(label)
        hist[min(len(assignment.type_words), T) if assignment else 0] += 1
    return dict(sorted(hist.items()))
