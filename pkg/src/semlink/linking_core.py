"""Desk-scale entity-linking scorer: bilinear scores, inference, training.

Score functions, all with diagonal parameter matrices stored as length-d
vectors:

* local:     psi(e, c)    = sum_j e[j] * B[j] * f(c)[j]
* pairwise:  phi(ei, ej)  = (1 / (n - 1)) * sum_j ei[j] * C[j] * ej[j]
* relation:  phi_K(ei,ej) = sum_k w_k * sum_j ei[j] * Rk[j] * ej[j]

``n`` is the number of mentions in the document.  The document score sums
local scores plus pairwise scores over unordered mention pairs.  Inference is
exhaustive argmax (with a capacity guard) or per-mention greedy on the local
score.  Training runs SGD on a max-margin ranking loss over the non-gold
candidates of each mention; it is piecewise linear in the diagonals, so the
analytic subgradient is exact away from hinge kinks.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .embed_io import EmbeddingTable
from .errors import (
    CapacityError,
    DimensionError,
    EmptyTrainingError,
    FormatError,
    InvalidDocumentError,
    RelationArityError,
)

EXHAUSTIVE_CAPACITY = 10**6


@dataclass
class Mention:
    """A text span with its context window, candidate set, and optional gold."""

    surface: str
    context: list[str] = field(default_factory=list)
    candidates: list[str] = field(default_factory=list)
    gold: Optional[str] = None

    def gold_in_candidates(self) -> bool:
        return self.gold is not None and self.gold in self.candidates


@dataclass
class LinkingDocument:
    doc_id: str
    mentions: list[Mention]

    def __post_init__(self):
        if not self.mentions:
            raise InvalidDocumentError(f"document {self.doc_id!r} has no mentions")

    def gold_violations(self) -> list[int]:
        """Indices of mentions whose gold is set but not among candidates."""
        return [
            i
            for i, m in enumerate(self.mentions)
            if m.gold is not None and m.gold not in m.candidates
        ]


@dataclass
class LinkingModel:
    """Diagonal bilinear scorer parameters."""

    dim: int
    B: np.ndarray
    C: np.ndarray
    relations: list[np.ndarray] = field(default_factory=list)
    relation_weighting: str = "uniform"  # or "softmax"

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=np.float64)
        self.C = np.asarray(self.C, dtype=np.float64)
        self.relations = [np.asarray(r, dtype=np.float64) for r in self.relations]
        for name, diag in [("B", self.B), ("C", self.C)] + [
            (f"R{k}", r) for k, r in enumerate(self.relations, 1)
        ]:
            if diag.shape != (self.dim,):
                raise DimensionError(f"{name} has shape {diag.shape}, expected ({self.dim},)")
            if not np.isfinite(diag).all():
                raise ValueError(f"{name} contains non-finite values")
        if self.relation_weighting not in ("uniform", "softmax"):
            raise ValueError(f"unknown relation weighting {self.relation_weighting!r}")

    @property
    def K(self) -> int:
        return len(self.relations)

    @classmethod
    def identity(cls, dim: int, n_relations: int = 0) -> "LinkingModel":
        return cls(
            dim=dim,
            B=np.ones(dim),
            C=np.ones(dim),
            relations=[np.ones(dim) for _ in range(n_relations)],
        )

    def copy(self) -> "LinkingModel":
        return LinkingModel(
            self.dim, self.B.copy(), self.C.copy(),
            [r.copy() for r in self.relations], self.relation_weighting,
        )

    def save(self, path) -> None:
        """Header '<dim> <K>' then B, C, and each relation diagonal as text."""
        lines = [f"{self.dim} {self.K}"]
        for diag in [self.B, self.C, *self.relations]:
            lines.append(" ".join(format(v, ".17g") for v in diag))
        lines.append(self.relation_weighting)
        Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")

    @classmethod
    def load(cls, path) -> "LinkingModel":
        lines = Path(path).read_text(encoding="ascii").splitlines()
        if not lines:
            raise FormatError("empty model file", path=path)
        head = lines[0].split()
        if len(head) != 2 or not all(p.lstrip("-").isdigit() for p in head):
            raise FormatError(f"malformed model header {lines[0]!r}", path=path)
        dim, K = int(head[0]), int(head[1])
        need = 1 + 2 + K
        if len(lines) < need:
            raise FormatError(f"expected {need} lines, found {len(lines)}", path=path)
        diags = []
        for line_no in range(1, need):
            values = [float(v) for v in lines[line_no].split()]
            if len(values) != dim:
                raise FormatError(
                    f"diagonal has {len(values)} values, expected {dim}",
                    path=path, line=line_no + 1,
                )
            diags.append(np.asarray(values))
        weighting = lines[need].strip() if len(lines) > need and lines[need].strip() else "uniform"
        return cls(dim, diags[0], diags[1], diags[2:], weighting)


@dataclass
class ContextFeature:
    """Mean word vector of the context window; zero when fully OOV."""

    vector: np.ndarray
    oov_count: int = 0


def context_feature(mention: Mention, words: EmbeddingTable) -> ContextFeature:
    """Average the embeddings of in-vocabulary window tokens."""
    acc = np.zeros(words.dim, dtype=np.float64)
    found = 0
    for token in mention.context:
        ref = words.lookup(token)
        if ref is None:
            continue
        acc += ref.values.astype(np.float64)
        found += 1
    vec = acc / found if found else acc
    return ContextFeature(vec, oov_count=len(mention.context) - found)


def _feature_vector(f) -> np.ndarray:
    if isinstance(f, ContextFeature):
        return f.vector
    return np.asarray(f, dtype=np.float64)


def local_score(entity_vec, B, f) -> float:
    """sum_j e[j] * B[j] * f[j]."""
    e = np.asarray(entity_vec, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    fv = _feature_vector(f)
    if not (e.shape == B.shape == fv.shape):
        raise DimensionError(f"shape mismatch: e{e.shape} B{B.shape} f{fv.shape}")
    return float(np.dot(e * B, fv))


def pairwise_score(e_i, e_j, C, n: int) -> float:
    """(1 / (n - 1)) * sum_j ei[j] * C[j] * ej[j]; symmetric in ei, ej."""
    if n < 2:
        raise InvalidDocumentError(f"pairwise score needs n >= 2 mentions, got {n}")
    e_i = np.asarray(e_i, dtype=np.float64)
    e_j = np.asarray(e_j, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if not (e_i.shape == e_j.shape == C.shape):
        raise DimensionError(f"shape mismatch: ei{e_i.shape} ej{e_j.shape} C{C.shape}")
    # multiply the entity vectors first so the expression is exactly symmetric
    return float(np.dot(e_i * e_j, C) / (n - 1))


def relation_weights(model: LinkingModel, e_i, e_j) -> np.ndarray:
    """Per-relation weights: uniform 1/K, or softmax over the bilinear forms."""
    if model.K < 1:
        raise RelationArityError("model has no relations")
    if model.relation_weighting == "uniform":
        return np.full(model.K, 1.0 / model.K)
    prod = np.asarray(e_i, dtype=np.float64) * np.asarray(e_j, dtype=np.float64)
    scores = np.array([float(np.dot(prod, r)) for r in model.relations])
    scores -= scores.max()
    w = np.exp(scores)
    return w / w.sum()


def relation_pairwise_score(e_i, e_j, model: LinkingModel, weights) -> float:
    """sum_k w_k * sum_j ei[j] * Rk[j] * ej[j]."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (model.K,):
        raise RelationArityError(
            f"got {weights.size} weights for {model.K} relations"
        )
    e_i = np.asarray(e_i, dtype=np.float64)
    e_j = np.asarray(e_j, dtype=np.float64)
    if e_i.shape != e_j.shape or e_i.shape != (model.dim,):
        raise DimensionError(f"shape mismatch: ei{e_i.shape} ej{e_j.shape} dim {model.dim}")
    prod = e_i * e_j
    total = 0.0
    for w, r in zip(weights, model.relations):
        total += float(w) * float(np.dot(prod, r))
    return total


def _entity_vector(entities: EmbeddingTable, label: str) -> np.ndarray:
    return entities.vector(label).astype(np.float64)


def _context_features(doc: LinkingDocument, words: EmbeddingTable) -> list[ContextFeature]:
    return [context_feature(m, words) for m in doc.mentions]


def document_score(
    assignment: Sequence[str],
    doc: LinkingDocument,
    model: LinkingModel,
    entities: EmbeddingTable,
    words: EmbeddingTable,
    features: Optional[list[ContextFeature]] = None,
    pairwise: str = "diagonal",
) -> float:
    """Sum of local scores plus pairwise scores over unordered mention pairs."""
    n = len(doc.mentions)
    if len(assignment) != n:
        raise InvalidDocumentError(
            f"assignment length {len(assignment)} != {n} mentions"
        )
    feats = features or _context_features(doc, words)
    vecs = [_entity_vector(entities, label) for label in assignment]
    total = 0.0
    for vec, feat in zip(vecs, feats):
        total += local_score(vec, model.B, feat)
    for i, j in itertools.combinations(range(n), 2):
        if pairwise == "diagonal":
            total += pairwise_score(vecs[i], vecs[j], model.C, n)
        elif pairwise == "relations":
            w = relation_weights(model, vecs[i], vecs[j])
            total += relation_pairwise_score(vecs[i], vecs[j], model, w)
        else:
            raise ValueError(f"unknown pairwise mode {pairwise!r}")
    return total


def _check_candidates(doc: LinkingDocument) -> None:
    for i, m in enumerate(doc.mentions):
        if not m.candidates:
            raise InvalidDocumentError(
                f"mention {i} ({m.surface!r}) of {doc.doc_id!r} has no candidates"
            )


def _greedy_local(doc, model, entities, feats) -> list[str]:
    out = []
    for mention, feat in zip(doc.mentions, feats):
        best_label, best_score = None, None
        for label in sorted(mention.candidates):
            s = local_score(_entity_vector(entities, label), model.B, feat)
            if best_score is None or s > best_score:
                best_label, best_score = label, s
        out.append(best_label)
    return out


def infer(
    doc: LinkingDocument,
    model: LinkingModel,
    entities: EmbeddingTable,
    words: EmbeddingTable,
    strategy: str = "exhaustive",
    pairwise: str = "diagonal",
) -> list[str]:
    """Pick one candidate per mention.

    ``exhaustive`` maximizes the document score over the full candidate
    product (ties resolve to the lexicographically smallest label tuple);
    ``greedy-local`` takes the per-mention local-score argmax and ignores
    coherence entirely.
    """
    _check_candidates(doc)
    feats = _context_features(doc, words)

    if strategy == "greedy-local":
        return _greedy_local(doc, model, entities, feats)
    if strategy != "exhaustive":
        raise ValueError(f"unknown strategy {strategy!r}")

    product = 1
    for m in doc.mentions:
        product *= len(m.candidates)
        if product > EXHAUSTIVE_CAPACITY:
            raise CapacityError(
                f"candidate product exceeds {EXHAUSTIVE_CAPACITY}; "
                "use strategy='greedy-local'"
            )

    n = len(doc.mentions)
    cands = [sorted(m.candidates) for m in doc.mentions]
    vecs = [[_entity_vector(entities, c) for c in cs] for cs in cands]
    local = [
        [local_score(v, model.B, feat) for v in vs] for vs, feat in zip(vecs, feats)
    ]
    pair: dict[tuple[int, int], np.ndarray] = {}
    for i, j in itertools.combinations(range(n), 2):
        block = np.empty((len(cands[i]), len(cands[j])))
        for a, vi in enumerate(vecs[i]):
            for b, vj in enumerate(vecs[j]):
                if pairwise == "diagonal":
                    block[a, b] = pairwise_score(vi, vj, model.C, n)
                elif pairwise == "relations":
                    w = relation_weights(model, vi, vj)
                    block[a, b] = relation_pairwise_score(vi, vj, model, w)
                else:
                    raise ValueError(f"unknown pairwise mode {pairwise!r}")
        pair[(i, j)] = block

    best_choice, best_score = None, None
    for choice in itertools.product(*(range(len(cs)) for cs in cands)):
        score = 0.0
        for i in range(n):
            score += local[i][choice[i]]
        for i, j in itertools.combinations(range(n), 2):
            score += pair[(i, j)][choice[i], choice[j]]
        # strict improvement keeps the lexicographically smallest tie
        if best_score is None or score > best_score:
            best_choice, best_score = choice, score
    return [cands[i][best_choice[i]] for i in range(n)]


@dataclass
class TrainConfig:
    margin: float = 1.0
    lr: float = 0.01
    epochs: int = 20
    seed: int = 0
    train_pairwise: bool = False
    shuffle: bool = True
    eval_strategy: str = "greedy-local"


@dataclass
class TrainResult:
    model: LinkingModel
    loss_trace: list[float]        # full-batch loss after each epoch
    dev_f1_trace: list[float]      # dev micro-F1 after each epoch (if dev given)
    initial_loss: float
    initial_dev_f1: Optional[float]
    skipped_mentions: int


@dataclass
class _Instance:
    feature: np.ndarray
    gold_vec: np.ndarray
    neg_vecs: list[np.ndarray]
    pair_context: np.ndarray  # sum of other golds / (n - 1), teacher-forced


def _build_instances(
    docs: Iterable[LinkingDocument],
    entities: EmbeddingTable,
    words: EmbeddingTable,
    train_pairwise: bool,
) -> tuple[list[_Instance], int]:
    instances: list[_Instance] = []
    skipped = 0
    for doc in docs:
        n = len(doc.mentions)
        feats = _context_features(doc, words)
        gold_vecs: list[Optional[np.ndarray]] = []
        for m in doc.mentions:
            gold_vecs.append(
                _entity_vector(entities, m.gold) if m.gold_in_candidates() else None
            )
        for i, (m, feat) in enumerate(zip(doc.mentions, feats)):
            if gold_vecs[i] is None:
                skipped += 1
                continue
            negs = [
                _entity_vector(entities, c) for c in sorted(m.candidates) if c != m.gold
            ]
            if train_pairwise and n >= 2:
                others = [g for j, g in enumerate(gold_vecs) if j != i and g is not None]
                pair_ctx = (
                    np.sum(others, axis=0) / (n - 1)
                    if others
                    else np.zeros(entities.dim)
                )
            else:
                pair_ctx = np.zeros(entities.dim)
            instances.append(_Instance(feat.vector, gold_vecs[i], negs, pair_ctx))
    return instances, skipped


def _instance_score(inst: _Instance, e: np.ndarray, B, C, train_pairwise: bool) -> float:
    s = float(np.dot(e * B, inst.feature))
    if train_pairwise:
        s += float(np.dot(e * C, inst.pair_context))
    return s


def margin_loss_and_gradient(
    instances: list[_Instance],
    B: np.ndarray,
    C: np.ndarray,
    margin: float,
    train_pairwise: bool = False,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Full-batch hinge loss and its subgradient w.r.t. the B and C diagonals."""
    loss = 0.0
    gB = np.zeros_like(B)
    gC = np.zeros_like(C)
    for inst in instances:
        s_gold = _instance_score(inst, inst.gold_vec, B, C, train_pairwise)
        for neg in inst.neg_vecs:
            s_neg = _instance_score(inst, neg, B, C, train_pairwise)
            violation = margin - s_gold + s_neg
            if violation > 0.0:
                loss += violation
                gB += inst.feature * (neg - inst.gold_vec)
                if train_pairwise:
                    gC += inst.pair_context * (neg - inst.gold_vec)
    return loss, gB, gC


def training_loss(
    docs,
    entities: EmbeddingTable,
    words: EmbeddingTable,
    model: LinkingModel,
    margin: float,
    train_pairwise: bool = False,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Convenience wrapper building instances and delegating to the batch loss."""
    instances, _ = _build_instances(docs, entities, words, train_pairwise)
    return margin_loss_and_gradient(instances, model.B, model.C, margin, train_pairwise)


def _dev_f1(dev_docs, model, entities, words, strategy) -> float:
    """Micro-F1 of inference on mentions with usable gold (full coverage
    makes it plain accuracy)."""
    correct = 0
    total = 0
    for doc in dev_docs:
        predicted = infer(doc, model, entities, words, strategy=strategy)
        for m, p in zip(doc.mentions, predicted):
            if not m.gold_in_candidates():
                continue
            total += 1
            if p == m.gold:
                correct += 1
    return correct / total if total else 0.0


def train(
    train_docs: Sequence[LinkingDocument],
    entities: EmbeddingTable,
    words: EmbeddingTable,
    config: TrainConfig,
    dev_docs: Optional[Sequence[LinkingDocument]] = None,
) -> TrainResult:
    """SGD on the per-mention margin loss against all non-gold candidates.

    Deterministic for a given seed.  The loss trace holds the full-batch
    loss evaluated after each epoch; the dev trace holds dev micro-F1 at the
    same points when dev documents are supplied.
    """
    instances, skipped = _build_instances(
        train_docs, entities, words, config.train_pairwise
    )
    if not instances:
        raise EmptyTrainingError("no training mention has gold among its candidates")

    model = LinkingModel.identity(entities.dim)
    rng = np.random.default_rng(config.seed)

    initial_loss, _, _ = margin_loss_and_gradient(
        instances, model.B, model.C, config.margin, config.train_pairwise
    )
    initial_dev = (
        _dev_f1(dev_docs, model, entities, words, config.eval_strategy)
        if dev_docs is not None
        else None
    )

    loss_trace: list[float] = []
    dev_trace: list[float] = []
    for _epoch in range(config.epochs):
        order = rng.permutation(len(instances)) if config.shuffle else range(len(instances))
        for idx in order:
            inst = instances[idx]
            s_gold = _instance_score(inst, inst.gold_vec, model.B, model.C, config.train_pairwise)
            gB = np.zeros(model.dim)
            gC = np.zeros(model.dim)
            active = False
            for neg in inst.neg_vecs:
                s_neg = _instance_score(inst, neg, model.B, model.C, config.train_pairwise)
                if config.margin - s_gold + s_neg > 0.0:
                    active = True
                    gB += inst.feature * (neg - inst.gold_vec)
                    if config.train_pairwise:
                        gC += inst.pair_context * (neg - inst.gold_vec)
            if active:
                model.B -= config.lr * gB
                if config.train_pairwise:
                    model.C -= config.lr * gC
        epoch_loss, _, _ = margin_loss_and_gradient(
            instances, model.B, model.C, config.margin, config.train_pairwise
        )
        loss_trace.append(epoch_loss)
        if dev_docs is not None:
            dev_trace.append(_dev_f1(dev_docs, model, entities, words, config.eval_strategy))

    return TrainResult(model, loss_trace, dev_trace, initial_loss, initial_dev, skipped)


# ---------------------------------------------------------------------------
# Corpus I/O


def save_linking_jsonl(docs: Iterable[LinkingDocument], path) -> None:
    """One JSON document per line: doc_id plus mention records."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            record = {
                "doc_id": doc.doc_id,
                "mentions": [
                    {
                        "surface": m.surface,
                        "context": m.context,
                        "candidates": m.candidates,
                        "gold": m.gold,
                    }
                    for m in doc.mentions
                ],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_linking_jsonl(path) -> list[LinkingDocument]:
    docs: list[LinkingDocument] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                raise FormatError("invalid JSON", path=path, line=line_no) from None
            try:
                mentions = [
                    Mention(
                        surface=m["surface"],
                        context=list(m.get("context", [])),
                        candidates=[_strip_prior(c) for c in m["candidates"]],
                        gold=m.get("gold"),
                    )
                    for m in record["mentions"]
                ]
                docs.append(LinkingDocument(record["doc_id"], mentions))
            except KeyError as e:
                raise FormatError(f"missing field {e}", path=path, line=line_no) from None
    return docs


def _strip_prior(candidate) -> str:
    """Candidates may arrive as 'label:prior'; priors are ignored."""
    if isinstance(candidate, (list, tuple)):
        return str(candidate[0])
    text = str(candidate)
    if ":" in text:
        head, _, tail = text.rpartition(":")
        try:
            float(tail)
            return head
        except ValueError:
            return text
    return text


def load_aida_tsv(path, window: int = 25) -> list[LinkingDocument]:
    """Load a simplified CoNLL-style linking TSV.

    Lines are either ``-DOCSTART- (<doc_id>)``, a bare token, or a mention
    line ``<token>\\tB\\t<surface>\\t<gold>\\t<cand1,cand2,...>`` with ``I``
    lines continuing a mention.  Context windows take ``window`` tokens from
    each side of the mention, excluding the mention itself.  A gold of
    ``--NME--`` becomes None (out-of-KB).
    """
    docs: list[LinkingDocument] = []
    doc_id = None
    tokens: list[str] = []
    spans: list[tuple[int, int, str, Optional[str], list[str]]] = []

    def _flush():
        nonlocal tokens, spans
        if doc_id is None:
            return
        mentions = []
        for start, end, surface, gold, cands in spans:
            left = tokens[max(0, start - window) : start]
            right = tokens[end : end + window]
            mentions.append(
                Mention(surface=surface, context=left + right, candidates=cands, gold=gold)
            )
        if mentions:
            docs.append(LinkingDocument(doc_id, mentions))
        tokens, spans = [], []

    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("-DOCSTART-"):
                _flush()
                doc_id = line[len("-DOCSTART-") :].strip().strip("()") or f"doc{len(docs)}"
                continue
            if doc_id is None:
                raise FormatError("token line before any -DOCSTART-", path=path, line=line_no)
            parts = line.split("\t")
            token = parts[0].lower()
            if len(parts) == 1 or parts[1] == "I":
                tokens.append(token)
                if len(parts) > 1 and spans and spans[-1][1] == len(tokens) - 1:
                    span = spans[-1]
                    spans[-1] = (span[0], len(tokens), span[2], span[3], span[4])
                continue
            if parts[1] != "B" or len(parts) < 5:
                raise FormatError(
                    "expected '<token>\\tB\\t<surface>\\t<gold>\\t<cands>'",
                    path=path, line=line_no,
                )
            tokens.append(token)
            gold = parts[3] if parts[3] != "--NME--" else None
            cands = [_strip_prior(c) for c in parts[4].split(",") if c]
            spans.append((len(tokens) - 1, len(tokens), parts[2], gold, cands))
    _flush()
    return docs
