"""Extract at most ``cap`` dictionary type words per entity from article text.

Scanning walks the first sentence, then the body, in token order.  At each
position the longest matching dictionary phrase wins (dictionary phrases are
underscore-joined; they match the corresponding token sequence in text).
Collected words are remapped, deduplicated on the remapped form keeping first
occurrence, and capped.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

from ._text import split_first_sentence, tokenize
from .errors import DuplicateEntityError, FormatError
from .type_dictionary import SemanticTypeDictionary, apply_remap


@dataclass
class ArticleRecord:
    """One plain-text article: id, title, first sentence, optional body."""

    entity_id: str
    title: str = ""
    first_sentence: str = ""
    body: str = ""

    def __post_init__(self):
        if not self.entity_id:
            raise FormatError("article with empty entity_id")

    @classmethod
    def from_text(cls, entity_id: str, title: str, text: str) -> "ArticleRecord":
        first, rest = split_first_sentence(text)
        return cls(entity_id=entity_id, title=title, first_sentence=first, body=rest)


@dataclass
class EntityTypeAssignment:
    """Ordered extracted type words for one entity, length <= cap."""

    entity_id: str
    type_words: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.type_words)


class PhraseMatcher:
    """Token trie over dictionary words for greedy longest-first matching."""

    _WORD = object()  # terminal marker key

    def __init__(self, dictionary: SemanticTypeDictionary):
        root: dict = {}
        for word in dictionary.words:
            node = root
            for token in word.split("_"):
                node = node.setdefault(token, {})
            node[PhraseMatcher._WORD] = word
        self._root = root
        self._dictionary = dictionary

    def match_at(self, tokens: list[str], i: int) -> Optional[tuple[str, int]]:
        """Longest dictionary word starting at tokens[i] -> (word, n_tokens)."""
        node = self._root
        best = None
        j = i
        while j < len(tokens) and tokens[j] in node:
            node = node[tokens[j]]
            j += 1
            if PhraseMatcher._WORD in node:
                best = (node[PhraseMatcher._WORD], j - i)
        return best


def extract_types(
    article: ArticleRecord,
    dictionary: SemanticTypeDictionary,
    cap: int = 11,
    matcher: Optional[PhraseMatcher] = None,
) -> EntityTypeAssignment:
    """Collect up to ``cap`` distinct (post-remap) type words in text order."""
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    if not dictionary.words:
        raise ValueError("dictionary is empty")
    matcher = matcher or PhraseMatcher(dictionary)

    tokens = tokenize(article.first_sentence)
    tokens += tokenize(article.body)

    collected: list[str] = []
    seen: set[str] = set()
    i = 0
    while i < len(tokens) and len(collected) < cap:
        hit = matcher.match_at(tokens, i)
        if hit is None:
            i += 1
            continue
        word, consumed = hit
        mapped = apply_remap(dictionary, word)
        if mapped not in seen:
            seen.add(mapped)
            collected.append(mapped)
        i += consumed
    return EntityTypeAssignment(article.entity_id, collected)


def extract_corpus(
    corpus: Iterable[ArticleRecord],
    dictionary: SemanticTypeDictionary,
    cap: int = 11,
    workers: int = 1,
    chunk_size: int = 256,
) -> dict[str, EntityTypeAssignment]:
    """One assignment per article, in stream order.

    Articles are independent, so sharding over workers cannot change the
    result; duplicate entity ids are rejected.
    """
    matcher = PhraseMatcher(dictionary)
    out: dict[str, EntityTypeAssignment] = {}

    def _take(assignment: EntityTypeAssignment) -> None:
        if assignment.entity_id in out:
            raise DuplicateEntityError(f"duplicate entity id {assignment.entity_id!r}")
        out[assignment.entity_id] = assignment

    if workers <= 1:
        for article in corpus:
            _take(extract_types(article, dictionary, cap, matcher))
        return out

    def _run_chunk(chunk: list[ArticleRecord]) -> list[EntityTypeAssignment]:
        return [extract_types(a, dictionary, cap, matcher) for a in chunk]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending: list = []
        chunk: list[ArticleRecord] = []
        for article in corpus:
            chunk.append(article)
            if len(chunk) >= chunk_size:
                pending.append(pool.submit(_run_chunk, chunk))
                chunk = []
        if chunk:
            pending.append(pool.submit(_run_chunk, chunk))
        for future in pending:
            for assignment in future.result():
                _take(assignment)
    return out


def read_article_corpus(path) -> Iterator[ArticleRecord]:
    """Read articles from a TSV file or a directory of per-entity text files.

    TSV lines are ``<entity_id>\\t<title>\\t<text>``.  In directory mode the
    file stem doubles as entity id and title.
    """
    path = Path(path)
    if path.is_dir():
        for child in sorted(path.iterdir()):
            if child.is_file():
                yield ArticleRecord.from_text(child.stem, child.stem, child.read_text("utf-8"))
        return
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError("expected '<entity_id>\\t<title>\\t<text>'", path=path, line=line_no)
            yield ArticleRecord.from_text(parts[0], parts[1], parts[2])


def write_assignments(assignments, path) -> None:
    """Write '<entity_id>\\t<w1,w2,...>' lines in mapping order."""
    items = assignments.values() if hasattr(assignments, "values") else assignments
    with open(path, "w", encoding="utf-8") as fh:
        for assignment in items:
            fh.write(f"{assignment.entity_id}\t{','.join(assignment.type_words)}\n")


def read_assignments(path) -> dict[str, EntityTypeAssignment]:
    out: dict[str, EntityTypeAssignment] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError("expected '<entity_id>\\t<w1,w2,...>'", path=path, line=line_no)
            entity_id, words = parts
            if entity_id in out:
                raise DuplicateEntityError(f"duplicate entity id {entity_id!r}")
            type_words = [w for w in words.split(",") if w]
            out[entity_id] = EntityTypeAssignment(entity_id, type_words)
    return out
