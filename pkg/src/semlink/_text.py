"""Tokenization helpers shared by dictionary mining and type extraction."""

import re

_TOKEN_RE = re.compile(r"[a-z0-9_']+")

# Deliberately split at the first terminator; fixtures are pre-stripped plain
# text, so abbreviation handling is out of scope here.
_SENTENCE_END_RE = re.compile(r"(?<=[.!?])\s+")


def tokenize(text):
    """Lowercase and split on whitespace/punctuation, keeping _ and '."""
    return _TOKEN_RE.findall(text.lower())


def split_first_sentence(text):
    """Return (first_sentence, remainder) of a plain-text article body."""
    text = text.strip()
    m = _SENTENCE_END_RE.search(text)
    if m is None:
        return text, ""
    return text[: m.start()], text[m.end() :]
