"""Tokenization and the deterministic query rewriter."""

from __future__ import annotations

import re

_SPLIT = re.compile(r"[\W_]+")

# Fixed list; changing it changes rewrite_bm25 results.
STOPWORDS: frozenset[str] = frozenset(
    """
    a an the and or but if of at by for with about to from in on into over
    is are was were be been being am do does did have has had
    what which who whom whose when where why how
    this that these those it its as not
    """.split()
)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on every non-alphanumeric character (Unicode aware)."""
    return [t for t in _SPLIT.split(text.lower()) if t]


def rewrite_query(query: str) -> str:
    seen: set[str] = set()
    kept = []
    for tok in tokenize(query):
        if tok in STOPWORDS or tok in seen:
            continue
        seen.add(tok)
        kept.append(tok)
    return " ".join(kept)
