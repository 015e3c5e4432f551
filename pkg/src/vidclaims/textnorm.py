"""Text normalization shared by the mock backends and the consolidator.

The normalization scheme is deliberately simple and fully documented, because
the deterministic mock behaviors (entailment, same-proposition checks, the
hash-bucket embedder) are all defined in terms of it:

  1. lowercase,
  2. replace every non-alphanumeric character with a space,
  3. split on whitespace,
  4. drop stopwords.

Two texts are "token-equivalent" when their content-token sets are equal.
"""

from __future__ import annotations

import re

STOPWORDS = frozenset(
    """
    a an the and or of in on at to for with by from as is are was were be been
    being it its this that these those has have had do does did not no while
    during over under their his her they he she we you i what who when where
    which how
    """.split()
)

_NON_ALNUM = re.compile(r"[^0-9a-z]+")


def content_tokens(text: str) -> list[str]:
    """Lowercased alphanumeric tokens with stopwords removed (order kept)."""
    words = _NON_ALNUM.sub(" ", text.lower()).split()
    return [w for w in words if w not in STOPWORDS]


def token_set(text: str) -> frozenset[str]:
    return frozenset(content_tokens(text))


_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+")


def first_sentence(text: str) -> str:
    """First sentence of ``text`` (whitespace-collapsed); used to enforce
    single-sentence claims and rationales."""
    flat = " ".join(text.split())
    if not flat:
        return ""
    return _SENTENCE_BREAK.split(flat, maxsplit=1)[0]
