"""Tokenization, stopword filtering and per-dialogue term statistics."""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

from esckit.text.stemmer import stem

if TYPE_CHECKING:
    from esckit.dialogue import Dialogue

DEFAULT_STOPWORDS = "stopwords_en_v1.txt"

TermId = int
TermSet = frozenset  # frozenset[TermId]


def strip_punctuation(text: str) -> str:
    """Remove every character in a Unicode punctuation category (P*)."""
    return "".join(ch for ch in text if not unicodedata.category(ch).startswith("P"))


def tokenize(text: str) -> list[str]:
    """Strip punctuation, split on whitespace and lowercase."""
    return strip_punctuation(text).lower().split()


def read_word_list(path: str | Path | None = None, default: str = DEFAULT_STOPWORDS) -> list[str]:
    """Read a one-entry-per-line UTF-8 list; blank lines and ``#`` comments are skipped."""
    if path is None:
        raw = resources.files("esckit.data").joinpath(default).read_text(encoding="utf-8")
    else:
        raw = Path(path).read_text(encoding="utf-8")
    entries = []
    for line in raw.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.append(line)
    return entries


class TextPipeline:
    """Punctuation removal, tokenization, lowercasing, stopword removal, stemming.

    Stopword entries are normalized the same way as tokens, so a listed
    contraction such as ``don't`` also filters the token ``dont``.
    """

    def __init__(self, stopwords: Iterable[str] | None = None):
        if stopwords is None:
            stopwords = read_word_list()
        normalized = set()
        for word in stopwords:
            normalized.update(tokenize(word))
        self.stopwords = frozenset(normalized)

    @classmethod
    def from_file(cls, path: str | Path | None) -> "TextPipeline":
        return cls(read_word_list(path))

    def preprocess(self, text: str) -> list[str]:
        stems = []
        for token in tokenize(text):
            if token in self.stopwords:
                continue
            s = stem(token)
            # a stem can collide with a stopword ("thems" -> "them")
            if s and s not in self.stopwords:
                stems.append(s)
        return stems


_default_pipeline: TextPipeline | None = None


def default_pipeline() -> TextPipeline:
    global _default_pipeline
    if _default_pipeline is None:
        _default_pipeline = TextPipeline()
    return _default_pipeline


def preprocess(text: str) -> list[str]:
    """Preprocess ``text`` with the default stopword list.

    >>> preprocess("I am SO frustrated!!")
    ['frustrat']
    """
    return default_pipeline().preprocess(text)


@dataclass(frozen=True)
class Vocabulary:
    """Stems seen in one dialogue, with total occurrence counts.

    Term ids are assigned in order of first occurrence.
    """

    stems: tuple[str, ...] = ()
    counts: tuple[int, ...] = ()
    _index: dict[str, TermId] = field(default_factory=dict, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.stems)

    def __contains__(self, stem_: str) -> bool:
        return stem_ in self._index

    def id_of(self, stem_: str) -> TermId:
        return self._index[stem_]

    def stem_of(self, term: TermId) -> str:
        return self.stems[term]

    def count(self, term: TermId) -> int:
        return self.counts[term]

    def as_counts(self) -> dict[str, int]:
        return dict(zip(self.stems, self.counts))


def build_vocabulary(
    dialogue: "Dialogue | Sequence[str]", pipeline: TextPipeline | None = None
) -> tuple[Vocabulary, list[TermSet]]:
    """Build the per-dialogue vocabulary and one binary term set per utterance.

    ``dialogue`` may be a :class:`~esckit.dialogue.Dialogue` or a plain
    sequence of utterance texts.
    """
    pipeline = pipeline or default_pipeline()
    texts = [u.text for u in dialogue.utterances] if hasattr(dialogue, "utterances") else list(dialogue)
    index: dict[str, TermId] = {}
    stems: list[str] = []
    counts: list[int] = []
    termsets: list[TermSet] = []
    for text in texts:
        present = set()
        for s in pipeline.preprocess(text):
            term = index.get(s)
            if term is None:
                term = index[s] = len(stems)
                stems.append(s)
                counts.append(0)
            counts[term] += 1
            present.add(term)
        termsets.append(frozenset(present))
    return Vocabulary(tuple(stems), tuple(counts), index), termsets


def frequent_terms(vocab: Vocabulary) -> frozenset:
    """Terms occurring more than once in the dialogue."""
    return frozenset(t for t, c in enumerate(vocab.counts) if c >= 2)
