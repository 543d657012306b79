"""Analytics and knowledge retrieval for mixed-initiative emotional-support dialogues."""

from esckit.dialogue import (
    Corpus,
    CorpusFormatError,
    Dialogue,
    EafrLabel,
    InitiativeType,
    SpeakerRole,
    Utterance,
    eafr_label,
    load_corpus,
)
from esckit.text import preprocess

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "CorpusFormatError",
    "Dialogue",
    "EafrLabel",
    "InitiativeType",
    "SpeakerRole",
    "Utterance",
    "eafr_label",
    "load_corpus",
    "preprocess",
]
