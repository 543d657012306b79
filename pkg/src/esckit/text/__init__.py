from esckit.text.pipeline import (
    TextPipeline,
    Vocabulary,
    build_vocabulary,
    default_pipeline,
    frequent_terms,
    preprocess,
    tokenize,
)
from esckit.text.stemmer import stem

__all__ = [
    "TextPipeline",
    "Vocabulary",
    "build_vocabulary",
    "default_pipeline",
    "frequent_terms",
    "preprocess",
    "stem",
    "tokenize",
]
