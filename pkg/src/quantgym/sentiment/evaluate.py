"""Corpus evaluation: polarity accuracy and valence correlation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .lexicon import SentimentDictionary, ShifterTable
from .preprocess import preprocess
from .scoring import score_document

LABEL_MIN, LABEL_MAX = -100.0, 100.0


@dataclass(frozen=True)
class LabeledCorpus:
    """(text, valence label) pairs with labels in [-100, 100]."""

    items: tuple[tuple[str, float], ...]

    def __post_init__(self):
        norm = []
        for text, label in self.items:
            label = float(label)
            if not LABEL_MIN <= label <= LABEL_MAX:
                raise ValueError(f"label {label} outside [{LABEL_MIN}, {LABEL_MAX}]")
            norm.append((str(text), label))
        object.__setattr__(self, "items", tuple(norm))

    def __len__(self) -> int:
        return len(self.items)

    @classmethod
    def load(cls, path) -> "LabeledCorpus":
        """TSV rows valence_label<TAB>headline."""
        items = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                label, text = line.split("\t", 1)
                items.append((text, float(label)))
        return cls(tuple(items))


class EvalResult(NamedTuple):
    polarity_accuracy: float
    valence_correlation: float | None  # None when either series is constant


def label_polarity(label: float) -> str:
    if label > 0:
        return "positive"
    if label < 0:
        return "negative"
    return "neutral"


def evaluate(corpus: LabeledCorpus, dictionary: SentimentDictionary,
             shifters: ShifterTable,
             preprocessor: Callable | None = None) -> EvalResult:
    """Score every corpus item and compare against its label.

    Accuracy is the fraction of predicted polarities matching the label
    sign; correlation is Pearson between compounds and raw labels, None
    (with accuracy still returned) when either side is constant.
    """
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    prep = preprocessor or preprocess
    compounds = np.empty(len(corpus))
    labels = np.empty(len(corpus))
    hits = 0
    for i, (text, label) in enumerate(corpus.items):
        score = score_document(prep(text), dictionary, shifters)
        compounds[i] = score.compound
        labels[i] = label
        if score.polarity == label_polarity(label):
            hits += 1
    accuracy = hits / len(corpus)
    if np.std(compounds) == 0.0 or np.std(labels) == 0.0:
        return EvalResult(accuracy, None)
    correlation = float(np.corrcoef(compounds, labels)[0, 1])
    return EvalResult(accuracy, correlation)
