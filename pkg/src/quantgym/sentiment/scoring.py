"""Document scoring: clause-scoped shifters and bounded compound scores."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .lexicon import SentimentDictionary, ShifterTable
from .preprocess import Document

COMPOUND_ALPHA = 15.0
POSITIVE_THRESHOLD = 0.05
NEGATIVE_THRESHOLD = -0.05


@dataclass(frozen=True)
class SentimentScore:
    compound: float  # in [-1, 1]
    polarity: str  # negative | neutral | positive
    per_sentence: tuple[float, ...]  # raw sums before normalization


def polarity_of(compound: float) -> str:
    if compound >= POSITIVE_THRESHOLD:
        return "positive"
    if compound <= NEGATIVE_THRESHOLD:
        return "negative"
    return "neutral"


def normalize_compound(total: float, alpha: float = COMPOUND_ALPHA) -> float:
    return total / math.sqrt(total * total + alpha)


def _sentence_raw(tokens, dictionary: SentimentDictionary,
                  shifters: ShifterTable) -> float:
    # clause id increments after every verb, scoping the shifters
    clause = []
    cid = 0
    for tok in tokens:
        clause.append(cid)
        if tok.pos == "VERB":
            cid += 1
    raw = 0.0
    for i, tok in enumerate(tokens):
        valence = dictionary.get(tok.lemma)
        if valence is None:
            continue
        boost = 0.0
        for j in range(i):
            if clause[j] != clause[i]:
                continue
            boost += shifters.intensifiers.get(tokens[j].lemma, 0.0)
        if valence > 0:
            valence += boost
        elif valence < 0:
            valence -= boost
        negated = any(
            clause[j] == clause[i] and tokens[j].lemma in shifters.negators
            for j in range(max(0, i - shifters.negation_window), i))
        if negated:
            valence *= shifters.negation_factor
        raw += valence
    return raw


def score_document(doc: Document, dictionary: SentimentDictionary,
                   shifters: ShifterTable,
                   alpha: float = COMPOUND_ALPHA) -> SentimentScore:
    """Score a preprocessed document.

    Within each sentence, clauses are cut after finite verbs; a hit's
    valence absorbs every preceding intensifier boost in its clause
    (pushed away from zero) and is flipped and damped by the negation
    factor when a negator sits within the negation window. Sentence raw
    sums add with equal weight and the total is squashed to [-1, 1].
    """
    if len(dictionary) == 0:
        raise ValueError("empty sentiment dictionary")
    per_sentence = tuple(
        _sentence_raw(tokens, dictionary, shifters) for tokens in doc.sentences)
    total = sum(per_sentence)
    compound = normalize_compound(total, alpha)
    return SentimentScore(compound, polarity_of(compound), per_sentence)
