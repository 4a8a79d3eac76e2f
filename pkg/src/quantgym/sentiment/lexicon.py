"""Sentiment dictionary and valence-shifter tables with TSV persistence."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

VALENCE_MIN, VALENCE_MAX = -4.0, 4.0


@dataclass
class SentimentDictionary:
    """lemma -> valence in [-4, 4], with per-entry provenance."""

    entries: dict[str, float] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        normalized = {}
        for lemma, valence in self.entries.items():
            lemma = lemma.lower()
            valence = float(valence)
            if not math.isfinite(valence) or not VALENCE_MIN <= valence <= VALENCE_MAX:
                raise ValueError(
                    f"valence for {lemma!r} must be finite in "
                    f"[{VALENCE_MIN}, {VALENCE_MAX}], got {valence}")
            normalized[lemma] = valence
        self.entries = normalized
        self.provenance = {k.lower(): v for k, v in self.provenance.items()}

    def __contains__(self, lemma: str) -> bool:
        return lemma in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, lemma: str, default: float | None = None):
        return self.entries.get(lemma, default)

    def items(self):
        return self.entries.items()

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for lemma in sorted(self.entries):
                prov = self.provenance.get(lemma, "merged")
                fh.write(f"{lemma}\t{self.entries[lemma]!r}\t{prov}\n")

    @classmethod
    def load(cls, path) -> "SentimentDictionary":
        entries: dict[str, float] = {}
        provenance: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        for line in text.splitlines():
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ValueError(f"bad dictionary row {line!r}")
            lemma = parts[0]
            entries[lemma] = float(parts[1])
            provenance[lemma] = parts[2] if len(parts) > 2 else "merged"
        return cls(entries, provenance)


@dataclass(frozen=True)
class ShifterTable:
    """Intensifier boosts, negator lemmas, and the negation multiplier."""

    intensifiers: dict[str, float] = field(default_factory=dict)
    negators: frozenset[str] = frozenset()
    negation_factor: float = -0.5
    negation_window: int = 3

    def __post_init__(self):
        if not -1.0 < self.negation_factor < 0.0:
            raise ValueError("negation_factor must lie in (-1, 0)")
        for lemma, boost in self.intensifiers.items():
            if not math.isfinite(boost):
                raise ValueError(f"non-finite boost for {lemma!r}")
        object.__setattr__(self, "negators", frozenset(
            w.lower() for w in self.negators))
        object.__setattr__(self, "intensifiers", {
            k.lower(): float(v) for k, v in self.intensifiers.items()})

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"negation_factor\t{self.negation_factor!r}\t\n")
            for lemma in sorted(self.negators):
                fh.write(f"negator\t{lemma}\t\n")
            for lemma in sorted(self.intensifiers):
                fh.write(f"intensifier\t{lemma}\t{self.intensifiers[lemma]!r}\n")

    @classmethod
    def parse(cls, text: str) -> "ShifterTable":
        intensifiers: dict[str, float] = {}
        negators: set[str] = set()
        factor = -0.5
        for line in text.splitlines():
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            kind = parts[0]
            if kind == "intensifier":
                intensifiers[parts[1]] = float(parts[2])
            elif kind == "negator":
                negators.add(parts[1])
            elif kind == "negation_factor":
                factor = float(parts[1])
            else:
                raise ValueError(f"unknown shifter row kind {kind!r}")
        return cls(intensifiers, frozenset(negators), factor)

    @classmethod
    def load(cls, path) -> "ShifterTable":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())


def _package_text(name: str) -> str:
    return resources.files("quantgym.sentiment").joinpath(
        f"data/{name}").read_text(encoding="utf-8")


def default_shifters() -> ShifterTable:
    return ShifterTable.parse(_package_text("shifters.tsv"))


def mini_financial_dictionary() -> SentimentDictionary:
    """Small shipped finance lexicon (synthetic fixture, demo scale)."""
    return _load_package_dictionary("dict_financial_mini.tsv")


def mini_general_dictionary() -> SentimentDictionary:
    """Small shipped general-domain lexicon (synthetic fixture)."""
    return _load_package_dictionary("dict_general_mini.tsv")


def _load_package_dictionary(name: str) -> SentimentDictionary:
    entries: dict[str, float] = {}
    provenance: dict[str, str] = {}
    for line in _package_text(name).splitlines():
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        entries[parts[0]] = float(parts[1])
        provenance[parts[0]] = parts[2] if len(parts) > 2 else "merged"
    return SentimentDictionary(entries, provenance)
