"""Dictionary merge, synonym expansion, and override gating."""
import logging

import pytest

from quantgym.sentiment import (
    Candidate,
    Override,
    SentimentDictionary,
    apply_overrides,
    combine,
    expand_dictionary,
    merge_dictionaries,
)


class TestMerge:
    def test_disjoint_union(self):
        fin = SentimentDictionary({"rise": 1.5})
        gen = SentimentDictionary({"good": 1.9})
        merged, contradictions = merge_dictionaries(fin, gen)
        assert contradictions == []
        assert merged.get("rise") == 1.5
        assert merged.get("good") == 1.9
        assert merged.provenance["rise"] == "merged"

    def test_opposite_signs_is_contradiction(self):
        fin = SentimentDictionary({"bull": 0.8})
        gen = SentimentDictionary({"bull": -0.3})
        merged, contradictions = merge_dictionaries(fin, gen)
        assert contradictions == ["bull"]
        assert "bull" not in merged

    def test_resolution_includes_lemma(self):
        fin = SentimentDictionary({"bull": 0.8})
        gen = SentimentDictionary({"bull": -0.3})
        merged, contradictions = merge_dictionaries(fin, gen, {"bull": 0.8})
        assert contradictions == []
        assert merged.get("bull") == 0.8
        assert merged.provenance["bull"] == "override"

    def test_same_sign_conflict_financial_wins(self):
        fin = SentimentDictionary({"strong": 1.2})
        gen = SentimentDictionary({"strong": 0.9})
        merged, contradictions = merge_dictionaries(fin, gen)
        assert contradictions == []
        assert merged.get("strong") == 1.2

    def test_unused_resolution_warns(self, caplog):
        fin = SentimentDictionary({"rise": 1.5})
        gen = SentimentDictionary({"fall": -1.5})
        with caplog.at_level(logging.WARNING):
            merge_dictionaries(fin, gen, {"bull": 1.0})
        assert "bull" in caplog.text

    def test_output_never_contains_contradicted_lemma(self):
        fin = SentimentDictionary({"bull": 0.8, "bear": -1.6, "up": 0.9})
        gen = SentimentDictionary({"bull": -0.3, "bear": 1.0, "up": 0.5})
        merged, contradictions = merge_dictionaries(fin, gen)
        assert set(contradictions) == {"bull", "bear"}
        for lemma in contradictions:
            assert lemma not in merged


MERGED = SentimentDictionary({"bull": 1.8, "gain": 1.3, "risk": -0.8})


class TestExpand:
    def graph(self):
        return {
            "bullish": [("bull", 0.9), ("optimistic", 0.3)],
            "upswing": [("gain", 0.3), ("bull", 0.9)],
            "hazard": [("risk", 0.45)],
            "flat": [("nothing", 0.9)],
            "gain": [("bull", 1.0)],
        }

    def subjectivity(self):
        return {"bullish": 0.9, "upswing": 0.8, "hazard": 0.7, "flat": 0.9,
                "dull": 0.1}

    def test_already_labeled_word_is_not_a_candidate(self):
        cands = expand_dictionary(MERGED, ["gain", "bullish"], self.graph(),
                                  self.subjectivity())
        assert [c.word for c in cands] == ["bullish"]

    def test_low_subjectivity_excluded(self):
        graph = dict(self.graph(), dull=[("risk", 0.9)])
        cands = expand_dictionary(MERGED, ["dull"], graph, self.subjectivity())
        assert cands == []

    def test_missing_subjectivity_is_zero(self):
        cands = expand_dictionary(MERGED, ["bullish"], self.graph(), {})
        assert cands == []

    def test_argmax_similarity_selected(self):
        cands = expand_dictionary(MERGED, ["upswing"], self.graph(),
                                  self.subjectivity())
        assert len(cands) == 1
        assert cands[0].synonym == "bull"
        assert cands[0].path_similarity == 0.9
        assert cands[0].valence == 1.8

    def test_unlabeled_synonyms_ignored(self):
        cands = expand_dictionary(MERGED, ["flat"], self.graph(),
                                  self.subjectivity())
        assert cands == []

    def test_candidates_disjoint_from_merged(self):
        words = ["bullish", "upswing", "hazard", "gain", "bull", "risk"]
        cands = expand_dictionary(MERGED, words, self.graph(),
                                  self.subjectivity())
        assert {c.word for c in cands} & set(MERGED.entries) == set()

    def test_empty_master_lexicon_rejected(self):
        with pytest.raises(ValueError, match="empty master lexicon"):
            expand_dictionary(MERGED, [], self.graph(), self.subjectivity())


class TestOverrides:
    def cands(self):
        return [
            Candidate("bullish", "bull", 1.8, 0.9),
            Candidate("hazard", "risk", -0.8, 0.45),
            Candidate("upswing", "gain", 1.3, 0.4),
            Candidate("noise", "gain", 1.3, 0.2),
        ]

    def test_high_similarity_auto_accepted(self):
        adds, pending = apply_overrides(self.cands()[:1], {})
        assert adds.get("bullish") == 1.8
        assert adds.provenance["bullish"] == "expanded"
        assert pending == []

    def test_adjust_override(self):
        adds, _ = apply_overrides(self.cands(), {
            "hazard": Override("hazard", "adjust", -2.0),
            "upswing": Override("upswing", "accept"),
            "noise": Override("noise", "reject"),
        })
        assert adds.get("hazard") == -2.0
        assert adds.provenance["hazard"] == "override"
        assert adds.get("upswing") == 1.3
        assert "noise" not in adds

    def test_low_similarity_without_override_pending(self, caplog):
        with caplog.at_level(logging.WARNING):
            adds, pending = apply_overrides(self.cands(), {})
        assert adds.get("bullish") == 1.8
        assert [c.word for c in pending] == ["hazard", "upswing", "noise"]
        assert "pending" in caplog.text

    def test_override_for_unknown_word_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            apply_overrides(self.cands()[:1],
                            {"ghost": Override("ghost", "accept")})
        assert "ghost" in caplog.text

    def test_adjust_needs_valence(self):
        with pytest.raises(ValueError, match="needs a valence"):
            Override("x", "adjust")

    def test_unknown_action(self):
        with pytest.raises(ValueError, match="unknown override action"):
            Override("x", "maybe")


def test_combine_layers_additions():
    base = SentimentDictionary({"rise": 1.5}, {"rise": "merged"})
    adds = SentimentDictionary({"bullish": 1.8}, {"bullish": "expanded"})
    out = combine(base, adds)
    assert out.get("rise") == 1.5
    assert out.get("bullish") == 1.8
    assert out.provenance["bullish"] == "expanded"


def test_valence_range_enforced():
    with pytest.raises(ValueError, match="valence"):
        SentimentDictionary({"broken": 9.0})


def test_save_load_round_trip(tmp_path):
    d = SentimentDictionary({"rise": 1.5, "fall": -1.5},
                            {"rise": "merged", "fall": "expanded"})
    path = tmp_path / "dict.tsv"
    d.save(str(path))
    again = SentimentDictionary.load(str(path))
    assert again.entries == d.entries
    assert again.provenance == d.provenance
