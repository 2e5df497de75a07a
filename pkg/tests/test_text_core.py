"""Tokenization, detokenization, and rule-based verb inflection."""

import numpy as np
import pytest

from metaphor_forge.text_core import (
    EmptyInputError,
    TokenSentence,
    detokenize,
    inflect_like,
    lemma_candidates,
    tokenize,
)


class TestTokenize:
    def test_lowercases_and_splits_on_whitespace(self):
        assert tokenize("The Moon Glared").tokens == ("the", "moon", "glared")

    def test_punctuation_becomes_standalone_tokens(self):
        assert tokenize("He ran, then stopped.").tokens == (
            "he", "ran", ",", "then", "stopped", ".",
        )

    def test_clitic_s_is_split(self):
        assert tokenize("the critic's praise").tokens == (
            "the", "critic", "'s", "praise",
        )

    def test_negation_contraction_stays_whole(self):
        assert tokenize("don't go").tokens == ("don't", "go")

    def test_question_and_quote(self):
        assert tokenize('did he say "go"?').tokens == (
            "did", "he", "say", '"', "go", '"', "?",
        )

    def test_verb_index_is_carried(self):
        assert tokenize("he runs", verb_index=1).verb == "runs"

    def test_empty_input_raises(self):
        with pytest.raises(EmptyInputError):
            tokenize("   ")

    def test_round_trip_with_detokenize(self):
        text = "the company was hemorrhaging money"
        assert detokenize(tokenize(text)) == text


class TestDetokenize:
    def test_attaches_trailing_punctuation(self):
        sent = TokenSentence(("he", "ran", ",", "then", "stopped", "."))
        assert detokenize(sent) == "he ran, then stopped."

    def test_attaches_clitic(self):
        sent = TokenSentence(("the", "critic", "'s", "praise"))
        assert detokenize(sent) == "the critic's praise"

    def test_double_quotes_stay_separate(self):
        sent = TokenSentence(('"', "go", '"'))
        assert detokenize(sent) == '" go "'

    def test_empty_sentence_raises(self):
        with pytest.raises(ValueError):
            detokenize(TokenSentence(()))


class TestTokenSentence:
    def test_verb_property(self):
        sent = TokenSentence(("he", "runs"), verb_index=1)
        assert sent.verb == "runs"

    def test_verb_index_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            TokenSentence(("he", "runs"), verb_index=2)

    def test_negative_verb_index_rejected(self):
        with pytest.raises(ValueError):
            TokenSentence(("he", "runs"), verb_index=-1)

    def test_particle_without_verb_rejected(self):
        with pytest.raises(ValueError):
            TokenSentence(("he", "gave", "up"), verb_index=None, particle_index=2)

    def test_particle_must_follow_verb(self):
        with pytest.raises(ValueError):
            TokenSentence(("up", "gave", "he"), verb_index=1, particle_index=0)

    def test_empty_string_token_rejected(self):
        with pytest.raises(ValueError):
            TokenSentence(("", "runs"))

    def test_missing_verb_raises_on_access(self):
        sent = TokenSentence(("he", "runs"))
        with pytest.raises(ValueError):
            _ = sent.verb

    def test_len(self):
        assert len(TokenSentence(("a", "b", "c"))) == 3


class TestInflectLike:
    # Each case: lemma to inflect, exemplar surface, exemplar lemma, expected.
    CASES = [
        ("shower", "lavished", "lavish", "showered"),
        ("shower", "lavishes", "lavish", "showers"),
        ("shower", "lavishing", "lavish", "showering"),
        ("shower", "lavish", "lavish", "shower"),
        ("sparkle", "shines", "shine", "sparkles"),
        ("sparkle", "shined", "shine", "sparkled"),
        ("sparkle", "shining", "shine", "sparkling"),
        ("hemorrhage", "losing", "lose", "hemorrhaging"),
        ("crush", "saddens", "sadden", "crushes"),
        ("march", "rushes", "rush", "marches"),
        ("carry", "denied", "deny", "carried"),
        ("carry", "denies", "deny", "carries"),
        ("grab", "stopped", "stop", "grabbed"),
        ("grab", "stopping", "stop", "grabbing"),
        ("drain", "grabbed", "grab", "drained"),
    ]

    @pytest.mark.parametrize("lemma,surface,exemplar,expected", CASES)
    def test_agreement_with_exemplar(self, lemma, surface, exemplar, expected):
        assert inflect_like(lemma, surface, exemplar) == expected

    def test_irregular_exemplar_falls_back_to_lemma(self):
        # "lost" cannot be derived from "lose" by the suffix rules.
        assert inflect_like("hemorrhage", "lost", "lose") == "hemorrhage"

    def test_unrelated_exemplar_falls_back_to_lemma(self):
        assert inflect_like("move", "went", "go") == "move"


class TestLemmaCandidates:
    def test_surface_itself_is_first(self):
        assert lemma_candidates("run")[0] == "run"

    def test_ed_form_guesses(self):
        guesses = lemma_candidates("lavished")
        assert "lavish" in guesses
        assert guesses[0] == "lavished"

    def test_ing_form_guesses_restore_dropped_e(self):
        assert "hemorrhage" in lemma_candidates("hemorrhaging")

    def test_ies_form_guesses(self):
        assert "deny" in lemma_candidates("denies")

    def test_doubled_consonant_guesses(self):
        assert "grab" in lemma_candidates("grabbed")

    def test_no_duplicates(self):
        guesses = lemma_candidates("glided")
        assert len(guesses) == len(set(guesses))


def test_inflect_then_recover_lemma_property():
    """lemma_candidates undoes inflect_like for regular verbs."""
    rng = np.random.default_rng(41)
    lemmas = [
        "shower", "sparkle", "march", "drain", "crush", "glide",
        "hemorrhage", "carry", "deny", "rush", "grab", "manifest",
    ]
    exemplars = [
        ("lavish", "lavish"), ("lavishes", "lavish"),
        ("lavished", "lavish"), ("lavishing", "lavish"),
    ]
    for _ in range(200):
        lemma = lemmas[rng.integers(len(lemmas))]
        surface, exemplar = exemplars[rng.integers(len(exemplars))]
        inflected = inflect_like(lemma, surface, exemplar)
        assert lemma in lemma_candidates(inflected), (lemma, inflected)
