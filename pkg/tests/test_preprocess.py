"""Normalization pipeline: tokenizing, token typing, lemma filtering."""

from __future__ import annotations

import random
from collections import Counter

import pytest

from discoursekit.preprocess import (
    EmoticonTable,
    Lexicon,
    Token,
    TokenKind,
    lemmatize_and_filter,
    load_default_resources,
    load_emoticons,
    load_lexicon,
    load_stopwords,
    normalize_token,
    preprocess,
    repair_vowel_runs,
    tokenize,
)


@pytest.fixture(scope="module")
def resources():
    return load_default_resources()


@pytest.fixture(scope="module")
def lex(resources):
    return resources[0]


@pytest.fixture(scope="module")
def stop(resources):
    return resources[1]


@pytest.fixture(scope="module")
def emoticons(resources):
    return resources[2]


class TestTokenize:
    def test_example_message(self, emoticons):
        assert tokenize("No entiendo :-(", emoticons) == ["no", "entiendo", ":-("]

    def test_empty(self, emoticons):
        assert tokenize("", emoticons) == []
        assert tokenize("   \t\n", emoticons) == []

    def test_url_kept_whole_despite_inner_punctuation(self, emoticons):
        assert tokenize("hola, http://museociudad.cl", emoticons) == [
            "hola",
            "http://museociudad.cl",
        ]

    def test_punctuation_peeled_from_words(self, emoticons):
        assert tokenize("¡Hola!! (bueno)", emoticons) == ["hola", "bueno"]

    def test_emoticon_recovered_after_trailing_punctuation(self, emoticons):
        assert tokenize("llegamos :-).", emoticons) == ["llegamos", ":-)"]

    def test_emoticon_surface_not_lowercased(self, emoticons):
        assert tokenize("jaja XD", emoticons) == ["jaja", "XD"]

    def test_pure_punctuation_dropped(self, emoticons):
        assert tokenize("... --- !!!", emoticons) == []

    def test_accented_words_survive(self, emoticons):
        assert tokenize("¿Qué tal?", emoticons) == ["qué", "tal"]


class TestNormalizeToken:
    def test_vowel_repair_to_lexicon_form(self, lex, emoticons):
        token = normalize_token("buuenooooo", lex, emoticons)
        assert token.kind is TokenKind.WORD
        assert token.lemma == "bueno"

    def test_url_variants(self, lex, emoticons):
        for surface in (
            "http://aula.escuela.cl",
            "https://example.org/path?q=1",
            "www.escuela.cl",
        ):
            token = normalize_token(surface, lex, emoticons)
            assert token.kind is TokenKind.URL
            assert token.lemma == "http"

    def test_emoticons_keep_surface_as_lemma(self, lex, emoticons):
        for surface in (":D", ";-)", ":-(", "<3", "XD", ":-)))"):
            token = normalize_token(surface, lex, emoticons)
            assert token.kind is TokenKind.EMOTICON
            assert token.lemma == surface

    def test_numbers_fold_to_marker(self, lex, emoticons):
        for surface in ("42", "3,5", "2013", "10:30"):
            token = normalize_token(surface, lex, emoticons)
            assert token.kind is TokenKind.NUMBER
            assert token.lemma == "NUM"

    def test_lexicon_lookup_with_identity_fallback(self, lex, emoticons):
        assert normalize_token("actividades", lex, emoticons).lemma == "actividad"
        assert normalize_token("zorzal", lex, emoticons).lemma == "zorzal"

    def test_empty_surface_rejected(self, lex, emoticons):
        with pytest.raises(ValueError):
            normalize_token("", lex, emoticons)


class TestVowelRepair:
    def test_long_runs_always_collapse(self, lex):
        assert repair_vowel_runs("buuenooooo", lex) == "bueno"
        assert repair_vowel_runs("siiiii", lex) == "si"

    def test_double_vowel_protected_by_lexicon(self, lex):
        assert repair_vowel_runs("leer", lex) == "leer"

    def test_double_vowel_collapsed_when_unknown(self, lex):
        assert repair_vowel_runs("laas", lex) == "las"

    def test_never_lengthens_and_leaves_plain_words_alone(self, lex):
        rng = random.Random(7)
        alphabet = "abcdefghijklmnopqrstuvwxyzáé"
        for _ in range(200):
            word = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 12)))
            repaired = repair_vowel_runs(word, lex)
            assert len(repaired) <= len(word)
            if not any(a == b and a in "aeiouáéíóúü" for a, b in zip(word, word[1:])):
                assert repaired == word

    def test_consonant_runs_untouched(self, lex):
        assert repair_vowel_runs("carrro", lex) == "carrro"


class TestLemmatizeAndFilter:
    def test_inflected_forms_retained_under_lemma(self, lex, stop, emoticons):
        tokens = [normalize_token(s, lex, emoticons) for s in ("actividades", "entiendo")]
        kept = lemmatize_and_filter(tokens, stop)
        assert [t.lemma for t in kept] == ["actividad", "entender"]

    def test_stopwords_removed(self, lex, stop, emoticons):
        tokens = [normalize_token(s, lex, emoticons) for s in ("cada", "aquel", "hola")]
        kept = lemmatize_and_filter(tokens, stop)
        assert [t.lemma for t in kept] == ["hola"]

    def test_non_word_tokens_never_removed(self, lex, emoticons):
        """Even a stopword list naming their lemmas cannot drop them."""
        tokens = [
            normalize_token(s, lex, emoticons)
            for s in ("http://x.cl", ":D", "42")
        ]
        kept = lemmatize_and_filter(tokens, frozenset({"http", ":D", "NUM"}))
        assert [t.lemma for t in kept] == ["http", ":D", "NUM"]


class TestPreprocess:
    def test_example_message(self, lex, stop, emoticons):
        assert preprocess("No entiendo :-(", lex, stop, emoticons) == [
            "no",
            "entender",
            ":-(",
        ]

    def test_empty(self, lex, stop, emoticons):
        assert preprocess("", lex, stop, emoticons) == []

    def test_greeting_with_emoticon_and_laughter(self, lex, stop, emoticons):
        assert preprocess("ola!! :D jajaja", lex, stop, emoticons) == [
            "ola",
            ":D",
            "jajaja",
        ]

    def test_no_stopword_lemmas_in_output(self, lex, stop, emoticons):
        out = preprocess(
            "el trabajo de la actividad para los compañeros", lex, stop, emoticons
        )
        assert out == ["trabajo", "actividad", "compañero"]
        assert not set(out) & stop

    def test_idempotent_on_own_output(self, lex, stop, emoticons):
        """Feeding the lemma stream back through the pipeline reproduces the
        same multiset."""
        rng = random.Random(3)
        surfaces = list(lex.entries) + ["buuenooooo", "XD", ";-)", "www.x.cl", "42", "..."]
        for _ in range(50):
            text = " ".join(rng.choice(surfaces) for _ in range(rng.randint(1, 12)))
            once = preprocess(text, lex, stop, emoticons)
            twice = preprocess(" ".join(once), lex, stop, emoticons)
            assert Counter(once) == Counter(twice)

    def test_ordering_preserved(self, lex, stop, emoticons):
        assert preprocess("guerra y paz", lex, stop, emoticons) == ["guerra", "paz"]


class TestResources:
    def test_lexicon_loader(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("# comment\nPerros\tperro\n\ncasa\tcasa\n", encoding="utf-8")
        lexicon = load_lexicon(path)
        assert lexicon.lookup("perros") == "perro"
        assert lexicon.lookup("PERROS") == "perro"
        assert lexicon.lookup("gato") == "gato"

    def test_lexicon_bad_line(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("soloclave\n", encoding="utf-8")
        with pytest.raises(ValueError, match="surface<TAB>lemma"):
            load_lexicon(path)

    def test_lexicon_keys_must_be_lowercase(self):
        with pytest.raises(ValueError, match="lowercase"):
            Lexicon(entries={"Casa": "casa"})

    def test_stopwords_loader_rejects_empty(self, tmp_path):
        path = tmp_path / "stop.txt"
        path.write_text("# only a comment\n", encoding="utf-8")
        with pytest.raises(ValueError, match="empty"):
            load_stopwords(path)

    def test_emoticon_loader_rejects_bad_pattern(self, tmp_path):
        path = tmp_path / "emo.txt"
        path.write_text("[:;\n", encoding="utf-8")
        with pytest.raises(ValueError, match="bad pattern"):
            load_emoticons(path)

    def test_bundled_stopwords_cover_named_examples(self, stop):
        assert {"aquel", "cada"} <= stop
        assert "no" not in stop
        assert len(stop) >= 40

    def test_bundled_lexicon_is_closed_under_lemmas(self, lex, stop, emoticons):
        """Every lemma the lexicon can emit normalizes back to itself, which
        is what makes the pipeline idempotent."""
        for lemma in set(lex.entries.values()):
            out = preprocess(lemma, lex, stop, emoticons)
            if lemma in stop:
                continue
            assert out == [lemma]

    def test_token_invariants(self):
        with pytest.raises(ValueError):
            Token(surface=":D", lemma="grin", kind=TokenKind.EMOTICON)
        with pytest.raises(ValueError):
            Token(surface="www.x.cl", lemma="www.x.cl", kind=TokenKind.URL)
        with pytest.raises(ValueError):
            Token(surface="x", lemma="", kind=TokenKind.WORD)

    def test_emoticon_table_fullmatch_only(self, emoticons):
        assert emoticons.matches(":-(")
        assert not emoticons.matches("x:-(")
        assert not emoticons.matches("hola")
