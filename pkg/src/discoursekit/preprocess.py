"""Text normalization: raw message text to a stream of content lemmas.

The pipeline runs in three stages:

1. ``tokenize`` splits on whitespace and peels leading/trailing punctuation
   off word cores, leaving emoticons and URLs untouched (they are detected
   before and during the peeling, one character at a time, so ":-)." still
   yields the emoticon ":-)").
2. ``normalize_token`` types each surface (Url, Emoticon, Number or Word),
   repairs expressive vowel lengthening (buuenooooo -> bueno) and attaches a
   lemma from a flat lexicon, falling back to the repaired surface itself.
3. ``lemmatize_and_filter`` drops word tokens whose lemma is a grammatical
   stopword.  Emoticons, URL markers and number markers always survive.

All resources are plain UTF-8 files shipped under ``discoursekit/resources``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Iterable, Sequence

_URL_RE = re.compile(r"[A-Za-z][A-Za-z0-9+.-]*://\S+|www\.\S+")
_NUMBER_RE = re.compile(r"\d+(?:[.,:]\d+)*")

#: Lemma assigned to every URL token.
URL_LEMMA = "http"
#: Lemma assigned to every numeric token.
NUMBER_LEMMA = "NUM"

#: Vowels eligible for run collapsing, including accented forms.
_VOWELS = "aeiouáéíóúü"


class TokenKind(str, Enum):
    WORD = "Word"
    EMOTICON = "Emoticon"
    URL = "Url"
    NUMBER = "Number"


@dataclass(frozen=True)
class Token:
    surface: str
    lemma: str
    kind: TokenKind
    stopword: bool = False

    def __post_init__(self) -> None:
        if not self.lemma:
            raise ValueError("token lemma must be non-empty")
        if self.kind is TokenKind.URL and self.lemma != URL_LEMMA:
            raise ValueError("URL tokens must carry the generic lemma")
        if self.kind is TokenKind.EMOTICON and self.lemma != self.surface:
            raise ValueError("emoticon tokens keep their surface as lemma")


@dataclass(frozen=True)
class Lexicon:
    """Flat surface-form to lemma map with identity fallback on misses."""

    entries: dict[str, str]
    provenance: str = ""

    def __post_init__(self) -> None:
        for key in self.entries:
            if key != key.lower():
                raise ValueError(f"lexicon keys must be lowercase, got {key!r}")

    def __contains__(self, surface: str) -> bool:
        return surface.lower() in self.entries

    def lookup(self, surface: str) -> str:
        surface = surface.lower()
        return self.entries.get(surface, surface)


@dataclass(frozen=True)
class EmoticonTable:
    """Emoticon patterns, each matched against a whole token."""

    patterns: tuple[re.Pattern[str], ...]
    provenance: str = ""

    def matches(self, surface: str) -> bool:
        return any(p.fullmatch(surface) for p in self.patterns)


# ---------------------------------------------------------------------------
# Resource loading


def _resource_lines(path: str | Path) -> Iterable[tuple[int, str]]:
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield line_no, line


def load_lexicon(path: str | Path) -> Lexicon:
    """Read a TSV lexicon (surface TAB lemma, '#' comments)."""
    entries: dict[str, str] = {}
    for line_no, line in _resource_lines(path):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ValueError(f"{path}:{line_no}: expected 'surface<TAB>lemma'")
        entries[parts[0].lower()] = parts[1]
    return Lexicon(entries=entries, provenance=str(path))


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read one stopword lemma per line; the list must not be empty."""
    words = frozenset(line for _, line in _resource_lines(path))
    if not words:
        raise ValueError(f"{path}: stopword list is empty")
    return words


def load_emoticons(path: str | Path) -> EmoticonTable:
    """Read one regular expression per line, each fullmatched against tokens."""
    patterns = []
    for line_no, line in _resource_lines(path):
        try:
            patterns.append(re.compile(line))
        except re.error as exc:
            raise ValueError(f"{path}:{line_no}: bad pattern ({exc})") from None
    return EmoticonTable(patterns=tuple(patterns), provenance=str(path))


def default_resource_path(name: str) -> Path:
    return Path(str(importlib_resources.files("discoursekit") / "resources" / name))


def load_default_resources() -> tuple[Lexicon, frozenset[str], EmoticonTable]:
    """The bundled Spanish lexicon, stopword list and emoticon table."""
    return (
        load_lexicon(default_resource_path("lexicon.tsv")),
        load_stopwords(default_resource_path("stopwords.txt")),
        load_emoticons(default_resource_path("emoticons.txt")),
    )


# ---------------------------------------------------------------------------
# Pipeline stages

_DEFAULT_EMOTICONS: EmoticonTable | None = None


def _default_emoticons() -> EmoticonTable:
    global _DEFAULT_EMOTICONS
    if _DEFAULT_EMOTICONS is None:
        _DEFAULT_EMOTICONS = load_emoticons(default_resource_path("emoticons.txt"))
    return _DEFAULT_EMOTICONS


def _is_protected(piece: str, emoticons: EmoticonTable) -> bool:
    return bool(_URL_RE.fullmatch(piece)) or emoticons.matches(piece)


def _peel(piece: str, emoticons: EmoticonTable) -> str:
    """Remove leading/trailing punctuation one character at a time, stopping
    as soon as the remainder is a recognized emoticon or URL."""
    while piece and not _is_protected(piece, emoticons):
        if not piece[-1].isalnum():
            piece = piece[:-1]
        elif not piece[0].isalnum():
            piece = piece[1:]
        else:
            break
    return piece


def tokenize(text: str, emoticons: EmoticonTable | None = None) -> list[str]:
    """Split into surface tokens; word tokens come out lowercased, emoticon
    and URL surfaces verbatim."""
    if emoticons is None:
        emoticons = _default_emoticons()
    out: list[str] = []
    for piece in text.split():
        piece = _peel(piece, emoticons)
        if not piece:
            continue
        if _is_protected(piece, emoticons):
            out.append(piece)
        else:
            out.append(piece.lower())
    return out


def _collapse_vowel_runs(word: str, min_run: int) -> str:
    chars: list[str] = []
    run = 0
    for ch in word:
        if chars and ch == chars[-1] and ch in _VOWELS:
            run += 1
            if run + 1 >= min_run:
                # Drop the whole run down to a single vowel.
                while len(chars) > 1 and chars[-1] == ch == chars[-2]:
                    chars.pop()
                continue
        else:
            run = 0
        chars.append(ch)
    return "".join(chars)


def repair_vowel_runs(word: str, lex: Lexicon) -> str:
    """Collapse runs of three or more identical vowels; collapse double
    vowels too, but only when the word is still unknown to the lexicon
    (protecting legitimate forms such as "leer")."""
    repaired = _collapse_vowel_runs(word, min_run=3)
    if repaired not in lex:
        repaired = _collapse_vowel_runs(repaired, min_run=2)
    return repaired


def normalize_token(
    surface: str, lex: Lexicon, emoticons: EmoticonTable | None = None
) -> Token:
    """Type one surface token and attach its lemma."""
    if not surface:
        raise ValueError("cannot normalize an empty surface")
    if emoticons is None:
        emoticons = _default_emoticons()
    if _URL_RE.fullmatch(surface):
        return Token(surface=surface, lemma=URL_LEMMA, kind=TokenKind.URL)
    if emoticons.matches(surface):
        return Token(surface=surface, lemma=surface, kind=TokenKind.EMOTICON)
    if _NUMBER_RE.fullmatch(surface):
        return Token(surface=surface, lemma=NUMBER_LEMMA, kind=TokenKind.NUMBER)
    repaired = repair_vowel_runs(surface, lex)
    return Token(surface=surface, lemma=lex.lookup(repaired), kind=TokenKind.WORD)


def lemmatize_and_filter(tokens: Sequence[Token], stop: frozenset[str]) -> list[Token]:
    """Drop word tokens whose lemma is a stopword; never drop the rest."""
    out: list[Token] = []
    for tok in tokens:
        if tok.kind is TokenKind.WORD and tok.lemma in stop:
            continue
        out.append(tok)
    return out


def preprocess(
    text: str,
    lex: Lexicon,
    stop: frozenset[str],
    emoticons: EmoticonTable | None = None,
) -> list[str]:
    """Full pipeline: raw text to the ordered list of retained lemmas."""
    if emoticons is None:
        emoticons = _default_emoticons()
    tokens = [normalize_token(s, lex, emoticons) for s in tokenize(text, emoticons)]
    return [tok.lemma for tok in lemmatize_and_filter(tokens, stop)]
