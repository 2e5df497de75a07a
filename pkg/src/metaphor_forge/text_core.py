"""Tokenization, detokenization, and heuristic verb re-inflection.

All functions here are pure and operate on :class:`TokenSentence`, the unit
both generation pipelines consume.  The conventions are deliberately simple:
lowercase everything, split sentence punctuation into standalone tokens, keep
contraction apostrophes attached, and split the clitic ``'s`` off its host.
Inflection is rule-based (no lexicon); irregular verbs are not handled.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "TokenSentence",
    "EmptyInputError",
    "tokenize",
    "detokenize",
    "inflect_like",
    "lemma_candidates",
]


class EmptyInputError(ValueError):
    """Raised when tokenize receives whitespace-only input."""


# Punctuation split into standalone tokens.  The apostrophe is handled
# separately so contractions ("don't") survive intact.
_SPLIT_PUNCT = frozenset(".,!?;:\"")

# Tokens detokenize glues onto the preceding token (clitics and closing
# punctuation).  Double quotes are left space-separated: without pairing
# state there is no way to tell an opening from a closing quote.
_ATTACH_LEFT = frozenset({".", ",", "!", "?", ";", ":", "'", "'s"})

_VOWELS = frozenset("aeiou")


@dataclass(frozen=True)
class TokenSentence:
    """A tokenized sentence with an optionally marked target verb.

    ``verb_index`` points at the verb both pipelines operate on; positions
    arrive annotated with the data, they are never guessed.  ``particle_index``
    marks a particle belonging to the verb ("use up"), always after it.
    """

    tokens: tuple[str, ...]
    verb_index: int | None = None
    particle_index: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if any(tok == "" for tok in self.tokens):
            raise ValueError("TokenSentence may not contain empty tokens")
        if self.verb_index is not None and not (0 <= self.verb_index < len(self.tokens)):
            raise ValueError(
                f"verb_index {self.verb_index} out of range for {len(self.tokens)} tokens"
            )
        if self.particle_index is not None:
            if self.verb_index is None:
                raise ValueError("particle_index requires verb_index")
            if not (self.verb_index < self.particle_index < len(self.tokens)):
                raise ValueError(f"particle_index {self.particle_index} out of range")

    @property
    def verb(self) -> str:
        if self.verb_index is None:
            raise ValueError("sentence has no marked verb")
        return self.tokens[self.verb_index]

    def __len__(self) -> int:
        return len(self.tokens)


def tokenize(text: str, verb_index: int | None = None) -> TokenSentence:
    """Lowercase and split ``text`` into tokens.

    Sentence punctuation (``. , ! ? ' " ; :``) becomes standalone tokens,
    except apostrophes inside contractions, which stay attached; a final
    ``'s`` clitic is split off its host ("lake's" -> "lake", "'s").
    """
    stripped = text.strip()
    if not stripped:
        raise EmptyInputError("cannot tokenize empty or whitespace-only text")
    tokens: list[str] = []
    for chunk in stripped.lower().split():
        tokens.extend(_split_chunk(chunk))
    return TokenSentence(tuple(tokens), verb_index=verb_index)


def _split_chunk(chunk: str) -> list[str]:
    parts: list[str] = []
    cur: list[str] = []
    i, n = 0, len(chunk)
    while i < n:
        ch = chunk[i]
        if (
            ch == "'"
            and cur
            and i + 1 < n
            and chunk[i + 1] == "s"
            and (i + 2 == n or not chunk[i + 2].isalnum())
        ):
            # clitic 's at the end of a word-piece
            parts.append("".join(cur))
            cur = []
            parts.append("'s")
            i += 2
        elif ch == "'" and cur and i + 1 < n and chunk[i + 1].isalnum():
            # internal apostrophe: contraction, keep attached
            cur.append(ch)
            i += 1
        elif ch in _SPLIT_PUNCT or ch == "'":
            if cur:
                parts.append("".join(cur))
                cur = []
            parts.append(ch)
            i += 1
        else:
            cur.append(ch)
            i += 1
    if cur:
        parts.append("".join(cur))
    return parts


def detokenize(sentence: TokenSentence) -> str:
    """Join tokens with spaces, reattaching ``'s`` and closing punctuation."""
    if not sentence.tokens:
        raise ValueError("cannot detokenize an empty sentence")
    pieces = [sentence.tokens[0]]
    for tok in sentence.tokens[1:]:
        if tok in _ATTACH_LEFT:
            pieces[-1] += tok
        else:
            pieces.append(tok)
    return " ".join(pieces)


def _is_cvc_monosyllable(word: str) -> bool:
    # One vowel group, ending consonant-vowel-consonant with a doubling-safe
    # final consonant ("stop" yes, "show" no, "visit" no: two syllables).
    if len(word) < 3:
        return False
    c = word[-1]
    if c in _VOWELS or c in "wxy":
        return False
    if word[-2] not in _VOWELS or word[-3] in _VOWELS:
        return False
    groups = 0
    prev_vowel = False
    for ch in word:
        is_vowel = ch in _VOWELS or ch == "y"
        if is_vowel and not prev_vowel:
            groups += 1
        prev_vowel = is_vowel
    return groups == 1


def _apply_suffix(lemma: str, category: str) -> str:
    """Inflect ``lemma`` into one of the categories base / s / ed / ing."""
    if category == "base":
        return lemma
    if category == "s":
        if len(lemma) > 1 and lemma.endswith("y") and lemma[-2] not in _VOWELS:
            return lemma[:-1] + "ies"
        if lemma.endswith(("s", "x", "z", "ch", "sh")):
            return lemma + "es"
        return lemma + "s"
    if category == "ed":
        if lemma.endswith("e"):
            return lemma + "d"
        if len(lemma) > 1 and lemma.endswith("y") and lemma[-2] not in _VOWELS:
            return lemma[:-1] + "ied"
        if _is_cvc_monosyllable(lemma):
            return lemma + lemma[-1] + "ed"
        return lemma + "ed"
    if category == "ing":
        if lemma.endswith("e") and not lemma.endswith("ee"):
            return lemma[:-1] + "ing"
        if _is_cvc_monosyllable(lemma):
            return lemma + lemma[-1] + "ing"
        return lemma + "ing"
    raise ValueError(f"unknown suffix category {category!r}")


def _detect_category(surface: str, lemma: str) -> str | None:
    for category in ("base", "s", "ed", "ing"):
        if _apply_suffix(lemma, category) == surface:
            return category
    return None


def inflect_like(lemma: str, exemplar_surface: str, exemplar_lemma: str) -> str:
    """Inflect ``lemma`` with the suffix category detected on the exemplar.

    Total: when the exemplar's category cannot be detected (irregular forms,
    typos), the lemma comes back unchanged.
    """
    category = _detect_category(exemplar_surface, exemplar_lemma)
    if category is None:
        return lemma
    return _apply_suffix(lemma, category)


def lemma_candidates(surface: str) -> list[str]:
    """Ordered lemma guesses for a verb surface form, most specific first.

    Un-applies the -s/-ed/-ing rules (with e-restoration and un-doubling);
    the surface itself is always the first guess.  Callers pick the first
    guess their lexicon knows.
    """
    guesses = [surface]

    def add(g: str) -> None:
        if g and g not in guesses:
            guesses.append(g)

    if surface.endswith("ies"):
        add(surface[:-3] + "y")
    if surface.endswith("es"):
        add(surface[:-2])
    if surface.endswith("s") and not surface.endswith("ss"):
        add(surface[:-1])
    if surface.endswith("ied"):
        add(surface[:-3] + "y")
    if surface.endswith("ed"):
        stem = surface[:-2]
        add(stem)
        add(stem + "e")
        if len(stem) >= 2 and stem[-1] == stem[-2]:
            add(stem[:-1])
    if surface.endswith("ing"):
        stem = surface[:-3]
        add(stem)
        add(stem + "e")
        if len(stem) >= 2 and stem[-1] == stem[-2]:
            add(stem[:-1])
    return guesses
