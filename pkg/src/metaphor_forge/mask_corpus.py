"""Metaphor-masked parallel data construction and vocabulary management.

Verb-labeled corpus lines come in as ``label TAB verb_index TAB tokens``
(label M or L).  Each instance is trimmed to a window around its verb, then
turned into a source/target pair: metaphoric verbs are replaced by the
reserved mask token on the source side, literal instances mirror themselves.
The vocabulary is built from target-side frequencies under a hard cap, with
five reserved ids in front.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import BinaryIO, Iterable, Sequence, TextIO

__all__ = [
    "PAD", "BOS", "EOS", "UNK", "MET",
    "PAD_ID", "BOS_ID", "EOS_ID", "UNK_ID", "MET_ID",
    "Label",
    "LabeledVerbInstance",
    "ParallelPair",
    "Vocab",
    "MaskingConfig",
    "DatasetCounts",
    "CorpusFormatError",
    "TestSetContaminationError",
    "read_corpus",
    "window_trim",
    "make_pair",
    "build_dataset",
    "encode",
    "decode",
    "sentence_hash",
    "save_vocab", "load_vocab",
    "save_pairs", "load_pairs",
]

PAD, BOS, EOS, UNK, MET = "<pad>", "<bos>", "<eos>", "<unk>", "<met>"
RESERVED = (PAD, BOS, EOS, UNK, MET)
PAD_ID, BOS_ID, EOS_ID, UNK_ID, MET_ID = range(5)


class CorpusFormatError(ValueError):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class TestSetContaminationError(ValueError):
    """A training instance hashes to a held-out test sentence."""

    __test__ = False  # not a test class despite the name


class Label(str, Enum):
    METAPHORIC = "M"
    LITERAL = "L"


@dataclass(frozen=True)
class LabeledVerbInstance:
    tokens: tuple[str, ...]
    verb_index: int
    label: Label
    source_corpus: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not (0 <= self.verb_index < len(self.tokens)):
            raise ValueError(
                f"verb_index {self.verb_index} out of range for {len(self.tokens)} tokens"
            )


@dataclass(frozen=True)
class ParallelPair:
    source: tuple[str, ...]
    target: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "source", tuple(self.source))
        object.__setattr__(self, "target", tuple(self.target))
        if len(self.source) != len(self.target):
            raise ValueError("source and target must have equal length")
        diffs = [i for i, (s, t) in enumerate(zip(self.source, self.target)) if s != t]
        if len(diffs) > 1 or (diffs and self.source[diffs[0]] != MET):
            raise ValueError("source may differ from target only at a single mask position")
        if MET in self.target:
            raise ValueError("target side may not contain the mask token")


@dataclass(frozen=True)
class MaskingConfig:
    window: int = 7
    vocab_cap: int = 30_000

    def __post_init__(self) -> None:
        if self.window < 0:
            raise ValueError(f"window must be >= 0, got {self.window}")
        if self.vocab_cap < 1:
            raise ValueError(f"vocab_cap must be >= 1, got {self.vocab_cap}")


@dataclass(frozen=True)
class DatasetCounts:
    pairs: int
    masked: int

    def __str__(self) -> str:
        return f"pairs={self.pairs} masked={self.masked}"


class Vocab:
    """Token <-> id bijection with five reserved ids in front."""

    def __init__(self, tokens: Sequence[str]):
        for tok in tokens:
            if tok in RESERVED:
                raise ValueError(f"reserved token {tok!r} may not appear in the vocabulary body")
        self.token_of: list[str] = list(RESERVED) + list(tokens)
        self.id_of: dict[str, int] = {tok: i for i, tok in enumerate(self.token_of)}
        if len(self.id_of) != len(self.token_of):
            raise ValueError("duplicate token in vocabulary")

    def __len__(self) -> int:
        return len(self.token_of)

    def __contains__(self, token: str) -> bool:
        return token in self.id_of


def read_corpus(source: BinaryIO, source_corpus: str = "") -> list[LabeledVerbInstance]:
    instances = []
    for line_number, raw in enumerate(source, start=1):
        line = raw.decode("utf-8").rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise CorpusFormatError(
                f"expected 'label TAB verb_index TAB tokens', got {len(parts)} fields", line_number
            )
        try:
            label = Label(parts[0])
        except ValueError:
            raise CorpusFormatError(f"unknown label {parts[0]!r}", line_number) from None
        try:
            verb_index = int(parts[1])
        except ValueError:
            raise CorpusFormatError(f"non-integer verb_index {parts[1]!r}", line_number) from None
        tokens = tuple(parts[2].split())
        if not tokens:
            raise CorpusFormatError("empty token list", line_number)
        if not (0 <= verb_index < len(tokens)):
            raise CorpusFormatError(
                f"verb_index {verb_index} out of range for {len(tokens)} tokens", line_number
            )
        instances.append(
            LabeledVerbInstance(tokens, verb_index, label, source_corpus=source_corpus)
        )
    return instances


def window_trim(instance: LabeledVerbInstance, config: MaskingConfig) -> LabeledVerbInstance:
    """Restrict an instance to ``window`` tokens of context per side of the verb."""
    lo = max(0, instance.verb_index - config.window)
    hi = min(len(instance.tokens), instance.verb_index + config.window + 1)
    return LabeledVerbInstance(
        instance.tokens[lo:hi],
        instance.verb_index - lo,
        instance.label,
        source_corpus=instance.source_corpus,
    )


def make_pair(instance: LabeledVerbInstance) -> ParallelPair:
    """Metaphoric instances get the mask on the source side; literal
    instances mirror themselves."""
    if instance.label is Label.METAPHORIC:
        source = list(instance.tokens)
        source[instance.verb_index] = MET
        return ParallelPair(tuple(source), instance.tokens)
    return ParallelPair(instance.tokens, instance.tokens)


def sentence_hash(tokens: Iterable[str]) -> str:
    return hashlib.sha1(" ".join(tokens).encode("utf-8")).hexdigest()


def build_dataset(
    instances: Sequence[LabeledVerbInstance],
    config: MaskingConfig = MaskingConfig(),
    excluded_hashes: set[str] | None = None,
) -> tuple[list[ParallelPair], Vocab, DatasetCounts]:
    """Trim, mask, and index a corpus into training pairs plus vocabulary.

    The vocabulary keeps the ``vocab_cap`` most frequent target-side tokens
    (ties broken lexicographically).  ``excluded_hashes`` guards the held-out
    test partition: any instance whose untrimmed sentence hash appears there
    aborts the build.
    """
    if not instances:
        raise ValueError("instances must be non-empty")
    if excluded_hashes:
        for position, instance in enumerate(instances):
            h = sentence_hash(instance.tokens)
            if h in excluded_hashes:
                raise TestSetContaminationError(
                    f"instance {position} ({' '.join(instance.tokens[:8])}...) "
                    f"hashes to held-out test sentence {h}"
                )
    pairs = [make_pair(window_trim(instance, config)) for instance in instances]
    frequency: dict[str, int] = {}
    for pair in pairs:
        for token in pair.target:
            frequency[token] = frequency.get(token, 0) + 1
    ordered = sorted(frequency, key=lambda tok: (-frequency[tok], tok))
    vocab = Vocab(ordered[: config.vocab_cap])
    masked = sum(1 for pair in pairs if MET in pair.source)
    return pairs, vocab, DatasetCounts(pairs=len(pairs), masked=masked)


def encode(tokens: Iterable[str], vocab: Vocab) -> list[int]:
    """Map tokens to ids, bracketed with BOS/EOS; unknowns become UNK."""
    return [BOS_ID] + [vocab.id_of.get(tok, UNK_ID) for tok in tokens] + [EOS_ID]


def decode(ids: Iterable[int], vocab: Vocab) -> list[str]:
    """Inverse of encode: strips PAD/BOS/EOS, keeps UNK and MET surfaces."""
    out = []
    for i in ids:
        if i in (PAD_ID, BOS_ID, EOS_ID):
            continue
        out.append(vocab.token_of[i])
    return out


def save_vocab(vocab: Vocab, sink: TextIO) -> None:
    for token in vocab.token_of:
        sink.write(token + "\n")


def load_vocab(source: TextIO) -> Vocab:
    tokens = [line.rstrip("\n") for line in source if line.strip()]
    if tuple(tokens[:5]) != RESERVED:
        raise ValueError(f"vocabulary file must start with the reserved tokens {RESERVED}")
    return Vocab(tokens[5:])


def save_pairs(pairs: Iterable[ParallelPair], vocab: Vocab, sink: TextIO) -> None:
    """Persist encoded pairs as ``source-ids TAB target-ids`` lines."""
    for pair in pairs:
        src = " ".join(str(i) for i in encode(pair.source, vocab))
        tgt = " ".join(str(i) for i in encode(pair.target, vocab))
        sink.write(f"{src}\t{tgt}\n")


def load_pairs(source: TextIO) -> list[tuple[list[int], list[int]]]:
    out = []
    for line_number, line in enumerate(source, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise CorpusFormatError("expected 'source-ids TAB target-ids'", line_number)
        out.append(
            ([int(t) for t in parts[0].split()], [int(t) for t in parts[1].split()])
        )
    return out
