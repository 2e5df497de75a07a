"""Word-vector loading (word2vec text and binary formats) and the cosine /
mean-context machinery the candidate-ranking step is built on.

Vectors are stored raw; nothing is normalized on load.  An optional vocab
filter keeps memory bounded when reading the multi-gigabyte distributions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Sequence

import numpy as np

__all__ = [
    "EmbeddingTable",
    "EmbeddingFormatError",
    "TruncatedStreamError",
    "ZeroVectorError",
    "DimensionMismatchError",
    "OutOfVocabularyError",
    "load_text_embeddings",
    "load_binary_embeddings",
    "write_text_embeddings",
    "write_binary_embeddings",
    "cosine",
    "mean_context_vector",
]


class EmbeddingFormatError(ValueError):
    """Malformed header or vector line."""


class TruncatedStreamError(EmbeddingFormatError):
    """Binary stream ended before the promised payload."""


class ZeroVectorError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


class OutOfVocabularyError(KeyError):
    """No requested word has a vector; the caller cannot rank this context."""


@dataclass
class EmbeddingTable:
    dim: int
    entries: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        for word, vec in self.entries.items():
            if vec.shape != (self.dim,):
                raise DimensionMismatchError(
                    f"vector for {word!r} has shape {vec.shape}, expected ({self.dim},)"
                )

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def vector(self, word: str) -> np.ndarray:
        return self.entries[word]


def _parse_header(line: str) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 2:
        raise EmbeddingFormatError(f"expected '<count> <dim>' header, got {line!r}")
    try:
        count, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise EmbeddingFormatError(f"non-integer header fields in {line!r}") from None
    if count < 0 or dim < 1:
        raise EmbeddingFormatError(f"nonsensical header {line!r}")
    return count, dim


def _warn_count_mismatch(declared: int, loaded: int, filtered: bool) -> None:
    if not filtered and loaded != declared:
        warnings.warn(
            f"header declared {declared} vectors but stream held {loaded}",
            stacklevel=3,
        )


def load_text_embeddings(
    source: BinaryIO, vocab_filter: set[str] | None = None
) -> EmbeddingTable:
    """Read the word2vec text format: a ``<count> <dim>`` header line, then
    one ``word c1 ... c_dim`` line per vector."""
    header = source.readline().decode("utf-8")
    count, dim = _parse_header(header)
    entries: dict[str, np.ndarray] = {}
    seen = 0
    for raw in source:
        line = raw.decode("utf-8").strip()
        if not line:
            continue
        seen += 1
        parts = line.split()
        word = parts[0]
        if len(parts) != dim + 1:
            raise EmbeddingFormatError(
                f"vector for {word!r} has {len(parts) - 1} components, expected {dim}"
            )
        if vocab_filter is not None and word not in vocab_filter:
            continue
        try:
            entries[word] = np.array(parts[1:], dtype=np.float32)
        except ValueError:
            raise EmbeddingFormatError(
                f"non-numeric component in vector for {word!r}"
            ) from None
    _warn_count_mismatch(count, seen, vocab_filter is not None)
    return EmbeddingTable(dim=dim, entries=entries)


def load_binary_embeddings(
    source: BinaryIO, vocab_filter: set[str] | None = None
) -> EmbeddingTable:
    """Read the classic word2vec binary layout: text header, then per word
    the word bytes terminated by a space followed by ``dim`` little-endian
    float32 components (an optional newline may trail each record)."""
    header = _read_binary_line(source)
    count, dim = _parse_header(header)
    vec_bytes = 4 * dim
    entries: dict[str, np.ndarray] = {}
    seen = 0
    while True:
        word = _read_binary_word(source)
        if word is None:
            break
        payload = source.read(vec_bytes)
        if len(payload) != vec_bytes:
            raise TruncatedStreamError(
                f"vector payload for {word!r} truncated ({len(payload)}/{vec_bytes} bytes)"
            )
        seen += 1
        if vocab_filter is not None and word not in vocab_filter:
            continue
        entries[word] = np.frombuffer(payload, dtype="<f4").copy()
    _warn_count_mismatch(count, seen, vocab_filter is not None)
    return EmbeddingTable(dim=dim, entries=entries)


def _read_binary_line(source: BinaryIO) -> str:
    chars = bytearray()
    while True:
        b = source.read(1)
        if not b:
            raise TruncatedStreamError("stream ended inside the header line")
        if b == b"\n":
            return chars.decode("utf-8")
        chars.extend(b)


def _read_binary_word(source: BinaryIO) -> str | None:
    chars = bytearray()
    while True:
        b = source.read(1)
        if not b:
            if chars:
                raise TruncatedStreamError("stream ended inside a word")
            return None
        if b == b" ":
            return chars.decode("utf-8")
        if b == b"\n" and not chars:
            continue  # record separator before the next word
        chars.extend(b)


def write_text_embeddings(table: EmbeddingTable, sink) -> None:
    sink.write(f"{len(table.entries)} {table.dim}\n".encode("utf-8"))
    for word, vec in table.entries.items():
        comps = " ".join(repr(float(c)) for c in vec)
        sink.write(f"{word} {comps}\n".encode("utf-8"))


def write_binary_embeddings(table: EmbeddingTable, sink) -> None:
    sink.write(f"{len(table.entries)} {table.dim}\n".encode("utf-8"))
    for word, vec in table.entries.items():
        sink.write(word.encode("utf-8") + b" ")
        sink.write(np.asarray(vec, dtype="<f4").tobytes())
        sink.write(b"\n")


def cosine(u: Sequence[float] | np.ndarray, v: Sequence[float] | np.ndarray) -> float:
    """Cosine similarity, clamped into [-1, 1] against rounding overshoot."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatchError(f"shapes differ: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVectorError("cosine undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def mean_context_vector(table: EmbeddingTable, context_words: Iterable[str]) -> np.ndarray:
    """Arithmetic mean of the in-vocabulary context vectors.

    Out-of-vocabulary words are skipped rather than zero-imputed; if nothing
    is left, :class:`OutOfVocabularyError` signals the sentence cannot be
    ranked.
    """
    words = list(context_words)
    if not words:
        raise ValueError("context_words must be non-empty")
    vecs = [table.entries[w] for w in words if w in table.entries]
    if not vecs:
        raise OutOfVocabularyError(f"no context word of {words!r} is in vocabulary")
    return np.mean(np.stack(vecs).astype(np.float64), axis=0)
