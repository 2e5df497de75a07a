"""Lexical replacement: swap a marked literal verb for the troponym that
best matches the mean context embedding.

Pipeline for one sentence: lemmatize the marked verb, pool troponym
candidates across all of its senses, rank every in-vocabulary candidate by
cosine against the mean embedding of the remaining tokens, then re-inflect
the winner to match the original surface form.  The context mean excludes
the verb itself so the ranking is not biased toward the input word, and the
input lemma always stays in the pool, so a verb without troponyms
degenerates to self-replacement.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, TextIO

import numpy as np

from .embedding_store import EmbeddingTable, cosine, mean_context_vector
from .text_core import TokenSentence, detokenize, inflect_like, lemma_candidates, tokenize
from .wordnet_store import WordNetGraph, candidate_lemmas

__all__ = [
    "ParticlePolicy",
    "LexRepConfig",
    "ReplacementResult",
    "MissingVerbIndexError",
    "NoCandidateInVocabularyError",
    "rank_candidates",
    "generate_lexical_paraphrase",
    "run_batch",
]


class MissingVerbIndexError(ValueError):
    pass


class NoCandidateInVocabularyError(ValueError):
    """Every candidate lemma was dropped by the vocabulary filter."""


class ParticlePolicy(str, Enum):
    VERB_ONLY = "verb_only"
    VERB_AND_PARTICLE = "verb_and_particle"


@dataclass(frozen=True)
class LexRepConfig:
    depth: int = 1
    include_multiword: bool = False
    inflect: bool = True
    replace_particle: ParticlePolicy = ParticlePolicy.VERB_ONLY
    worst_fit: bool = False

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")


@dataclass(frozen=True)
class ReplacementResult:
    input: TokenSentence
    chosen_lemma: str
    chosen_surface: str
    output: TokenSentence
    ranked_candidates: tuple[tuple[str, float], ...] = field(repr=False)


def rank_candidates(
    candidates: Iterable[str],
    context_mean: np.ndarray,
    table: EmbeddingTable,
    ascending: bool = False,
) -> list[tuple[str, float]]:
    """Score in-vocabulary candidates by cosine against the context mean.

    Sorted best-first (descending score, or ascending in worst-fit mode);
    exact score ties break lexicographically by lemma.  Out-of-vocabulary
    candidates are dropped; if none survive,
    :class:`NoCandidateInVocabularyError`.
    """
    pool = set(candidates)
    if not pool:
        raise ValueError("candidates must be non-empty")
    scored = [
        (lemma, cosine(table.vector(lemma), context_mean)) for lemma in pool if lemma in table
    ]
    if not scored:
        raise NoCandidateInVocabularyError(
            f"none of {len(pool)} candidate lemmas has an embedding"
        )
    sign = 1.0 if ascending else -1.0
    scored.sort(key=lambda pair: (sign * pair[1], pair[0]))
    return scored


def _resolve_lemma(surface: str, graph: WordNetGraph) -> str:
    for guess in lemma_candidates(surface):
        if guess in graph.by_lemma:
            return guess
    return surface


def generate_lexical_paraphrase(
    sentence: TokenSentence,
    graph: WordNetGraph,
    table: EmbeddingTable,
    config: LexRepConfig = LexRepConfig(),
) -> ReplacementResult:
    """Replace the marked verb of ``sentence`` with its best-fitting troponym."""
    if sentence.verb_index is None:
        raise MissingVerbIndexError("sentence has no marked verb to replace")
    verb_surface = sentence.verb
    verb_lemma = _resolve_lemma(verb_surface, graph)
    candidates = candidate_lemmas(
        graph, verb_lemma, depth=config.depth, include_multiword=config.include_multiword
    )

    drop_particle = (
        config.replace_particle is ParticlePolicy.VERB_AND_PARTICLE
        and sentence.particle_index is not None
    )
    excluded = {sentence.verb_index}
    if drop_particle:
        excluded.add(sentence.particle_index)
    context = [tok for i, tok in enumerate(sentence.tokens) if i not in excluded]
    if not context:
        raise ValueError("sentence has no context tokens besides the verb")
    context_mean = mean_context_vector(table, context)

    ranked = rank_candidates(candidates, context_mean, table, ascending=config.worst_fit)
    chosen_lemma = ranked[0][0]
    if config.inflect:
        chosen_surface = inflect_like(chosen_lemma, verb_surface, verb_lemma)
    else:
        chosen_surface = chosen_lemma

    tokens = list(sentence.tokens)
    tokens[sentence.verb_index] = chosen_surface
    if drop_particle:
        del tokens[sentence.particle_index]
    output = TokenSentence(tuple(tokens), verb_index=sentence.verb_index)
    return ReplacementResult(
        input=sentence,
        chosen_lemma=chosen_lemma,
        chosen_surface=chosen_surface,
        output=output,
        ranked_candidates=tuple(ranked),
    )


def run_batch(
    lines: Iterable[str],
    graph: WordNetGraph,
    table: EmbeddingTable,
    config: LexRepConfig,
    sink: TextIO,
    top_k: int = 5,
) -> tuple[int, int]:
    """Paraphrase a ``sentence TAB verb_index [TAB particle_index]`` stream.

    Writes one JSON record per input line; sentence-level ranking failures
    (e.g. fully out-of-vocabulary contexts) are recorded in the output
    rather than aborting the batch.  Returns (ok, failed) counts.
    """
    ok = failed = 0
    for line_number, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise ValueError(
                f"line {line_number}: expected 'sentence TAB verb_index', got {line!r}"
            )
        sentence = tokenize(parts[0], verb_index=int(parts[1]))
        if len(parts) == 3:
            sentence = TokenSentence(
                sentence.tokens, sentence.verb_index, particle_index=int(parts[2])
            )
        record: dict = {"input": detokenize(sentence), "verb_index": sentence.verb_index}
        try:
            result = generate_lexical_paraphrase(sentence, graph, table, config)
        except (NoCandidateInVocabularyError, KeyError, ValueError) as exc:
            record["error"] = str(exc)
            failed += 1
        else:
            record["output"] = detokenize(result.output)
            record["chosen"] = result.chosen_lemma
            record["candidates"] = [
                {"lemma": lemma, "score": round(score, 6)}
                for lemma, score in result.ranked_candidates[:top_k]
            ]
            ok += 1
        sink.write(json.dumps(record) + "\n")
    return ok, failed
