"""Parser for the WordNet verb database files plus troponym traversal.

Reads the Princeton WordNet 3.x ``index.verb`` / ``data.verb`` grammar (the
bundled miniature fixture uses the same grammar, byte for byte).  Only the
verb hyponym (troponym) edge ``~`` and hypernym edge ``@`` are retained;
every other pointer symbol is skipped, as are the verb frame fields between
the pointer block and the gloss separator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, NamedTuple

__all__ = [
    "SynsetId",
    "Synset",
    "WordNetGraph",
    "WordNetFormatError",
    "DanglingReferenceError",
    "load_wordnet",
    "synsets_of",
    "candidate_lemmas",
]

VERB_POS = "v"


class WordNetFormatError(ValueError):
    """A line that does not match the database grammar."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DanglingReferenceError(ValueError):
    """A relation edge points at a synset offset absent from the data file."""

    def __init__(self, offset: int):
        super().__init__(f"relation edge references unknown synset offset {offset:08d}")
        self.offset = offset


class SynsetId(NamedTuple):
    offset: int
    pos: str = VERB_POS


@dataclass(frozen=True)
class Synset:
    id: SynsetId
    lemmas: tuple[str, ...]
    troponym_ids: tuple[SynsetId, ...]
    hypernym_ids: tuple[SynsetId, ...]
    gloss: str


@dataclass
class WordNetGraph:
    """Immutable-after-load verb graph: synset table plus lemma index."""

    by_id: dict[SynsetId, Synset] = field(default_factory=dict)
    by_lemma: dict[str, list[SynsetId]] = field(default_factory=dict)


def _is_comment(line: str) -> bool:
    # License header lines in the distributed files start with two spaces.
    return line.startswith("  ") or not line.strip()


def _parse_data_line(line: str, line_number: int) -> Synset:
    head, sep, gloss = line.partition("|")
    if not sep:
        raise WordNetFormatError("missing '|' gloss separator", line_number)
    fields = head.split()
    try:
        offset = int(fields[0])
        ss_type = fields[2]
        w_cnt = int(fields[3], 16)
    except (IndexError, ValueError) as exc:
        raise WordNetFormatError(f"bad synset header: {exc}", line_number) from None
    if ss_type != VERB_POS:
        raise WordNetFormatError(f"expected verb synset, got ss_type {ss_type!r}", line_number)
    pos = 4
    lemmas = []
    try:
        for _ in range(w_cnt):
            lemmas.append(fields[pos].lower())
            int(fields[pos + 1], 16)  # lex_id, validated but unused
            pos += 2
        p_cnt = int(fields[pos])
        pos += 1
        troponyms: list[SynsetId] = []
        hypernyms: list[SynsetId] = []
        for _ in range(p_cnt):
            symbol = fields[pos]
            target = SynsetId(int(fields[pos + 1]), fields[pos + 2])
            int(fields[pos + 3], 16)  # source/target field, validated but unused
            pos += 4
            if symbol == "~" and target not in troponyms:
                troponyms.append(target)
            elif symbol == "@" and target not in hypernyms:
                hypernyms.append(target)
    except (IndexError, ValueError) as exc:
        raise WordNetFormatError(f"bad synset body: {exc}", line_number) from None
    if not lemmas:
        raise WordNetFormatError("synset with zero lemmas", line_number)
    # Remaining fields are the verb frame block; skipped.
    return Synset(
        id=SynsetId(offset),
        lemmas=tuple(lemmas),
        troponym_ids=tuple(troponyms),
        hypernym_ids=tuple(hypernyms),
        gloss=gloss.strip(),
    )


def _parse_index_line(line: str, line_number: int) -> tuple[str, list[SynsetId]]:
    fields = line.split()
    try:
        lemma = fields[0].lower()
        pos = fields[1]
        synset_cnt = int(fields[2])
        p_cnt = int(fields[3])
        offsets_start = 4 + p_cnt + 2  # skip pointer symbols, sense_cnt, tagsense_cnt
        offsets = [SynsetId(int(f)) for f in fields[offsets_start : offsets_start + synset_cnt]]
    except (IndexError, ValueError) as exc:
        raise WordNetFormatError(f"bad index line: {exc}", line_number) from None
    if pos != VERB_POS:
        raise WordNetFormatError(f"expected verb index entry, got pos {pos!r}", line_number)
    if len(offsets) != synset_cnt:
        raise WordNetFormatError(
            f"index declares {synset_cnt} synsets but lists {len(offsets)}", line_number
        )
    return lemma, offsets


def load_wordnet(index_source: BinaryIO, data_source: BinaryIO) -> WordNetGraph:
    """Parse ``index.verb`` and ``data.verb`` streams into a WordNetGraph.

    Raises :class:`WordNetFormatError` (with line number) on malformed lines
    and :class:`DanglingReferenceError` when a ``~``/``@`` edge points at an
    offset missing from the data file.
    """
    graph = WordNetGraph()
    for line_number, raw in enumerate(_text_lines(data_source), start=1):
        if _is_comment(raw):
            continue
        synset = _parse_data_line(raw, line_number)
        graph.by_id[synset.id] = synset
    for synset in graph.by_id.values():
        for target in synset.troponym_ids + synset.hypernym_ids:
            if target not in graph.by_id:
                raise DanglingReferenceError(target.offset)
    for line_number, raw in enumerate(_text_lines(index_source), start=1):
        if _is_comment(raw):
            continue
        lemma, ids = _parse_index_line(raw, line_number)
        for sid in ids:
            if sid not in graph.by_id:
                raise DanglingReferenceError(sid.offset)
        graph.by_lemma[lemma] = ids
    return graph


def _text_lines(source: BinaryIO) -> Iterable[str]:
    for raw in source:
        yield raw.decode("utf-8", errors="replace").rstrip("\n")


def synsets_of(graph: WordNetGraph, lemma: str) -> list[SynsetId]:
    """Sense-ordered synsets of ``lemma``; empty list when unknown."""
    return list(graph.by_lemma.get(lemma, ()))


def candidate_lemmas(
    graph: WordNetGraph,
    verb_lemma: str,
    depth: int = 1,
    include_multiword: bool = False,
) -> set[str]:
    """Replacement candidates: troponym lemmas within ``depth`` edges.

    Pools troponyms across all senses of the input lemma and always includes
    the input itself, so a verb without troponyms degenerates to
    self-replacement.  Multiword lemmas (underscore-joined) are excluded
    unless ``include_multiword`` is set.  Cycle-safe via a visited set.
    """
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    candidates = {verb_lemma}
    frontier = list(synsets_of(graph, verb_lemma))
    visited = set(frontier)
    for _ in range(depth):
        next_frontier: list[SynsetId] = []
        for sid in frontier:
            for tid in graph.by_id[sid].troponym_ids:
                for lemma in graph.by_id[tid].lemmas:
                    if include_multiword or "_" not in lemma:
                        candidates.add(lemma)
                if tid not in visited:
                    visited.add(tid)
                    next_frontier.append(tid)
        frontier = next_frontier
        if not frontier:
            break
    return candidates
