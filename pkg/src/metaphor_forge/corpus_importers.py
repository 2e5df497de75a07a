"""Converters from four third-party annotation schemata to the line format.

The real corpora are licensed and not bundled; each converter is exercised
only on a miniature excerpt that mimics the relevant structure:

* XML word-level markup: ``<s>`` sentences of ``<w pos="...">`` tokens,
  metaphoric words wrapped in ``<seg function="mrw">`` (metaphor-related
  word).  Verbs are tokens whose pos starts with ``V``.
* verb/sentence/class tables: comma-separated columns ``term``,
  ``sentence``, ``class`` with class ``metaphorical`` or ``literal``; the
  verb is located by inflection-aware lemma matching.
* clustered plain text: ``***verb***`` section headers followed by
  ``*literal cluster*`` / ``*nonliteral cluster*`` blocks of
  ``id sentence`` lines, already space-tokenized.
* JSON lines: records with ``sentence``, ``verb_index``, and a boolean
  ``metaphor`` flag over space-split tokens.

Every converter returns :class:`LabeledVerbInstance` rows; ``write_corpus``
serializes them to the ``label TAB verb_index TAB tokens`` format the rest
of the pipeline reads.
"""

from __future__ import annotations

import csv
import json
import xml.etree.ElementTree as ET
from typing import Iterable, TextIO

from .mask_corpus import Label, LabeledVerbInstance
from .text_core import lemma_candidates, tokenize

__all__ = [
    "ImportError_",
    "import_word_markup_xml",
    "import_term_table",
    "import_clustered_text",
    "import_json_lines",
    "write_corpus",
]


class ImportError_(ValueError):
    """Raised when an excerpt does not follow its announced structure."""


def _instance(tokens, verb_index, metaphoric, source) -> LabeledVerbInstance:
    return LabeledVerbInstance(
        tokens=tuple(tokens),
        verb_index=verb_index,
        label=Label.METAPHORIC if metaphoric else Label.LITERAL,
        source_corpus=source,
    )


def import_word_markup_xml(source: TextIO, source_name: str = "word-markup-xml") -> list[LabeledVerbInstance]:
    """One instance per verb token; metaphoric if wrapped in a mrw segment."""
    try:
        root = ET.parse(source).getroot()
    except ET.ParseError as exc:
        raise ImportError_(f"malformed XML: {exc}") from exc
    instances = []
    for sentence in root.iter("s"):
        tokens: list[str] = []
        verbs: list[tuple[int, bool]] = []
        for word in sentence.iter("w"):
            seg = word.find("seg")
            if seg is not None:
                text = (seg.text or "").strip()
                metaphoric = seg.get("function") == "mrw"
            else:
                text = (word.text or "").strip()
                metaphoric = False
            if not text:
                raise ImportError_("empty <w> token")
            if (word.get("pos") or "").startswith("V"):
                verbs.append((len(tokens), metaphoric))
            tokens.append(text.lower())
        for index, metaphoric in verbs:
            instances.append(_instance(tokens, index, metaphoric, source_name))
    return instances


def _locate_verb(tokens: Iterable[str], term: str) -> int | None:
    term = term.lower()
    for index, token in enumerate(tokens):
        if term in lemma_candidates(token):
            return index
    return None


def import_term_table(source: TextIO, source_name: str = "term-table") -> list[LabeledVerbInstance]:
    """CSV of term, sentence, class rows; the verb is found by lemma match."""
    instances = []
    for row_number, row in enumerate(csv.reader(source), start=1):
        if not row or (row_number == 1 and [c.lower() for c in row[:3]] == ["term", "sentence", "class"]):
            continue
        if len(row) != 3:
            raise ImportError_(f"row {row_number}: expected 3 columns, got {len(row)}")
        term, sentence, klass = (c.strip() for c in row)
        if klass not in ("metaphorical", "literal"):
            raise ImportError_(f"row {row_number}: unknown class {klass!r}")
        tokens = tokenize(sentence).tokens
        index = _locate_verb(tokens, term)
        if index is None:
            raise ImportError_(f"row {row_number}: term {term!r} not found in sentence")
        instances.append(_instance(tokens, index, klass == "metaphorical", source_name))
    return instances


def import_clustered_text(source: TextIO, source_name: str = "clustered-text") -> list[LabeledVerbInstance]:
    """Section-per-verb text with literal and nonliteral clusters."""
    instances = []
    verb: str | None = None
    metaphoric: bool | None = None
    for line_number, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("***") and line.endswith("***"):
            verb = line.strip("*").strip().lower()
            metaphoric = None
            continue
        if line == "*nonliteral cluster*":
            metaphoric = True
            continue
        if line == "*literal cluster*":
            metaphoric = False
            continue
        if verb is None or metaphoric is None:
            raise ImportError_(f"line {line_number}: sentence outside any cluster")
        fields = line.split(None, 1)
        if len(fields) != 2:
            raise ImportError_(f"line {line_number}: expected 'id sentence'")
        tokens = [t.lower() for t in fields[1].split()]
        index = _locate_verb(tokens, verb)
        if index is None:
            raise ImportError_(f"line {line_number}: no form of {verb!r} in sentence")
        instances.append(_instance(tokens, index, metaphoric, source_name))
    return instances


def import_json_lines(source: TextIO, source_name: str = "json-lines") -> list[LabeledVerbInstance]:
    """Records with explicit verb_index over space-split tokens."""
    instances = []
    for line_number, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            tokens = [t.lower() for t in record["sentence"].split()]
            index = int(record["verb_index"])
            metaphoric = bool(record["metaphor"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ImportError_(f"line {line_number}: {exc}") from exc
        if not 0 <= index < len(tokens):
            raise ImportError_(
                f"line {line_number}: verb_index {index} out of range for {len(tokens)} tokens"
            )
        instances.append(_instance(tokens, index, metaphoric, source_name))
    return instances


def write_corpus(instances: Iterable[LabeledVerbInstance], sink: TextIO) -> None:
    """Serialize instances to ``label TAB verb_index TAB tokens`` lines."""
    for instance in instances:
        sink.write(
            f"{instance.label.value}\t{instance.verb_index}\t{' '.join(instance.tokens)}\n"
        )
