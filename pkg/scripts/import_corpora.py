"""Convert third-party metaphor corpora to the canonical line format.

Each supported schema maps to one converter in
metaphor_forge.corpus_importers; see that module for the structural
assumptions.  Licensed corpora are not bundled, so by default this runs
over the miniature excerpts under data/excerpts/.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from metaphor_forge.corpus_importers import (
    import_clustered_text,
    import_json_lines,
    import_term_table,
    import_word_markup_xml,
    write_corpus,
)

CONVERTERS = {
    "word-markup-xml": import_word_markup_xml,
    "term-table": import_term_table,
    "clustered-text": import_clustered_text,
    "json-lines": import_json_lines,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--format", choices=sorted(CONVERTERS), required=True)
    parser.add_argument("--input", type=Path, required=True)
    parser.add_argument("--output", type=Path, default=None, help="default: stdout")
    args = parser.parse_args(argv)

    with open(args.input, "r", encoding="utf-8") as source:
        instances = CONVERTERS[args.format](source, source_name=args.format)
    if args.output is None:
        write_corpus(instances, sys.stdout)
    else:
        with open(args.output, "w", encoding="utf-8") as sink:
            write_corpus(instances, sink)
    print(f"{len(instances)} instances converted", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
