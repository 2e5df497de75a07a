"""Regenerate the golden --help transcripts the CLI tests compare against.

Run after any flag change:

    python3 scripts/regen_cli_help.py
"""

import contextlib
import io
import os
import pathlib
import sys

# Fixed width so the transcripts do not depend on the invoking terminal.
os.environ["COLUMNS"] = "100"

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from metaphor_forge.cli import build_parser  # noqa: E402

GOLDEN = pathlib.Path(__file__).resolve().parent.parent / "tests" / "golden"

SUBCOMMANDS = [
    "lexrep",
    "build-corpus",
    "train",
    "generate",
    "evaluate",
    "score",
    "serve",
]


def render(argv: list[str]) -> str:
    buffer = io.StringIO()
    with contextlib.redirect_stdout(buffer):
        try:
            build_parser().parse_args(argv)
        except SystemExit:
            pass
    return buffer.getvalue()


def main() -> int:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    (GOLDEN / "help_top.txt").write_text(render(["--help"]), encoding="utf-8")
    for command in SUBCOMMANDS:
        path = GOLDEN / f"help_{command}.txt"
        path.write_text(render([command, "--help"]), encoding="utf-8")
    print(f"wrote {1 + len(SUBCOMMANDS)} transcripts under {GOLDEN}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
