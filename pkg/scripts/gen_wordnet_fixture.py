#!/usr/bin/env python3
"""Regenerate the miniature WordNet verb fixture under data/wordnet/.

The fixture follows the Princeton 3.x database grammar exactly (two-digit
hex word counts, three-digit pointer counts, frame blocks, license-style
comment lines) so the parser exercised by the tests is the same one that
reads the real files.  Run from the repository root:

    python3 scripts/gen_wordnet_fixture.py
"""

from __future__ import annotations

import json
from pathlib import Path

# offset -> (lemmas, troponym offsets)
SYNSETS: dict[int, tuple[list[str], list[int]]] = {
    1000: (["move"], [1100, 1200, 1300, 1400]),
        1100: (["march"], [1110, 1120]),
        1110: (["parade"], []),
        1120: (["goose_step"], []),
        1200: (["slide"], [1210]),
        1210: (["slither"], []),
        1300: (["glide"], []),
        1400: (["rush"], []),
        2000: (["appear"], [2100, 2200]),
        2100: (["manifest"], []),
        2200: (["come_out"], []),
        2300: (["appear"], [2400]),
        2400: (["loom"], []),
        3000: (["shine"], [3100, 3200, 3300]),
        3100: (["sparkle"], []),
        3200: (["glare"], []),
        3300: (["glitter"], []),
        4000: (["weaken"], [4100, 4200]),
        4100: (["drain"], []),
        4200: (["emasculate"], []),
        5000: (["lavish"], [5100]),
        5100: (["shower"], []),
        6000: (["eat"], [6100, 6200, 6300]),
        6100: (["devour"], []),
        6200: (["gobble"], []),
        6300: (["demolish"], []),
        7000: (["lose"], [7100]),
        7100: (["hemorrhage", "bleed"], []),
        8000: (["top"], [8100]),
        8100: (["crown"], []),
        9000: (["run"], []),
        9100: (["sadden"], []),
}

GLOSSES = {
    1000: "change location; be in motion",
    1100: "walk fast with regular steps",
    2000: "come into sight or view",
    3000: "emit or reflect light",
    4000: "lessen in strength",
    5000: "bestow in abundance",
    6000: "take in solid food",
    7000: "fail to keep or maintain",
    8000: "be at or constitute the highest point of",
    9000: "move fast on foot",
}

COMMENT = [
    "  1 This miniature verb database mirrors the layout of the full files.",
    "  2 It exists so the test suite runs without the large resource.",
]


def hypernyms_of(offset: int) -> list[int]:
    return [parent for parent, (_, kids) in SYNSETS.items() if offset in kids]


def data_line(offset: int) -> str:
    lemmas, troponyms = SYNSETS[offset]
    parts = [f"{offset:08d}", "38", "v", f"{len(lemmas):02x}"]
    for lemma in lemmas:
        parts += [lemma, "0"]
    pointers = [("@", p) for p in hypernyms_of(offset)] + [("~", t) for t in troponyms]
    parts.append(f"{len(pointers):03d}")
    for symbol, target in pointers:
        parts += [symbol, f"{target:08d}", "v", "0000"]
    parts += ["01", "+", "02", "00"]  # one generic verb frame
    gloss = GLOSSES.get(offset, f"fixture sense of {lemmas[0]}")
    return " ".join(parts) + " | " + gloss


def index_lines() -> list[str]:
    by_lemma: dict[str, list[int]] = {}
    for offset in sorted(SYNSETS):
        for lemma in SYNSETS[offset][0]:
            by_lemma.setdefault(lemma, []).append(offset)
    lines = []
    for lemma in sorted(by_lemma):
        offsets = by_lemma[lemma]
        has_troponyms = any(SYNSETS[o][1] for o in offsets)
        has_hypernyms = any(hypernyms_of(o) for o in offsets)
        symbols = [s for s, present in (("@", has_hypernyms), ("~", has_troponyms)) if present]
        fields = [lemma, "v", str(len(offsets)), str(len(symbols))]
        fields += symbols
        fields += [str(len(offsets)), "0"]
        fields += [f"{o:08d}" for o in offsets]
        lines.append(" ".join(fields))
    return lines


def main() -> None:
    out_dir = Path(__file__).resolve().parents[1] / "data" / "wordnet"
    out_dir.mkdir(parents=True, exist_ok=True)
    data = COMMENT + [data_line(o) for o in sorted(SYNSETS)]
    (out_dir / "data.verb").write_text("\n".join(data) + "\n")
    index = COMMENT + index_lines()
    (out_dir / "index.verb").write_text("\n".join(index) + "\n")
    lemma_count = len({l for lemmas, _ in SYNSETS.values() for l in lemmas})
    counts = {"synsets": len(SYNSETS), "index_lemmas": lemma_count}
    (out_dir / "counts.json").write_text(json.dumps(counts, indent=2) + "\n")
    print(f"wrote {len(SYNSETS)} synsets, {lemma_count} index lemmas to {out_dir}")


if __name__ == "__main__":
    main()
