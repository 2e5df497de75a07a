#!/usr/bin/env python3
"""Regenerate the cue/filler mask-learning task under data/corpus/.

Each sentence is ``det animal verb tail`` where the animal uniquely
determines the verb (fox -> darts, wolf -> howls, ...).  Metaphoric
instances get their verb masked during dataset building, literal ones are
identity pairs, so a trained model must learn both copying and cue-driven
filling.  Deterministic: fixed seed, committed output.

    python3 scripts/gen_synthetic_task.py
"""

from __future__ import annotations

import random
from pathlib import Path

CUE_TO_FILLER = {
    "fox": "darts",
    "wolf": "howls",
    "crow": "caws",
    "owl": "hoots",
    "hare": "bolts",
    "toad": "croaks",
    "swan": "glides",
    "mole": "digs",
    "lark": "sings",
    "carp": "swims",
    "moth": "flits",
    "wasp": "stings",
    "stork": "wades",
    "finch": "chirps",
    "pike": "lurks",
    "shrew": "squeaks",
}

DETS = ["the", "a", "that", "this"]
TAILS = ["today", "nearby", "alone", "again"]
PER_CUE = 4  # distinct (det, tail) contexts per animal, per label


def main() -> None:
    rng = random.Random(2024)
    lines = []
    for label in ("M", "L"):
        for animal, verb in CUE_TO_FILLER.items():
            contexts = rng.sample([(d, t) for d in DETS for t in TAILS], PER_CUE)
            for det, tail in contexts:
                tokens = [det, animal, verb, tail]
                lines.append(f"{label}\t2\t{' '.join(tokens)}")
    out = Path(__file__).resolve().parents[1] / "data" / "corpus" / "synthetic_task.tsv"
    out.write_text("\n".join(lines) + "\n")
    masked = sum(1 for l in lines if l.startswith("M"))
    print(f"wrote {len(lines)} instances ({masked} metaphoric) to {out}")


if __name__ == "__main__":
    main()
