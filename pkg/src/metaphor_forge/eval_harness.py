"""Rating aggregation, rank correlation, and overlap diagnostics.

Human judgments arrive as :class:`RatingRecord` rows, either from the
annotation service's append-only log or from a delimited file.  The
harness filters unreliable workers, averages scores per (system,
dimension, comparison) cell, and computes Spearman correlations with
permutation-test significance.

``mpg_score`` is an invented automatic proxy (mean-embedding cosine minus
a copy penalty); it is not a reconstruction of any published metric and
results based on it should be labeled accordingly.
"""

from __future__ import annotations

import csv
import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .embedding_store import EmbeddingTable, cosine, mean_context_vector

__all__ = [
    "System",
    "Dimension",
    "Comparison",
    "EvalItem",
    "RatingRecord",
    "MetricConfig",
    "ConstantInputError",
    "CandidateTooShortError",
    "filter_workers",
    "mean_scores",
    "spearman",
    "permutation_pvalue",
    "ngram_overlap",
    "mpg_score",
    "read_ratings_delimited",
    "read_ratings_log",
    "write_summary_delimited",
]


class System(str, Enum):
    GOLD = "gold"
    LEXREP = "lexrep"
    METAPHOR_MASKING = "metaphor_masking"


class Dimension(str, Enum):
    METAPHORICITY = "metaphoricity"
    FLUENCY = "fluency"
    PARAPHRASE = "paraphrase"


class Comparison(str, Enum):
    X_YPRIME = "x_yprime"
    Y_YPRIME = "y_yprime"


class ConstantInputError(ValueError):
    """Raised when a correlation argument has zero rank variance."""


class CandidateTooShortError(ValueError):
    """Raised when the candidate has fewer than n tokens."""


@dataclass(frozen=True)
class EvalItem:
    """One output under evaluation.

    ``comparison`` selects which sentence pair a paraphrase rating is
    about.  Gold items carry no system output, so they support no
    output-vs-gold comparison: their paraphrase judgment pairs the input
    with the gold sentence itself.
    """

    item_id: str
    x: str
    y: str
    system: System
    y_prime: str | None = None
    comparison: Comparison | None = None

    def __post_init__(self) -> None:
        if self.system is System.GOLD:
            if self.y_prime is not None:
                raise ValueError("gold items have no system output")
            if self.comparison is Comparison.Y_YPRIME:
                raise ValueError("gold items support no output-vs-gold comparison")
        elif self.y_prime is None:
            raise ValueError(f"{self.system.value} items require a system output")


@dataclass(frozen=True)
class RatingRecord:
    item_id: str
    dimension: Dimension
    worker_id: str
    score: int
    is_test_item: bool = False

    def __post_init__(self) -> None:
        if not 1 <= self.score <= 4:
            raise ValueError(f"score must be in 1..4, got {self.score}")


@dataclass(frozen=True)
class MetricConfig:
    """Settings for the invented copy-penalized cosine metric."""

    lambda_penalty: float = 0.25


def filter_workers(
    records: Sequence[RatingRecord],
    test_item_keys: Mapping[str, float],
    min_tasks: int = 2,
) -> list[RatingRecord]:
    """Drop every record of workers who failed a test item or did too little.

    ``test_item_keys`` maps test item ids to their expected scores; a
    rating deviating from the expectation by more than 1 fails.  Workers
    with fewer than ``min_tasks`` ratings are dropped as well.  The
    operation is idempotent: both criteria are per-worker and unaffected
    by other workers' removal.
    """
    tasks_done: Counter[str] = Counter()
    failed: set[str] = set()
    for record in records:
        tasks_done[record.worker_id] += 1
        if record.item_id in test_item_keys:
            if abs(record.score - test_item_keys[record.item_id]) > 1:
                failed.add(record.worker_id)
    return [
        record
        for record in records
        if record.worker_id not in failed and tasks_done[record.worker_id] >= min_tasks
    ]


def mean_scores(
    records: Iterable[RatingRecord],
    items: Iterable[EvalItem],
) -> dict[tuple[System, Dimension, Comparison | None], float]:
    """Mean score per (system, dimension, comparison) cell.

    The comparison slot is only meaningful for paraphrase ratings and is
    None for the other dimensions.  Records whose item_id matches no item
    (test items, unknown ids) are ignored; empty cells are absent from
    the result rather than zero.
    """
    by_id = {item.item_id: item for item in items}
    sums: defaultdict[tuple, float] = defaultdict(float)
    counts: defaultdict[tuple, int] = defaultdict(int)
    for record in records:
        item = by_id.get(record.item_id)
        if item is None:
            continue
        comparison = item.comparison if record.dimension is Dimension.PARAPHRASE else None
        key = (item.system, record.dimension, comparison)
        sums[key] += record.score
        counts[key] += 1
    return {key: sums[key] / counts[key] for key in sums}


def _average_ranks(values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.size, dtype=np.float64)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation of average-fractional ranks (ties share means)."""
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ValueError("correlation needs at least two pairs")
    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    rx_c = rx - rx.mean()
    ry_c = ry - ry.mean()
    denom = np.sqrt((rx_c * rx_c).sum() * (ry_c * ry_c).sum())
    if denom == 0.0:
        raise ConstantInputError("an argument is constant; rank correlation undefined")
    return float((rx_c * ry_c).sum() / denom)


def permutation_pvalue(
    xs: Sequence[float],
    ys: Sequence[float],
    shuffles: int = 10_000,
    seed: int = 0,
) -> float:
    """Two-sided permutation p-value for the Spearman correlation."""
    observed = abs(spearman(xs, ys))
    rng = np.random.default_rng(seed)
    ys_arr = np.asarray(ys, dtype=np.float64)
    hits = 0
    for _ in range(shuffles):
        permuted = rng.permutation(ys_arr)
        try:
            rho = abs(spearman(xs, permuted))
        except ConstantInputError:  # pragma: no cover - cannot occur if observed exists
            continue
        if rho >= observed - 1e-12:
            hits += 1
    return (hits + 1) / (shuffles + 1)


def ngram_overlap(
    candidate: Sequence[str], reference: Sequence[str], n: int = 1
) -> float:
    """Clipped n-gram precision of the candidate against the reference."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if len(candidate) < n:
        raise CandidateTooShortError(
            f"candidate has {len(candidate)} tokens, needs at least {n}"
        )
    cand_grams = Counter(tuple(candidate[i : i + n]) for i in range(len(candidate) - n + 1))
    ref_grams = Counter(tuple(reference[i : i + n]) for i in range(len(reference) - n + 1))
    clipped = sum(min(count, ref_grams[gram]) for gram, count in cand_grams.items())
    return clipped / sum(cand_grams.values())


def mpg_score(
    x_tokens: Sequence[str],
    y_prime_tokens: Sequence[str],
    table: EmbeddingTable,
    config: MetricConfig = MetricConfig(),
) -> float:
    """Copy-penalized cosine: semantic closeness minus verbatim overlap.

    Invented proxy, not a published metric: cosine between the two mean
    embeddings minus ``lambda_penalty`` times unigram overlap of the
    output against the input.  Identical sentences score 1 - lambda.
    """
    if not x_tokens or not y_prime_tokens:
        raise ValueError("both sentences must be non-empty")
    closeness = cosine(
        mean_context_vector(table, x_tokens),
        mean_context_vector(table, y_prime_tokens),
    )
    return closeness - config.lambda_penalty * ngram_overlap(y_prime_tokens, x_tokens, 1)


# ---------------------------------------------------------------------------
# ingestion and emission
# ---------------------------------------------------------------------------


def read_ratings_delimited(source: TextIO) -> list[RatingRecord]:
    """Read ratings from a comma-delimited file with a header row.

    Expected columns: item_id, system, dimension, comparison, worker_id,
    score, is_test.  The system and comparison columns describe the item
    and are ignored here; they exist so one file can also seed items.
    """
    reader = csv.DictReader(source)
    records = []
    for row in reader:
        records.append(
            RatingRecord(
                item_id=row["item_id"].strip(),
                dimension=Dimension(row["dimension"].strip()),
                worker_id=row["worker_id"].strip(),
                score=int(row["score"]),
                is_test_item=row.get("is_test", "").strip().lower() in ("1", "true", "yes"),
            )
        )
    return records


def read_ratings_log(lines: Iterable[str]) -> list[RatingRecord]:
    """Read ratings from the annotation service's JSON-lines log.

    Extra fields (task ids, timestamps) are tolerated and ignored.
    """
    records = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        payload = json.loads(line)
        records.append(
            RatingRecord(
                item_id=payload["item_id"],
                dimension=Dimension(payload["dimension"]),
                worker_id=payload["worker_id"],
                score=int(payload["score"]),
                is_test_item=bool(payload.get("is_test_item", False)),
            )
        )
    return records


def write_summary_delimited(
    means: Mapping[tuple[System, Dimension, Comparison | None], float],
    sink: TextIO,
) -> None:
    """Emit the means table, one row per (system, dimension, comparison)."""
    writer = csv.writer(sink)
    writer.writerow(["system", "dimension", "comparison", "mean_score"])
    for (system, dimension, comparison), value in sorted(
        means.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value, kv[0][2].value if kv[0][2] else "")
    ):
        writer.writerow(
            [system.value, dimension.value, comparison.value if comparison else "", f"{value:.6g}"]
        )
