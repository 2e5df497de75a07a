"""Task assignment and durable rating collection for human annotators.

The store hands out one task at a time per worker: the least-rated open
(item, dimension) cell the worker has not yet rated, with every k-th
assignment swapped for an operator-supplied test item of known expected
score.  A cell closes once five distinct workers have rated it.

Persistence is an append-only JSON-lines log.  A rating is acknowledged
only after the line is flushed and fsynced; on startup the log is
replayed, so a crash can lose pending assignments but never an
acknowledged rating.

The HTTP layer is a thin FastAPI wrapper; all rules live in
:class:`AnnotationStore`, which is safe for the threaded request model
(mutations serialize through one lock).

Annotations here stay real objects (no postponed evaluation): the route
handlers are defined inside :func:`create_app`, and the web framework must
see the actual Request class to inject the request rather than inventing a
query parameter.
"""

import json
import os
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .eval_harness import (
    Comparison,
    Dimension,
    EvalItem,
    RatingRecord,
    System,
    filter_workers,
    mean_scores,
)

__all__ = [
    "TaskAssignment",
    "TestItem",
    "AnnotationStore",
    "AnnotationError",
    "UnknownTaskError",
    "DuplicateSubmissionError",
    "ScoreOutOfRangeError",
    "CompletedItemError",
    "load_items",
    "load_test_items",
    "load_guidelines",
    "create_app",
]

RATINGS_PER_CELL = 5
_DIMENSIONS = (Dimension.METAPHORICITY, Dimension.FLUENCY, Dimension.PARAPHRASE)


class AnnotationError(ValueError):
    """Base class for store rule violations."""


class UnknownTaskError(AnnotationError):
    """Task id was never issued to this worker."""


class DuplicateSubmissionError(AnnotationError):
    """Task id was already answered."""


class ScoreOutOfRangeError(AnnotationError):
    """Score outside the 1..4 scale."""


class CompletedItemError(AnnotationError):
    """The (item, dimension) cell already has its five ratings."""


@dataclass(frozen=True)
class TaskAssignment:
    task_id: str
    item_id: str
    dimension: Dimension
    display: tuple[str, ...]
    guideline: str
    anchors: tuple[str, ...]
    scale_min: int = 1
    scale_max: int = 4

    def to_payload(self) -> dict:
        return {
            "task_id": self.task_id,
            "item_id": self.item_id,
            "dimension": self.dimension.value,
            "display": list(self.display),
            "guideline": self.guideline,
            "anchors": list(self.anchors),
            "scale_min": self.scale_min,
            "scale_max": self.scale_max,
        }


@dataclass(frozen=True)
class TestItem:
    """Attention check with a known answer, interleaved among real tasks."""

    __test__ = False  # not a test class despite the name

    item_id: str
    dimension: Dimension
    display: tuple[str, ...]
    expected_score: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "display", tuple(self.display))
        if not 1 <= self.expected_score <= 4:
            raise ValueError(f"expected_score must be in 1..4, got {self.expected_score}")


def _display_for(item: EvalItem, dimension: Dimension) -> tuple[str, ...]:
    output = item.y if item.system is System.GOLD else item.y_prime
    assert output is not None
    if dimension is not Dimension.PARAPHRASE:
        return (output,)
    if item.comparison is Comparison.Y_YPRIME:
        return (item.y, output)
    return (item.x, output)


class AnnotationStore:
    def __init__(
        self,
        items: Sequence[EvalItem],
        test_items: Sequence[TestItem],
        guidelines: Mapping[str, Mapping[str, object]],
        log_path: str | Path,
        ratings_per_cell: int = RATINGS_PER_CELL,
        test_interval: int = 10,
        min_tasks: int = 2,
    ):
        if test_interval < 2:
            raise ValueError(f"test_interval must be >= 2, got {test_interval}")
        self._items = {item.item_id: item for item in items}
        if len(self._items) != len(items):
            raise ValueError("duplicate item_id among items")
        self._test_items = {t.item_id: t for t in test_items}
        if self._items.keys() & self._test_items.keys():
            raise ValueError("test item ids overlap evaluation item ids")
        self._item_order = [item.item_id for item in items]
        self._guidelines = guidelines
        self._ratings_per_cell = ratings_per_cell
        self._test_interval = test_interval
        self._min_tasks = min_tasks
        self._lock = threading.RLock()

        # state, rebuilt from the log on startup
        self._records: list[RatingRecord] = []
        self._cell_workers: dict[tuple[str, Dimension], set[str]] = {
            (item_id, dim): set() for item_id in self._item_order for dim in _DIMENSIONS
        }
        self._rated: set[tuple[str, str, Dimension]] = set()
        self._answered_tasks: set[str] = set()
        self._pending: dict[str, TaskAssignment] = {}
        self._issued: dict[str, int] = {}

        self._log_path = Path(log_path)
        if self._log_path.exists():
            with open(self._log_path, "r", encoding="utf-8") as handle:
                for line in handle:
                    if line.strip():
                        self._replay(json.loads(line))
        self._log = open(self._log_path, "a", encoding="utf-8")

    def close(self) -> None:
        self._log.close()

    def _replay(self, payload: dict) -> None:
        record = RatingRecord(
            item_id=payload["item_id"],
            dimension=Dimension(payload["dimension"]),
            worker_id=payload["worker_id"],
            score=int(payload["score"]),
            is_test_item=bool(payload.get("is_test_item", False)),
        )
        self._apply(record, payload.get("task_id", ""))
        # the every-k-th-task counter resumes from the submitted count
        self._issued[record.worker_id] = self._issued.get(record.worker_id, 0) + 1

    def _apply(self, record: RatingRecord, task_id: str) -> None:
        self._records.append(record)
        self._rated.add((record.worker_id, record.item_id, record.dimension))
        cell = (record.item_id, record.dimension)
        if cell in self._cell_workers:
            self._cell_workers[cell].add(record.worker_id)
        if task_id:
            self._answered_tasks.add(task_id)

    # -- assignment ------------------------------------------------------

    def _guideline_for(self, dimension: Dimension) -> tuple[str, tuple[str, ...]]:
        entry = self._guidelines.get(dimension.value, {})
        return str(entry.get("guideline", "")), tuple(entry.get("anchors", ()))

    def _open_cells(self, worker_id: str) -> list[tuple[int, int, str, Dimension]]:
        ranked = []
        for position, item_id in enumerate(self._item_order):
            for dim_pos, dim in enumerate(_DIMENSIONS):
                workers = self._cell_workers[(item_id, dim)]
                if len(workers) >= self._ratings_per_cell:
                    continue
                if (worker_id, item_id, dim) in self._rated:
                    continue
                ranked.append((len(workers), position, item_id, dim_pos, dim))
        ranked.sort(key=lambda row: (row[0], row[1], row[3]))
        return [(r[0], r[1], r[2], r[4]) for r in ranked]

    def _next_test_item(self, worker_id: str) -> TestItem | None:
        for test in self._test_items.values():
            if (worker_id, test.item_id, test.dimension) not in self._rated:
                return test
        return None

    def next_task(self, worker_id: str) -> TaskAssignment | None:
        """Least-rated open cell for this worker; every k-th task is a check."""
        if not worker_id:
            raise ValueError("worker_id must be non-empty")
        with self._lock:
            pending = self._pending.get(worker_id)
            if pending is not None:
                return pending
            open_cells = self._open_cells(worker_id)
            serial = self._issued.get(worker_id, 0) + 1
            assignment: TaskAssignment | None = None
            if serial % self._test_interval == 0:
                test = self._next_test_item(worker_id)
                if test is not None:
                    guideline, anchors = self._guideline_for(test.dimension)
                    assignment = TaskAssignment(
                        task_id=uuid.uuid4().hex,
                        item_id=test.item_id,
                        dimension=test.dimension,
                        display=test.display,
                        guideline=guideline,
                        anchors=anchors,
                    )
            if assignment is None:
                if not open_cells:
                    return None
                _, _, item_id, dim = open_cells[0]
                guideline, anchors = self._guideline_for(dim)
                assignment = TaskAssignment(
                    task_id=uuid.uuid4().hex,
                    item_id=item_id,
                    dimension=dim,
                    display=_display_for(self._items[item_id], dim),
                    guideline=guideline,
                    anchors=anchors,
                )
            self._issued[worker_id] = serial
            self._pending[worker_id] = assignment
            return assignment

    # -- submission ------------------------------------------------------

    def submit_rating(self, worker_id: str, task_id: str, score: int) -> RatingRecord:
        """Validate, append durably, then acknowledge with the stored record."""
        if isinstance(score, bool) or not isinstance(score, int) or not 1 <= score <= 4:
            raise ScoreOutOfRangeError(f"score must be an integer in 1..4, got {score!r}")
        with self._lock:
            if task_id in self._answered_tasks:
                raise DuplicateSubmissionError(f"task {task_id} was already answered")
            pending = self._pending.get(worker_id)
            if pending is None or pending.task_id != task_id:
                raise UnknownTaskError(f"task {task_id} is not pending for worker {worker_id}")
            is_test = pending.item_id in self._test_items
            cell = (pending.item_id, pending.dimension)
            if not is_test and len(self._cell_workers[cell]) >= self._ratings_per_cell:
                # raced to completion while the task was in flight
                del self._pending[worker_id]
                self._answered_tasks.add(task_id)
                raise CompletedItemError(
                    f"item {pending.item_id} already has {self._ratings_per_cell} "
                    f"{pending.dimension.value} ratings"
                )
            record = RatingRecord(
                item_id=pending.item_id,
                dimension=pending.dimension,
                worker_id=worker_id,
                score=score,
                is_test_item=is_test,
            )
            payload = {
                "item_id": record.item_id,
                "dimension": record.dimension.value,
                "worker_id": record.worker_id,
                "score": record.score,
                "is_test_item": record.is_test_item,
                "task_id": task_id,
            }
            self._log.write(json.dumps(payload) + "\n")
            self._log.flush()
            os.fsync(self._log.fileno())
            self._apply(record, task_id)
            del self._pending[worker_id]
            return record

    # -- reporting -------------------------------------------------------

    def summary(self):
        """Means per (system, dimension, comparison) after worker filtering."""
        with self._lock:
            records = list(self._records)
        expected = {t.item_id: float(t.expected_score) for t in self._test_items.values()}
        kept = filter_workers(records, expected, min_tasks=self._min_tasks)
        return mean_scores(kept, self._items.values())

    def progress(self, worker_id: str) -> dict:
        with self._lock:
            submitted = sum(1 for r in self._records if r.worker_id == worker_id)
            open_cells = len(self._open_cells(worker_id))
            complete = sum(
                1
                for workers in self._cell_workers.values()
                if len(workers) >= self._ratings_per_cell
            )
            return {
                "worker_id": worker_id,
                "submitted": submitted,
                "open_for_worker": open_cells,
                "complete_cells": complete,
                "total_cells": len(self._cell_workers),
            }

    def is_drained(self) -> bool:
        with self._lock:
            return all(
                len(workers) >= self._ratings_per_cell
                for workers in self._cell_workers.values()
            )


# ---------------------------------------------------------------------------
# configuration loading
# ---------------------------------------------------------------------------


def load_items(path: str | Path) -> list[EvalItem]:
    """Read evaluation items from a JSON array of records."""
    with open(path, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    items = []
    for entry in raw:
        items.append(
            EvalItem(
                item_id=entry["item_id"],
                x=entry["x"],
                y=entry["y"],
                system=System(entry["system"]),
                y_prime=entry.get("y_prime"),
                comparison=Comparison(entry["comparison"]) if entry.get("comparison") else None,
            )
        )
    return items


def load_test_items(path: str | Path) -> list[TestItem]:
    with open(path, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    return [
        TestItem(
            item_id=entry["item_id"],
            dimension=Dimension(entry["dimension"]),
            display=tuple(entry["display"]),
            expected_score=int(entry["expected_score"]),
        )
        for entry in raw
    ]


def load_guidelines(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------


def create_app(store: AnnotationStore, static_dir: str | Path | None = None):
    """FastAPI app exposing the store plus, optionally, the UI assets."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="metaphor-forge annotation service")

    @app.exception_handler(AnnotationError)
    async def _annotation_error(request: Request, exc: AnnotationError):
        status = {
            UnknownTaskError: 404,
            DuplicateSubmissionError: 409,
            CompletedItemError: 409,
            ScoreOutOfRangeError: 422,
        }.get(type(exc), 400)
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/api/task")
    def get_task(worker: str):
        task = store.next_task(worker)
        return {"task": None if task is None else task.to_payload()}

    @app.post("/api/rating")
    async def post_rating(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse(
                status_code=422,
                content={"error": "BadRequest", "detail": "request body must be JSON"},
            )
        for field in ("worker", "task_id", "score"):
            if field not in body:
                return JSONResponse(
                    status_code=422,
                    content={"error": "MissingField", "detail": f"missing field {field!r}"},
                )
        score = body["score"]
        if not isinstance(score, int) or isinstance(score, bool):
            raise ScoreOutOfRangeError(f"score must be an integer in 1..4, got {score!r}")
        record = store.submit_rating(body["worker"], body["task_id"], score)
        return {
            "ok": True,
            "item_id": record.item_id,
            "dimension": record.dimension.value,
            "score": record.score,
        }

    @app.get("/api/summary")
    def get_summary():
        rows = [
            {
                "system": system.value,
                "dimension": dimension.value,
                "comparison": comparison.value if comparison else None,
                "mean_score": value,
            }
            for (system, dimension, comparison), value in sorted(
                store.summary().items(),
                key=lambda kv: (
                    kv[0][0].value,
                    kv[0][1].value,
                    kv[0][2].value if kv[0][2] else "",
                ),
            )
        ]
        return {"rows": rows}

    @app.get("/api/progress")
    def get_progress(worker: str):
        return store.progress(worker)

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
