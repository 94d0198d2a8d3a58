"""Search-space quality curves and run summaries."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .bench import BenchmarkTable
from .errors import EmptySubspace, PartialTable
from .space import SubspaceConstraints, encode, enumerate_space, refine


@dataclass(frozen=True)
class EedfCurve:
    """Right-continuous step function F(e) = fraction of errors <= e."""

    errors: np.ndarray
    label: str = ""

    def __post_init__(self):
        errors = np.sort(np.asarray(self.errors, dtype=float))
        if errors.size == 0:
            raise EmptySubspace("an eEDF needs at least one error value")
        object.__setattr__(self, "errors", errors)

    @property
    def n(self) -> int:
        return int(self.errors.size)

    @property
    def breakpoints(self) -> list[tuple[float, float]]:
        values, counts = np.unique(self.errors, return_counts=True)
        return list(zip(values.tolist(), (np.cumsum(counts) / self.n).tolist()))

    def __call__(self, e):
        return np.searchsorted(self.errors, e, side="right") / self.n

    def csv_rows(self) -> list[tuple[float, float, str]]:
        return [(e, f, self.label) for e, f in self.breakpoints]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["e", "F", "label"])
        writer.writerows(self.csv_rows())
        return buf.getvalue()


def write_csv(curves: Iterable[EedfCurve], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["e", "F", "label"])
        for curve in curves:
            writer.writerows(curve.csv_rows())


def eedf(
    table: BenchmarkTable,
    task: str,
    constraints: SubspaceConstraints | None = None,
    label: str | None = None,
) -> EedfCurve:
    """eEDF of ``task`` errors over the full space or a constrained subspace.

    Error is regret from the best raw value in the whole table, so 0 marks
    the global best whichever way the task is optimized.
    """
    if not table.complete:
        raise PartialTable("eEDF needs a table that covers the whole space")
    task_spec = table.task(task)
    raw = np.array([table.records[k][task] for k in table.keys])
    best = raw.max() if task_spec.direction == "maximize" else raw.min()
    if constraints is None:
        values = raw
    else:
        sub = refine(table.space, constraints)
        values = np.array([table.evaluate(encode(a, table.space), task) for a in enumerate_space(sub, len(table.records))])
    errors = best - values if task_spec.direction == "maximize" else values - best
    return EedfCurve(np.maximum(errors, 0.0), label if label is not None else ("subspace" if constraints else "full"))


@dataclass(frozen=True)
class Dominance:
    relation: str  # dominates | dominated | crossing | equal
    max_gap: float

    @property
    def dominates(self) -> bool:
        return self.relation == "dominates"


def dominance(a: EedfCurve, b: EedfCurve) -> Dominance:
    """Compare two curves on the union of their breakpoints.

    ``max_gap`` is the largest ``F_a - F_b`` in absolute value, signed.
    """
    grid = np.union1d(a.errors, b.errors)
    diff = a(grid) - b(grid)
    gap = float(diff[np.argmax(np.abs(diff))])
    if np.all(diff == 0):
        relation = "equal"
    elif np.all(diff >= 0):
        relation = "dominates"
    elif np.all(diff <= 0):
        relation = "dominated"
    else:
        relation = "crossing"
    return Dominance(relation, gap)


def summarize(results, table: BenchmarkTable | None = None) -> dict:
    """Per-task mean and population std of best raw score and model rank.

    ``average_rank`` is the mean over tasks of each task's mean model rank.
    """
    by_task = defaultdict(list)
    for result in results:
        by_task[result.task].append(result)
    tasks = {}
    for task, runs in by_task.items():
        raw = np.array([r.best_raw for r in runs])
        entry = {
            "runs": len(runs),
            "mean_best_raw": float(raw.mean()),
            "std_best_raw": float(raw.std()),
            "mean_unique_evaluations": float(np.mean([r.unique_evaluations for r in runs])),
        }
        ranks = [r.model_rank for r in runs]
        if table is not None and table.complete and any(x is None for x in ranks):
            ranks = [table.model_rank(r.best_key, task) for r in runs]
        if all(x is not None for x in ranks):
            entry["mean_rank"] = float(np.mean(ranks))
            entry["std_rank"] = float(np.std(ranks))
        tasks[task] = entry
    doc = {"tasks": tasks}
    means = [t["mean_rank"] for t in tasks.values() if "mean_rank" in t]
    if means and len(means) == len(tasks):
        doc["average_rank"] = float(np.mean(means))
    return doc
