"""Benchmark tables: tabular lookup, synthetic landscapes, ranks and top-k archives."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .archive import Archive, ArchiveEntry
from .errors import (
    ConfigError,
    DuplicateKey,
    PartialTable,
    SchemaError,
    TooLarge,
    UndecodableKey,
    UnknownArchitecture,
)
from .space import (
    BUILTIN_SPACES,
    Architecture,
    SpaceDescriptor,
    builtin_space,
    cardinality,
    choice_indices,
    decode,
    encode,
    enumerate_space,
)

DIRECTIONS = ("maximize", "minimize")
SYNTH_LIMIT = 10**6


@dataclass(frozen=True)
class TaskSpec:
    name: str
    metric: str = "score"
    direction: str = "maximize"

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise SchemaError(f"task {self.name!r}: direction must be one of {DIRECTIONS}")

    def normalize(self, value: float) -> float:
        return value if self.direction == "maximize" else -value

    def to_dict(self) -> dict:
        return {"name": self.name, "metric": self.metric, "direction": self.direction}


class BenchmarkTable:
    """Map from architecture key to per-task raw metric values.

    Tables are not mutated after construction, so lookups may run from any
    number of threads.
    """

    def __init__(self, space: SpaceDescriptor, tasks: Sequence[TaskSpec], records: dict[str, dict[str, float]]):
        self.space = space
        self.tasks = tuple(tasks)
        self._task_by_name = {t.name: t for t in self.tasks}
        if len(self._task_by_name) != len(self.tasks):
            raise SchemaError("duplicate task names")
        for key, values in records.items():
            missing = [t.name for t in self.tasks if t.name not in values]
            if missing:
                raise SchemaError(f"record {key!r} is missing task(s) {missing}")
            for name, value in values.items():
                if not isinstance(value, (int, float)) or not math.isfinite(value):
                    raise SchemaError(f"record {key!r} task {name!r}: value {value!r} is not finite")
        self.records = records

    @property
    def space_id(self) -> str:
        return self.space.space_id

    @cached_property
    def complete(self) -> bool:
        return len(self.records) == cardinality(self.space)

    @cached_property
    def keys(self) -> list[str]:
        return list(self.records)

    def task(self, name: str) -> TaskSpec:
        try:
            return self._task_by_name[name]
        except KeyError:
            raise SchemaError(f"unknown task {name!r}; table has {list(self._task_by_name)}") from None

    def key_of(self, arch: Architecture | str) -> str:
        return arch if isinstance(arch, str) else encode(arch, self.space)

    def evaluate(self, arch: Architecture | str, task: str) -> float:
        key = self.key_of(arch)
        task_spec = self.task(task)
        try:
            return self.records[key][task_spec.name]
        except KeyError:
            raise UnknownArchitecture(key) from None

    def normalized(self, arch: Architecture | str, task: str) -> float:
        return self.task(task).normalize(self.evaluate(arch, task))

    def oracle(self, task: str):
        """Callable mapping an architecture to its normalized score."""
        self.task(task)
        return lambda arch: self.normalized(arch, task)

    def scores(self, task: str) -> np.ndarray:
        """Normalized scores aligned with ``keys``."""
        return self._scores[task]

    @cached_property
    def _scores(self) -> dict[str, np.ndarray]:
        return {
            t.name: np.array([t.normalize(self.records[k][t.name]) for k in self.keys], dtype=float)
            for t in self.tasks
        }

    @cached_property
    def _sorted(self) -> dict[str, np.ndarray]:
        return {name: np.sort(arr) for name, arr in self._scores.items()}

    def model_rank(self, arch: Architecture | str, task: str) -> int:
        """1 + number of architectures strictly better; ties share the best rank."""
        if not self.complete:
            raise PartialTable(f"table covers {len(self.records)} of {cardinality(self.space)} architectures")
        value = self.normalized(arch, task)
        ordered = self._sorted[task]
        better = len(ordered) - int(np.searchsorted(ordered, value, side="right"))
        return 1 + better

    def best_raw(self, task: str) -> float:
        task_spec = self.task(task)
        return task_spec.normalize(float(self._sorted[task][-1]))

    def top_k(self, task: str, k: int) -> Archive:
        """The ``k`` best architectures, ties broken by key order."""
        if not 1 <= k <= len(self.records):
            raise ConfigError(f"top_k: k={k} outside [1, {len(self.records)}]")
        scores = self._scores[task]
        order = sorted(range(len(self.keys)), key=lambda i: (-scores[i], self.keys[i]))[:k]
        entries = [ArchiveEntry(self.keys[i], decode(self.keys[i], self.space), float(scores[i])) for i in order]
        return Archive(tuple(entries), task)

    def to_dict(self) -> dict:
        return {
            "space_id": self.space.space_id,
            "space": self.space.to_dict(),
            "tasks": [t.to_dict() for t in self.tasks],
            "records": self.records,
        }

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, separators=(",", ":"))
            fh.write("\n")


def _reject_duplicates(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise DuplicateKey(key)
        seen[key] = value
    return seen


def _resolve_space(doc: dict, space: SpaceDescriptor | None) -> SpaceDescriptor:
    if space is not None:
        return space
    if "space" in doc:
        return SpaceDescriptor.from_dict(doc["space"])
    if doc.get("space_id") in BUILTIN_SPACES:
        return builtin_space(doc["space_id"])
    raise SchemaError(f"cannot resolve space {doc.get('space_id')!r}; pass the space descriptor")


def from_document(doc: dict, space: SpaceDescriptor | None = None) -> BenchmarkTable:
    if not isinstance(doc, dict):
        raise SchemaError("benchmark document must be a JSON object")
    for field in ("space_id", "tasks", "records"):
        if field not in doc:
            raise SchemaError(f"benchmark document is missing {field!r}")
    space = _resolve_space(doc, space)
    try:
        tasks = [TaskSpec(t["name"], t.get("metric", t["name"]), t.get("direction", "maximize")) for t in doc["tasks"]]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad task list: {exc}") from exc
    if not isinstance(doc["records"], dict):
        raise SchemaError("records must be an object keyed by architecture")
    records: dict[str, dict[str, float]] = {}
    for key, values in doc["records"].items():
        canonical = canonical_key(key, space)
        if canonical in records:
            raise DuplicateKey(key)
        if not isinstance(values, dict):
            raise SchemaError(f"record {key!r} must map task names to values")
        records[canonical] = values
    return BenchmarkTable(space, tasks, records)


def canonical_key(key: str, space: SpaceDescriptor) -> str:
    try:
        return encode(decode(key, space), space)
    except SchemaError as exc:
        raise UndecodableKey(key, str(exc)) from None


def load(path: str | Path, space: SpaceDescriptor | None = None) -> BenchmarkTable:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh, object_pairs_hook=_reject_duplicates)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    return from_document(doc, space)


_NATIVE_201 = re.compile(r"^\|[^|~]+~\d+\|(\+\|([^|~]+~\d+\|)+)+$")


def native_nas201_to_key(native: str) -> str:
    """Convert ``|op~0|+|op~0|op~1|+|...|`` strings to this toolkit's key."""
    ops = []
    for node in native.split("+"):
        for token in node.strip("|").split("|"):
            op, _, _ = token.partition("~")
            ops.append(op)
    return "|" + "|".join(ops) + "|"


def ingest_csv(
    path: str | Path,
    space: SpaceDescriptor,
    directions: dict[str, str] | None = None,
    metrics: dict[str, str] | None = None,
) -> BenchmarkTable:
    """Build a table from ``arch_key,task,value`` rows.

    Keys may use this toolkit's grammar or the native NAS-Bench-201 string.
    """
    directions = directions or {}
    metrics = metrics or {}
    records: dict[str, dict[str, float]] = {}
    task_order: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["arch_key", "task", "value"]:
            raise SchemaError("CSV header must be arch_key,task,value")
        for row in reader:
            raw_key = row["arch_key"].strip()
            if _NATIVE_201.match(raw_key):
                raw_key = native_nas201_to_key(raw_key)
            key = canonical_key(raw_key, space)
            task = row["task"].strip()
            try:
                value = float(row["value"])
            except ValueError:
                raise SchemaError(f"row for {key!r}/{task!r}: value {row['value']!r} is not a number") from None
            if task not in task_order:
                task_order.append(task)
            slot = records.setdefault(key, {})
            if task in slot:
                raise DuplicateKey(f"{key} / {task}")
            slot[task] = value
    tasks = [TaskSpec(t, metrics.get(t, t), directions.get(t, "maximize")) for t in task_order]
    return BenchmarkTable(space, tasks, records)


# --- synthetic landscapes ---------------------------------------------------


@dataclass(frozen=True)
class SynthParams:
    """Knobs of the synthetic landscape.

    ``shared`` is the probability that a unary/pairwise table entry is drawn
    from a stream common to all tasks instead of the task's own stream; it
    correlates tasks while keeping every entry uniform on [0, 1).
    """

    seed: int = 0
    interaction: float = 0.0
    noise: float = 0.0
    shared: float = 0.0

    def __post_init__(self):
        if self.interaction < 0 or self.noise < 0:
            raise SchemaError("interaction and noise must be non-negative")
        if not 0.0 <= self.shared <= 1.0:
            raise SchemaError("shared must lie in [0, 1]")


def counter_uniform(*counter) -> float:
    """Uniform [0, 1) value that depends only on ``counter``."""
    digest = hashlib.blake2b(repr(counter).encode(), digest_size=8).digest()
    return (struct.unpack("<Q", digest)[0] >> 11) * 2.0**-53


def counter_normal(*counter) -> float:
    u1 = 1.0 - counter_uniform(*counter, 0)
    u2 = counter_uniform(*counter, 1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def _entry_uniform(params: SynthParams, task: str, tag: str, *idx) -> float:
    if params.shared > 0 and counter_uniform(params.seed, tag + "-share", task, *idx) < params.shared:
        return counter_uniform(params.seed, tag, None, *idx)
    return counter_uniform(params.seed, tag, task, *idx)


def synth_score(space: SpaceDescriptor, params: SynthParams, task: str, arch: Architecture) -> float:
    """Recompute one landscape value from scratch (no table needed).

    score = sum_i u_i(c_i) + interaction * sum_{i<j} w_ij(c_i, c_j) + noise * eps
    where ``c_i`` is the index of layer i's decision; for fixed-topology
    spaces that is the operator index.
    """
    idx = choice_indices(arch, space)
    total = sum(_entry_uniform(params, task, "u", i, c) for i, c in enumerate(idx))
    if params.interaction:
        pairs = sum(
            _entry_uniform(params, task, "w", i, j, idx[i], idx[j])
            for i in range(len(idx))
            for j in range(i + 1, len(idx))
        )
        total += params.interaction * pairs
    if params.noise:
        total += params.noise * counter_normal(params.seed, "eps", task, *idx)
    return total


def synth_scores(space: SpaceDescriptor, params: SynthParams, task: str) -> np.ndarray:
    """Scores of every architecture in canonical enumeration order."""
    sizes = [slot.count() for slot in space.layers]
    total = math.prod(sizes)
    if total > SYNTH_LIMIT:
        raise TooLarge(total, SYNTH_LIMIT)
    grid = np.unravel_index(np.arange(total), sizes)
    scores = np.zeros(total)
    for i, n in enumerate(sizes):
        unary = np.array([_entry_uniform(params, task, "u", i, c) for c in range(n)])
        scores += unary[grid[i]]
    if params.interaction:
        for i in range(len(sizes)):
            for j in range(i + 1, len(sizes)):
                w = np.array(
                    [[_entry_uniform(params, task, "w", i, j, a, b) for b in range(sizes[j])] for a in range(sizes[i])]
                )
                scores += params.interaction * w[grid[i], grid[j]]
    if params.noise:
        eps = np.array([counter_normal(params.seed, "eps", task, *map(int, c)) for c in zip(*grid)])
        scores += params.noise * eps
    return scores


def synth_generate(space: SpaceDescriptor, params: SynthParams, tasks: Iterable[TaskSpec | str]) -> BenchmarkTable:
    """Exhaustive synthetic table; a pure function of its arguments."""
    tasks = [t if isinstance(t, TaskSpec) else TaskSpec(t) for t in tasks]
    total = cardinality(space)
    if total > SYNTH_LIMIT:
        raise TooLarge(total, SYNTH_LIMIT)
    keys = [encode(a, space) for a in enumerate_space(space, SYNTH_LIMIT)]
    columns = {}
    for t in tasks:
        scores = synth_scores(space, params, t.name)
        columns[t.name] = scores if t.direction == "maximize" else -scores
    records = {key: {t.name: float(columns[t.name][n]) for t in tasks} for n, key in enumerate(keys)}
    return BenchmarkTable(space, tasks, records)
