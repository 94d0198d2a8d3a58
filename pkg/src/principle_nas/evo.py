"""Regularized (aging) evolution with a shared evaluation cache."""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError
from .space import Architecture, LayerChoice, SpaceDescriptor, as_rng, encode, mutate, sample_uniform

Oracle = Callable[[Architecture], float]


@dataclass(frozen=True)
class EvoParams:
    population_size: int = 10
    generations: int = 1
    tournament_size: int = 5
    crossover_prob: float = 0.0
    mutation_prob: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 1 or self.generations < 0:
            raise ConfigError("population_size must be >= 1 and generations >= 0")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ConfigError("tournament_size must lie in [1, population_size]")
        for name in ("crossover_prob", "mutation_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")

    @classmethod
    def for_space(cls, space_id: str, **overrides) -> "EvoParams":
        """Per-space defaults; unknown spaces get the trans101 setting."""
        base = EVO_DEFAULTS.get(space_id.split("-")[0], EVO_DEFAULTS["trans101"])
        return cls(**{**base, **overrides})


EVO_DEFAULTS = {
    "nas201": dict(population_size=5, generations=1, tournament_size=2, crossover_prob=0.0, mutation_prob=1.0),
    "trans101": dict(population_size=10, generations=1, tournament_size=5, crossover_prob=0.0, mutation_prob=1.0),
    "darts": dict(population_size=20, generations=10, tournament_size=2, crossover_prob=0.5, mutation_prob=0.5),
}


class EvaluationCache:
    """Key -> score memo; every key reaches the oracle at most once.

    The lock is held across the oracle call, which makes insert-if-absent
    exactly-once even when several threads ask for the same key.
    """

    def __init__(self):
        self._scores: dict[str, float] = {}
        self._lock = threading.Lock()
        self.oracle_calls = 0

    def __len__(self) -> int:
        return len(self._scores)

    def __contains__(self, key: str) -> bool:
        return key in self._scores

    @property
    def unique_evaluations(self) -> int:
        return self.oracle_calls

    def evaluate(self, key: str, compute: Callable[[], float]) -> tuple[float, bool]:
        with self._lock:
            if key in self._scores:
                return self._scores[key], True
            score = float(compute())
            self._scores[key] = score
            self.oracle_calls += 1
            return score, False

    def items(self):
        return list(self._scores.items())


def cached_evaluate(cache: EvaluationCache, oracle: Oracle, arch: Architecture, space: SpaceDescriptor) -> float:
    return cache.evaluate(encode(arch, space), lambda: oracle(arch))[0]


@dataclass(frozen=True)
class TraceRecord:
    key: str
    score: float
    gen: int
    cache_hit: bool

    def to_dict(self) -> dict:
        return {"key": self.key, "score": self.score, "gen": self.gen, "cache_hit": self.cache_hit}


@dataclass
class SearchTrace:
    records: list[TraceRecord] = field(default_factory=list)
    best_so_far: list[float] = field(default_factory=list)
    unique_evaluations: int = 0

    def append(self, record: TraceRecord) -> None:
        prev = self.best_so_far[-1] if self.best_so_far else -np.inf
        self.records.append(record)
        self.unique_evaluations += not record.cache_hit
        self.best_so_far.append(max(prev, record.score))

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")


@dataclass
class Member:
    arch: Architecture
    key: str
    score: float


def tournament(population, tournament_size: int, rng) -> Member:
    """Best of ``tournament_size`` members drawn without replacement.

    Ties go to the member that sits earliest in the population.
    """
    rng = as_rng(rng)
    picks = sorted(int(i) for i in rng.choice(len(population), size=tournament_size, replace=False))
    best = picks[0]
    for i in picks[1:]:
        if population[i].score > population[best].score:
            best = i
    return population[best]


def crossover(a: Architecture, b: Architecture, space: SpaceDescriptor, rng) -> Architecture:
    """Uniform per-layer recombination.

    Layer decisions are copied whole, and source distinctness is a per-layer
    rule, so the child is always valid when both parents are.
    """
    rng = as_rng(rng)
    picks = rng.random(len(a.choices)) < 0.5
    choices: list[LayerChoice] = [ca if take_a else cb for take_a, ca, cb in zip(picks, a.choices, b.choices)]
    return Architecture(tuple(choices))


def run(
    space: SpaceDescriptor,
    oracle: Oracle,
    params: EvoParams,
    cache: EvaluationCache | None = None,
    max_evaluations: int | None = None,
) -> tuple[Architecture, SearchTrace]:
    """Aging evolution inside ``space``.

    One generation produces ``population_size`` children; each child joins
    the queue and the oldest member leaves. ``max_evaluations`` optionally
    stops the run once that many new (uncached) evaluations happened.
    """
    if max_evaluations is not None and max_evaluations < 1:
        raise ConfigError("max_evaluations must be >= 1")
    cache = cache if cache is not None else EvaluationCache()
    rng = np.random.default_rng(params.seed)
    trace = SearchTrace()
    best: Member | None = None

    def budget_left() -> bool:
        return max_evaluations is None or trace.unique_evaluations < max_evaluations

    def evaluate(arch: Architecture, gen: int) -> Member:
        nonlocal best
        key = encode(arch, space)
        score, hit = cache.evaluate(key, lambda: oracle(arch))
        trace.append(TraceRecord(key, score, gen, hit))
        member = Member(arch, key, score)
        if best is None or score > best.score:
            best = member
        return member

    population: deque[Member] = deque()
    for _ in range(params.population_size):
        if not budget_left():
            break
        population.append(evaluate(sample_uniform(space, rng), 0))

    tsize = min(params.tournament_size, len(population))
    for gen in range(1, params.generations + 1):
        if not budget_left():
            break
        for _ in range(params.population_size):
            if not budget_left():
                break
            if rng.random() < params.crossover_prob:
                a = tournament(population, tsize, rng)
                b = tournament(population, tsize, rng)
                child = crossover(a.arch, b.arch, space, rng)
            else:
                child = tournament(population, tsize, rng).arch
            if rng.random() < params.mutation_prob:
                child = mutate(child, space, rng)
            population.append(evaluate(child, gen))
            population.popleft()
    assert best is not None
    return best.arch, trace
