"""Principle-guided search over a suite of tasks.

For every task the transferred principle is turned into a refined space,
aging evolution searches it, and the principle is then either adapted to
the best architectures found (when the iteration matched or beat the
running base score) or swapped for its complement to explore elsewhere.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import evo
from .archive import Archive, ArchiveEntry
from .bench import BenchmarkTable
from .errors import ConfigError, ConstraintEmpty, EmptyRefinedSpace
from .evo import EvaluationCache, EvoParams, SearchTrace
from .principle import DesignPrinciple, serialize, to_constraints
from .reasoner.base import Reasoner
from .space import SpaceDescriptor, cardinality, decode, refine

LAPT_DEFAULTS = {
    "nas201": dict(learn_samples=50, r=5, iterations=3),
    "trans101": dict(learn_samples=50, r=15, iterations=4),
    "darts": dict(learn_samples=100, r=50, iterations=2),
}


@dataclass(frozen=True)
class LaptConfig:
    learn_samples: int = 50
    r: int = 15
    iterations: int = 4
    evo: EvoParams = field(default_factory=EvoParams)
    transfer_enabled: bool = True
    adaptation_enabled: bool = True
    seeds: tuple[int, ...] = (0,)

    def __post_init__(self):
        if self.r < 1 or self.iterations < 1 or self.learn_samples < 1:
            raise ConfigError("r, iterations and learn_samples must be >= 1")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @classmethod
    def for_space(cls, space_id: str, **overrides) -> "LaptConfig":
        stem = space_id.split("-")[0]
        base = dict(LAPT_DEFAULTS.get(stem, LAPT_DEFAULTS["trans101"]))
        base["evo"] = EvoParams.for_space(stem)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return {
            "learn_samples": self.learn_samples,
            "r": self.r,
            "iterations": self.iterations,
            "evo": {
                "population_size": self.evo.population_size,
                "generations": self.evo.generations,
                "tournament_size": self.evo.tournament_size,
                "crossover_prob": self.evo.crossover_prob,
                "mutation_prob": self.evo.mutation_prob,
            },
            "transfer_enabled": self.transfer_enabled,
            "adaptation_enabled": self.adaptation_enabled,
            "seeds": list(self.seeds),
        }


@dataclass
class LaptResult:
    task: str
    seed: int
    best_key: str
    best_raw: float
    best_score: float
    model_rank: int | None
    unique_evaluations: int
    lineage: list[dict]
    bases: list[float]
    iteration_bests: list[float]
    refined_sizes: list[int]
    traces: list[SearchTrace] = field(default_factory=list, repr=False)

    @property
    def branches(self) -> list[str]:
        return [entry["branch"] for entry in self.lineage[1:]]

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "seed": self.seed,
            "best_key": self.best_key,
            "best_raw": self.best_raw,
            "best_score": self.best_score,
            "model_rank": self.model_rank,
            "unique_evaluations": self.unique_evaluations,
            "lineage": self.lineage,
            "bases": [_finite(b) for b in self.bases],
            "iteration_bests": self.iteration_bests,
            "refined_sizes": self.refined_sizes,
        }


def _finite(x: float) -> float | None:
    return None if math.isinf(x) else x


def derive_seed(*parts: int | str) -> int:
    """Stable 32-bit seed from integers and names (names hashed with crc32)."""
    ints = [zlib.crc32(p.encode()) if isinstance(p, str) else int(p) for p in parts]
    return int(np.random.SeedSequence(ints).generate_state(1)[0])


def learn_stage(
    table: BenchmarkTable, source_task: str, k: int, reasoner: Reasoner, space: SpaceDescriptor | None = None
) -> DesignPrinciple:
    """Learn the transferable principle from the top ``k`` architectures of ``source_task``."""
    archive = table.top_k(source_task, k)
    return reasoner.learn(archive, space or table.space)


def adapt_step(
    principle: DesignPrinciple,
    evaluated: Archive,
    base: float,
    best: float,
    r: int,
    reasoner: Reasoner,
    space: SpaceDescriptor,
) -> tuple[DesignPrinciple, float, str]:
    """Adapt when ``base <= best`` (and raise base to best), otherwise explore."""
    if base <= best:
        top = Archive(evaluated.entries[:r], evaluated.task)
        return reasoner.adapt(principle, top, space), best, "adapt"
    return reasoner.explore(principle, space), base, "explore"


def run_task(
    task: str,
    table: BenchmarkTable,
    space: SpaceDescriptor,
    p0: DesignPrinciple,
    config: LaptConfig,
    reasoner: Reasoner,
    seed: int = 0,
    run_dir: str | Path | None = None,
) -> LaptResult:
    run_dir = Path(run_dir) if run_dir is not None else None
    if run_dir is not None and hasattr(reasoner, "with_transcript_dir"):
        reasoner = reasoner.with_transcript_dir(run_dir / "llm")
    principle = p0 if config.transfer_enabled else DesignPrinciple.everything(space, p0.provenance)
    cache = EvaluationCache()
    oracle = table.oracle(task)
    lineage = [{"branch": "initial", "principle": serialize(principle)}]
    base = -math.inf
    bases, iteration_bests, sizes, traces = [], [], [], []
    best_key, best_score = None, -math.inf

    for g in range(1, config.iterations + 1):
        try:
            refined = refine(space, to_constraints(principle, space))
        except ConstraintEmpty as exc:
            raise EmptyRefinedSpace(exc, serialize(principle)) from exc
        sizes.append(cardinality(refined))
        params = replace(config.evo, seed=derive_seed(seed, g))
        _, trace = evo.run(refined, oracle, params, cache)
        traces.append(trace)
        scored = {r.key: r.score for r in trace.records}
        evaluated = Archive.from_scored(
            (ArchiveEntry(key, decode(key, space), score) for key, score in scored.items()), task
        )
        top = evaluated.entries[0]
        iteration_bests.append(top.score)
        if top.score > best_score:
            best_key, best_score = top.key, top.score

        if config.adaptation_enabled:
            principle, base, branch = adapt_step(principle, evaluated, base, top.score, config.r, reasoner, space)
        else:
            base, branch = max(base, top.score), "hold"
        bases.append(base)
        lineage.append({"branch": branch, "principle": serialize(principle)})

        if run_dir is not None:
            _write(run_dir / "principles" / f"gen-{g - 1}.json", lineage[-2]["principle"])
            (run_dir / "traces").mkdir(parents=True, exist_ok=True)
            trace.write(run_dir / "traces" / f"task-{task}-g{g}.jsonl")
    if run_dir is not None:
        _write(run_dir / "principles" / f"gen-{config.iterations}.json", lineage[-1]["principle"])

    return LaptResult(
        task=task,
        seed=seed,
        best_key=best_key,
        best_raw=table.evaluate(best_key, task),
        best_score=best_score,
        model_rank=table.model_rank(best_key, task) if table.complete else None,
        unique_evaluations=cache.unique_evaluations,
        lineage=lineage,
        bases=bases,
        iteration_bests=iteration_bests,
        refined_sizes=sizes,
        traces=traces,
    )


def _write(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2), encoding="utf-8")


def run_suite(
    tasks: Sequence[str],
    table: BenchmarkTable,
    p0: DesignPrinciple,
    config: LaptConfig,
    reasoner: Reasoner,
    space: SpaceDescriptor | None = None,
    out_dir: str | Path | None = None,
) -> list[LaptResult]:
    """Run every task under every seed in ``config.seeds``.

    Each run draws its seed from (suite seed, task name), so results do not
    depend on the order of ``tasks``. Runs share only ``p0``.
    """
    space = space or table.space
    results = []
    for task in tasks:
        table.task(task)
        for suite_seed in config.seeds:
            run_dir = None if out_dir is None else Path(out_dir) / task / f"seed-{suite_seed}"
            result = run_task(task, table, space, p0, config, reasoner, derive_seed(suite_seed, task), run_dir)
            result.seed = suite_seed
            results.append(result)
    return results


def rea_baseline(
    table: BenchmarkTable,
    task: str,
    params: EvoParams,
    budget: int,
    seed: int = 0,
    space: SpaceDescriptor | None = None,
) -> tuple[str, float, int]:
    """Plain aging evolution over the full space until ``budget`` unique evaluations.

    Returns the best key, its normalized score and the evaluations used.
    """
    space = space or table.space
    params = replace(params, seed=derive_seed(seed, task, "rea"), generations=10**6)
    cache = EvaluationCache()
    _, trace = evo.run(space, table.oracle(task), params, cache, max_evaluations=budget)
    best = max(trace.records, key=lambda r: r.score)
    return best.key, best.score, cache.unique_evaluations
