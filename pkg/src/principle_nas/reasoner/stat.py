"""Deterministic frequency-count backend, usable offline."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import ClassVar, Sequence

from ..archive import Archive
from ..errors import ConfigError
from ..principle import DesignPrinciple, LayerRule, Provenance, complement
from ..space import LayerSlot, SpaceDescriptor


def _ranked(counts: Counter, candidates: Sequence[str]) -> list[str]:
    # most frequent first, ties by candidate order
    return sorted(candidates, key=lambda c: (-counts[c], candidates.index(c)))


def _layer_counts(archive: Archive, layer: int) -> tuple[Counter, Counter]:
    ops, sources = Counter(), Counter()
    for entry in archive:
        choice = entry.arch.choices[layer]
        ops.update(choice.ops)
        sources.update(choice.sources)
    return ops, sources


@dataclass(frozen=True)
class StatReasoner:
    """Keeps the most frequent operators (and sources) of each layer.

    Args:
        keep_m: operators kept per layer by ``learn``/``adapt``.
        keep_s: sources kept per layer where sources are a real choice;
            ``None`` leaves sources unrestricted. Never drops below the
            layer's minimum source arity.
        retention: fraction of the previous principle's per-layer set that
            ``adapt`` carries over (best-supported members first).
        pad: whether ``adapt`` tops each layer up to ``keep_m`` operators
            with unseen candidates when the top architectures use fewer.
    """

    keep_m: int = 2
    keep_s: int | None = None
    retention: float = 0.0
    pad: bool = False

    backend_id: ClassVar[str] = "stat"

    def __post_init__(self):
        if self.keep_m < 1 or (self.keep_s is not None and self.keep_s < 1):
            raise ConfigError("keep_m and keep_s must be >= 1")
        if not 0.0 <= self.retention <= 1.0:
            raise ConfigError("retention must lie in [0, 1]")

    def _check(self, archive: Archive, space: SpaceDescriptor) -> None:
        if len(archive) == 0:
            raise ConfigError("cannot reason over an empty archive")
        smallest = min(len(s.candidate_ops) for s in space.layers)
        if self.keep_m > smallest:
            raise ConfigError(f"keep_m={self.keep_m} exceeds the smallest operator set ({smallest})")

    def _source_quota(self, slot: LayerSlot) -> int | None:
        if slot.forced_sources or self.keep_s is None:
            return None
        return max(self.keep_s, slot.source_arity[0])

    def learn(self, archive: Archive, space: SpaceDescriptor) -> DesignPrinciple:
        self._check(archive, space)
        rules, notes = [], []
        for i, slot in enumerate(space.layers):
            op_counts, src_counts = _layer_counts(archive, i)
            ops = _ranked(op_counts, list(slot.candidate_ops))[: self.keep_m]
            quota = self._source_quota(slot)
            sources = None if quota is None else _ranked(src_counts, list(slot.candidate_sources))[:quota]
            rules.append((ops, sources))
            notes.append(_describe(i, ops, op_counts, len(archive)))
        prov = Provenance(source_task=archive.task, backend=self.backend_id, generation=0)
        return DesignPrinciple.create(space, rules, notes, prov)

    def adapt(self, principle: DesignPrinciple, top_archs: Archive, space: SpaceDescriptor) -> DesignPrinciple:
        self._check(top_archs, space)
        rules, notes = [], []
        for i, (slot, old) in enumerate(zip(space.layers, principle.per_layer)):
            op_counts, src_counts = _layer_counts(top_archs, i)
            ops = self._update(op_counts, list(slot.candidate_ops), old.allowed_ops, self.keep_m)
            quota = self._source_quota(slot)
            sources = None
            if quota is not None:
                sources = self._update(src_counts, list(slot.candidate_sources), old.allowed_sources, quota)
            rules.append(LayerRule(tuple(ops), None if sources is None else tuple(sources)))
            notes.append(_describe(i, ops, op_counts, len(top_archs)))
        prov = Provenance(
            source_task=principle.provenance.source_task,
            backend=self.backend_id,
            generation=principle.generation + 1,
        )
        return DesignPrinciple.create(space, rules, notes, prov)

    def _update(self, counts: Counter, candidates: list[str], previous, quota: int) -> list[str]:
        ranked = _ranked(counts, candidates)
        fresh = ranked[:quota] if self.pad else [c for c in ranked if counts[c] > 0][:quota]
        prev = candidates if previous is None else list(previous)
        kept = _ranked(counts, prev)[: math.ceil(self.retention * len(prev))]
        chosen = set(fresh) | set(kept)
        return [c for c in candidates if c in chosen]

    def explore(self, principle: DesignPrinciple, space: SpaceDescriptor) -> DesignPrinciple:
        return complement(principle, space)


def _describe(layer: int, ops: list[str], counts: Counter, n: int) -> str:
    support = ", ".join(f"{op} ({counts[op]}/{n})" for op in ops)
    return f"layer {layer}: prefer {support}"
