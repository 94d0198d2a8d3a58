"""Scored architecture collections passed between benchmark, search and reasoners."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .space import Architecture


@dataclass(frozen=True)
class ArchiveEntry:
    key: str
    arch: Architecture
    score: float


@dataclass(frozen=True)
class Archive:
    """Architectures sorted best-first by normalized (higher-is-better) score."""

    entries: tuple[ArchiveEntry, ...]
    task: str | None = None

    @classmethod
    def from_scored(cls, items: Iterable[ArchiveEntry], task: str | None = None, limit: int | None = None) -> "Archive":
        ranked = sorted(items, key=lambda e: (-e.score, e.key))
        if limit is not None:
            ranked = ranked[:limit]
        return cls(tuple(ranked), task)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def architectures(self) -> list[Architecture]:
        return [e.arch for e in self.entries]
