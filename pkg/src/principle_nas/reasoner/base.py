"""Contract shared by principle-reasoning backends."""

from __future__ import annotations

from typing import Protocol

from ..archive import Archive
from ..principle import DesignPrinciple
from ..space import SpaceDescriptor


class Reasoner(Protocol):
    """Learns, adapts and explores design principles.

    Every method returns a principle that is valid for ``space``.
    """

    backend_id: str

    def learn(self, archive: Archive, space: SpaceDescriptor) -> DesignPrinciple: ...

    def adapt(self, principle: DesignPrinciple, top_archs: Archive, space: SpaceDescriptor) -> DesignPrinciple: ...

    def explore(self, principle: DesignPrinciple, space: SpaceDescriptor) -> DesignPrinciple: ...
