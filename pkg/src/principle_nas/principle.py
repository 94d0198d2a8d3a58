"""Design principles: per-layer allowed sets plus free-text rationale."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

from .errors import ArityUnsatisfiable, EmptyLayer, SchemaError, UnknownName
from .space import LayerConstraint, SpaceDescriptor, SubspaceConstraints

ALL = "ALL"


@dataclass(frozen=True)
class LayerRule:
    """Allowed operators and sources of one layer; ``None`` means every candidate."""

    allowed_ops: tuple[str, ...] | None = None
    allowed_sources: tuple[str, ...] | None = None


@dataclass(frozen=True)
class Provenance:
    source_task: str | None = None
    backend: str = "manual"
    generation: int = 0
    created_at: str | None = None
    model: str | None = None

    def to_dict(self) -> dict:
        doc = {
            "source_task": self.source_task,
            "backend": self.backend,
            "generation": self.generation,
            "created_at": self.created_at,
        }
        if self.model is not None:
            doc["model"] = self.model
        return doc


@dataclass(frozen=True)
class DesignPrinciple:
    space_id: str
    per_layer: tuple[LayerRule, ...]
    rationale: tuple[str, ...] = ()
    provenance: Provenance = field(default_factory=Provenance)

    @classmethod
    def create(
        cls,
        space: SpaceDescriptor,
        per_layer: Sequence,
        rationale: Sequence[str] = (),
        provenance: Provenance | None = None,
    ) -> "DesignPrinciple":
        """Validate names against ``space`` and normalise the layer sets.

        Each entry of ``per_layer`` is a ``LayerRule`` or an
        ``(allowed_ops, allowed_sources)`` pair where either side may be
        ``None``/``"ALL"``. Sets are stored in candidate order and a set equal
        to the full candidate list collapses to ``ALL``.
        """
        if not per_layer:
            raise SchemaError("principle needs per_layer entries")
        if len(per_layer) != space.num_layers:
            raise SchemaError(f"principle has {len(per_layer)} layers, space has {space.num_layers}")
        unknown: list[str] = []
        rules = []
        for i, (entry, slot) in enumerate(zip(per_layer, space.layers)):
            if isinstance(entry, LayerRule):
                ops, sources = entry.allowed_ops, entry.allowed_sources
            else:
                ops, sources = entry
            ops = _normalise(ops, slot.candidate_ops, unknown, i, "op")
            sources = _normalise(sources, slot.candidate_sources, unknown, i, "source")
            rules.append(LayerRule(ops, sources))
        if unknown:
            raise UnknownName(unknown)
        return cls(space.space_id, tuple(rules), tuple(rationale), provenance or Provenance())

    @classmethod
    def everything(cls, space: SpaceDescriptor, provenance: Provenance | None = None) -> "DesignPrinciple":
        """The principle that keeps the whole space."""
        return cls(space.space_id, tuple(LayerRule() for _ in space.layers), (), provenance or Provenance())

    @property
    def generation(self) -> int:
        return self.provenance.generation

    def is_everything(self) -> bool:
        return all(r.allowed_ops is None and r.allowed_sources is None for r in self.per_layer)


def _normalise(value, candidates, unknown, layer, kind):
    if value is None or value == ALL:
        return None
    if isinstance(value, str):
        value = [value]
    chosen = set(value)
    unknown.extend(f"layer {layer} {kind} {name!r}" for name in value if name not in candidates)
    ordered = tuple(c for c in candidates if c in chosen)
    if ordered == tuple(candidates):
        return None
    return ordered


def to_constraints(p: DesignPrinciple, space: SpaceDescriptor) -> SubspaceConstraints:
    if len(p.per_layer) != space.num_layers:
        raise SchemaError(f"principle has {len(p.per_layer)} layers, space has {space.num_layers}")
    out = []
    for i, (rule, slot) in enumerate(zip(p.per_layer, space.layers)):
        ops = slot.candidate_ops if rule.allowed_ops is None else rule.allowed_ops
        sources = slot.candidate_sources if rule.allowed_sources is None else rule.allowed_sources
        if not ops:
            raise EmptyLayer(i)
        if slot.forced_sources and tuple(sources) != slot.candidate_sources:
            raise ArityUnsatisfiable(i, "sources of this layer are fixed")
        if len(sources) < slot.source_arity[0]:
            raise ArityUnsatisfiable(i)
        out.append(LayerConstraint(tuple(ops), tuple(sources)))
    return SubspaceConstraints(tuple(out))


def complement(p: DesignPrinciple, space: SpaceDescriptor) -> DesignPrinciple:
    """Swap every restricted layer to the candidates it previously excluded.

    Layers that allow everything stay that way. A source complement too small
    for the layer's arity falls back to all sources so the space stays
    searchable.
    """
    rules = []
    for rule, slot in zip(p.per_layer, space.layers):
        ops = None
        if rule.allowed_ops is not None:
            rest = tuple(o for o in slot.candidate_ops if o not in rule.allowed_ops)
            ops = rest if rest and len(rest) < len(slot.candidate_ops) else None
        sources = None
        if rule.allowed_sources is not None and not slot.forced_sources:
            rest = tuple(s for s in slot.candidate_sources if s not in rule.allowed_sources)
            if rest and len(rest) >= slot.source_arity[0] and len(rest) < len(slot.candidate_sources):
                sources = rest
        rules.append(LayerRule(ops, sources))
    note = f"exploration of candidates excluded by generation {p.generation}"
    return DesignPrinciple(
        p.space_id,
        tuple(rules),
        (note,) + tuple(line for line in p.rationale if line != note),
        replace(p.provenance, generation=p.generation + 1),
    )


def serialize(p: DesignPrinciple) -> dict:
    return {
        "space_id": p.space_id,
        "per_layer": [
            {
                "allowed_ops": ALL if r.allowed_ops is None else list(r.allowed_ops),
                "allowed_sources": ALL if r.allowed_sources is None else list(r.allowed_sources),
            }
            for r in p.per_layer
        ],
        "rationale": list(p.rationale),
        "provenance": p.provenance.to_dict(),
    }


def dumps(p: DesignPrinciple) -> str:
    return json.dumps(serialize(p), indent=2)


def deserialize(doc: dict, space: SpaceDescriptor, provenance: Provenance | None = None) -> DesignPrinciple:
    """Rebuild a principle, checking every name against ``space``.

    ``provenance`` overrides (or supplies) the document's provenance block,
    which lets replies that only carry ``per_layer`` be accepted.
    """
    if not isinstance(doc, dict):
        raise SchemaError("principle document must be a JSON object")
    if "per_layer" not in doc:
        raise SchemaError("principle document is missing per_layer")
    layers = doc["per_layer"]
    if not isinstance(layers, list) or not layers:
        raise SchemaError("per_layer must be a non-empty list")
    entries = []
    for i, layer in enumerate(layers):
        if not isinstance(layer, dict) or "allowed_ops" not in layer:
            raise SchemaError(f"per_layer[{i}] needs allowed_ops")
        ops = layer["allowed_ops"]
        sources = layer.get("allowed_sources", ALL)
        for value in (ops, sources):
            if value != ALL and not (isinstance(value, list) and all(isinstance(v, str) for v in value)):
                raise SchemaError(f"per_layer[{i}] sets must be lists of names or \"ALL\"")
        entries.append((ops, sources))
    rationale = doc.get("rationale", [])
    if not isinstance(rationale, list) or not all(isinstance(r, str) for r in rationale):
        raise SchemaError("rationale must be a list of strings")
    if provenance is None:
        prov = doc.get("provenance")
        if not isinstance(prov, dict):
            raise SchemaError("principle document is missing provenance")
        try:
            provenance = Provenance(
                source_task=prov.get("source_task"),
                backend=prov.get("backend", "manual"),
                generation=int(prov.get("generation", 0)),
                created_at=prov.get("created_at"),
                model=prov.get("model"),
            )
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad provenance: {exc}") from exc
    if "space_id" in doc and doc["space_id"] != space.space_id:
        raise SchemaError(f"principle targets space {doc['space_id']!r}, not {space.space_id!r}")
    return DesignPrinciple.create(space, entries, rationale, provenance)


def loads(text: str, space: SpaceDescriptor) -> DesignPrinciple:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"principle is not valid JSON: {exc}") from exc
    return deserialize(doc, space)
