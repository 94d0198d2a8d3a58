"""Layered cell search spaces, architectures and subspace refinement.

A space is an ordered list of layer slots. Each slot offers candidate
operators and candidate information sources (earlier layer indices or named
cell inputs). An architecture picks, for every layer, one operator and a set
of sources. DARTS-style stages pick several incoming edges, each carrying its
own operator (``ops_per_source``).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    ArityUnsatisfiable,
    ConstraintEmpty,
    EmptyLayer,
    InvalidArchitecture,
    ParseError,
    SchemaError,
    TooLarge,
    UnknownName,
)

RESERVED = set("|~+,") | {" ", "\t", "\n"}

NAS201_OPS = ("none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3")
TRANS101_OPS = ("none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3")
DARTS_OPS = (
    "none",
    "max_pool_3x3",
    "avg_pool_3x3",
    "skip_connect",
    "sep_conv_3x3",
    "sep_conv_5x5",
    "dil_conv_3x3",
    "dil_conv_5x5",
)
# edge (from_node, to_node) order used by the 4-node NAS-Bench-201 cell
CELL_EDGES = ((0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3))


def as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _check_name(name: str, kind: str) -> None:
    if not isinstance(name, str) or not name or RESERVED & set(name):
        raise SchemaError(f"invalid {kind} name {name!r}")


@dataclass(frozen=True)
class Violation:
    layer: int | None
    rule: str
    detail: str

    def __str__(self) -> str:
        where = "architecture" if self.layer is None else f"layer {self.layer}"
        return f"{where}: {self.rule}: {self.detail}"


@dataclass(frozen=True)
class LayerChoice:
    """Decision taken at one layer.

    ``ops`` has a single entry for ordinary layers; for ``ops_per_source``
    layers it is aligned with ``sources`` (one operator per incoming edge).
    """

    ops: tuple[str, ...]
    sources: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        object.__setattr__(self, "sources", tuple(self.sources))


@dataclass(frozen=True)
class LayerSlot:
    candidate_ops: tuple[str, ...]
    candidate_sources: tuple[str, ...] = ()
    source_arity: tuple[int, int] | None = None
    distinct_sources: bool = True
    ops_per_source: bool = False
    forced_sources: bool | None = None

    def __post_init__(self):
        ops = tuple(self.candidate_ops)
        sources = tuple(self.candidate_sources)
        arity = self.source_arity
        if arity is None:
            arity = (len(sources), len(sources))
        arity = (int(arity[0]), int(arity[1]))
        forced = self.forced_sources
        if forced is None:
            forced = arity[0] == len(sources)
        object.__setattr__(self, "candidate_ops", ops)
        object.__setattr__(self, "candidate_sources", sources)
        object.__setattr__(self, "source_arity", arity)
        object.__setattr__(self, "forced_sources", bool(forced))

        if not ops:
            raise SchemaError("layer needs at least one candidate operator")
        for name in ops:
            _check_name(name, "operator")
        for name in sources:
            _check_name(name, "source")
        if len(set(ops)) != len(ops) or len(set(sources)) != len(sources):
            raise SchemaError("duplicate candidate names in layer")
        lo, hi = arity
        if not 0 <= lo <= hi <= len(sources):
            raise SchemaError(f"source arity {arity} invalid for {len(sources)} sources")
        if self.ops_per_source and lo < 1:
            raise SchemaError("ops_per_source layers need at least one source")
        if forced and not lo == hi == len(sources):
            raise SchemaError("forced sources require arity equal to the candidate count")

    @cached_property
    def _op_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.candidate_ops)}

    @cached_property
    def _src_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.candidate_sources)}

    @cached_property
    def selections(self) -> tuple[tuple[str, ...], ...]:
        """Valid source tuples for ordinary layers, canonical order."""
        lo, hi = self.source_arity
        combos = itertools.combinations if self.distinct_sources else itertools.combinations_with_replacement
        idx = sorted(c for m in range(lo, hi + 1) for c in combos(range(len(self.candidate_sources)), m))
        return tuple(tuple(self.candidate_sources[i] for i in c) for c in idx)

    @cached_property
    def choices(self) -> tuple[LayerChoice, ...]:
        """Every valid decision for this layer in canonical order."""
        if not self.ops_per_source:
            return tuple(LayerChoice((op,), sel) for op in self.candidate_ops for sel in self.selections)
        lo, hi = self.source_arity
        n, k = len(self.candidate_sources), len(self.candidate_ops)
        keyed = []
        for m in range(lo, hi + 1):
            if self.distinct_sources:
                for srcs in itertools.combinations(range(n), m):
                    for ops in itertools.product(range(k), repeat=m):
                        keyed.append((ops, srcs))
            else:
                pairs = [(s, o) for s in range(n) for o in range(k)]
                for edges in itertools.combinations_with_replacement(pairs, m):
                    keyed.append((tuple(o for _, o in edges), tuple(s for s, _ in edges)))
        keyed.sort()
        return tuple(
            LayerChoice(
                tuple(self.candidate_ops[o] for o in ops),
                tuple(self.candidate_sources[s] for s in srcs),
            )
            for ops, srcs in keyed
        )

    @cached_property
    def choice_index(self) -> dict[LayerChoice, int]:
        return {c: i for i, c in enumerate(self.choices)}

    def count(self) -> int:
        """Number of valid decisions, computed in closed form."""
        lo, hi = self.source_arity
        n, k = len(self.candidate_sources), len(self.candidate_ops)
        if self.ops_per_source:
            if self.distinct_sources:
                return sum(math.comb(n, m) * k**m for m in range(lo, hi + 1))
            return sum(math.comb(n * k + m - 1, m) for m in range(lo, hi + 1))
        if self.distinct_sources:
            return k * sum(math.comb(n, m) for m in range(lo, hi + 1))
        return k * sum(math.comb(n + m - 1, m) for m in range(lo, hi + 1))

    def canonical(self, ops: Sequence[str], sources: Sequence[str]) -> LayerChoice:
        """Order sources (and aligned ops) by candidate position."""
        if self.ops_per_source:
            edges = sorted(zip(sources, ops), key=lambda e: (self._src_index[e[0]], self._op_index[e[1]]))
            return LayerChoice(tuple(o for _, o in edges), tuple(s for s, _ in edges))
        return LayerChoice(tuple(ops), tuple(sorted(sources, key=self._src_index.__getitem__)))

    def check(self, choice: LayerChoice, layer: int) -> list[Violation]:
        out: list[Violation] = []
        ops, sources = choice.ops, choice.sources
        if self.ops_per_source:
            if len(ops) != len(sources):
                out.append(Violation(layer, "op_count", f"{len(ops)} ops for {len(sources)} sources"))
        elif len(ops) != 1:
            out.append(Violation(layer, "op_count", f"expected one operator, got {len(ops)}"))
        for op in ops:
            if op not in self._op_index:
                out.append(Violation(layer, "op", f"{op!r} not in {list(self.candidate_ops)}"))
        for src in sources:
            if src not in self._src_index:
                out.append(Violation(layer, "source", f"{src!r} not in {list(self.candidate_sources)}"))
        lo, hi = self.source_arity
        if not lo <= len(sources) <= hi:
            out.append(Violation(layer, "arity", f"{len(sources)} sources outside [{lo}, {hi}]"))
        if self.distinct_sources and len(set(sources)) != len(sources):
            out.append(Violation(layer, "distinct", f"sources {list(sources)} repeat"))
        if self.forced_sources and sources != self.candidate_sources:
            out.append(Violation(layer, "forced", f"sources must be {list(self.candidate_sources)}"))
        if not out:
            canon = self.canonical(ops, sources)
            if canon != choice:
                out.append(Violation(layer, "order", "sources not in canonical order"))
        return out

    def neighbors(self, choice: LayerChoice) -> list[LayerChoice]:
        """Decisions reachable by editing one operator or one source decision."""
        found: list[LayerChoice] = []
        if not self.ops_per_source:
            found += [LayerChoice((op,), choice.sources) for op in self.candidate_ops if op != choice.ops[0]]
            found += [LayerChoice(choice.ops, sel) for sel in self.selections if sel != choice.sources]
        else:
            edges = list(zip(choice.ops, choice.sources))
            lo, hi = self.source_arity
            for j, (op, src) in enumerate(edges):
                for other in self.candidate_ops:
                    if other != op:
                        found.append(self._edges(edges[:j] + [(other, src)] + edges[j + 1 :]))
                if self.forced_sources:
                    continue
                for other in self.candidate_sources:
                    if other == src or (self.distinct_sources and other in choice.sources):
                        continue
                    found.append(self._edges(edges[:j] + [(op, other)] + edges[j + 1 :]))
                if len(edges) > lo:
                    found.append(self._edges(edges[:j] + edges[j + 1 :]))
            if len(edges) < hi and not self.forced_sources:
                for src in self.candidate_sources:
                    if self.distinct_sources and src in choice.sources:
                        continue
                    for op in self.candidate_ops:
                        found.append(self._edges(edges + [(op, src)]))
        unique = dict.fromkeys(c for c in found if c != choice)
        return list(unique)

    def _edges(self, edges) -> LayerChoice:
        return self.canonical([o for o, _ in edges], [s for _, s in edges])

    def to_dict(self) -> dict:
        doc = {
            "candidate_ops": list(self.candidate_ops),
            "candidate_sources": list(self.candidate_sources),
            "source_arity": list(self.source_arity),
            "distinct_sources": self.distinct_sources,
        }
        if self.ops_per_source:
            doc["ops_per_source"] = True
        if self.forced_sources != (self.source_arity[0] == len(self.candidate_sources)):
            doc["forced_sources"] = self.forced_sources
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "LayerSlot":
        try:
            return cls(
                candidate_ops=tuple(doc["candidate_ops"]),
                candidate_sources=tuple(doc.get("candidate_sources", ())),
                source_arity=tuple(doc["source_arity"]) if "source_arity" in doc else None,
                distinct_sources=bool(doc.get("distinct_sources", True)),
                ops_per_source=bool(doc.get("ops_per_source", False)),
                forced_sources=doc.get("forced_sources"),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad layer document: {exc}") from exc


@dataclass(frozen=True)
class SpaceDescriptor:
    space_id: str
    layers: tuple[LayerSlot, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise SchemaError("a space needs at least one layer")
        for i, slot in enumerate(layers):
            for src in slot.candidate_sources:
                if src.lstrip("-").isdigit() and not 0 <= int(src) < i:
                    raise SchemaError(f"layer {i} source {src!r} is not an earlier layer")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def to_dict(self) -> dict:
        return {"space_id": self.space_id, "layers": [s.to_dict() for s in self.layers]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "SpaceDescriptor":
        if not isinstance(doc, dict) or "space_id" not in doc or "layers" not in doc:
            raise SchemaError("space document needs space_id and layers")
        return cls(doc["space_id"], tuple(LayerSlot.from_dict(d) for d in doc["layers"]))


@dataclass(frozen=True)
class Architecture:
    choices: tuple[LayerChoice, ...]

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(self.choices))

    def __len__(self) -> int:
        return len(self.choices)

    @property
    def ops(self) -> list[tuple[str, ...]]:
        return [c.ops for c in self.choices]

    @classmethod
    def from_ops(cls, ops: Sequence[str], space: SpaceDescriptor) -> "Architecture":
        """Build an architecture for a fixed-topology space from operator names."""
        return cls(tuple(LayerChoice((op,), slot.candidate_sources) for op, slot in zip(ops, space.layers)))


@dataclass(frozen=True)
class LayerConstraint:
    allowed_ops: tuple[str, ...]
    allowed_sources: tuple[str, ...]


@dataclass(frozen=True)
class SubspaceConstraints:
    per_layer: tuple[LayerConstraint, ...]

    @classmethod
    def full(cls, space: SpaceDescriptor) -> "SubspaceConstraints":
        return cls(tuple(LayerConstraint(s.candidate_ops, s.candidate_sources) for s in space.layers))

    @classmethod
    def from_ops(cls, space: SpaceDescriptor, allowed: Sequence[Sequence[str]]) -> "SubspaceConstraints":
        return cls(
            tuple(LayerConstraint(tuple(ops), s.candidate_sources) for ops, s in zip(allowed, space.layers))
        )


def validate(arch: Architecture, space: SpaceDescriptor) -> list[Violation]:
    """Return every rule ``arch`` breaks in ``space``; empty means valid."""
    out: list[Violation] = []
    if len(arch.choices) != space.num_layers:
        out.append(Violation(None, "length", f"{len(arch.choices)} layers, space has {space.num_layers}"))
    for i, (choice, slot) in enumerate(zip(arch.choices, space.layers)):
        out.extend(slot.check(choice, i))
    return out


def refine(space: SpaceDescriptor, constraints: SubspaceConstraints) -> SpaceDescriptor:
    """Restrict each layer to the allowed operators and sources."""
    if len(constraints.per_layer) != space.num_layers:
        raise SchemaError(f"constraints cover {len(constraints.per_layer)} layers, space has {space.num_layers}")
    slots = []
    for i, (slot, rule) in enumerate(zip(space.layers, constraints.per_layer)):
        unknown = [o for o in rule.allowed_ops if o not in slot.candidate_ops]
        unknown += [s for s in rule.allowed_sources if s not in slot.candidate_sources]
        if unknown:
            raise UnknownName(unknown, f"layer {i}")
        ops = tuple(o for o in slot.candidate_ops if o in set(rule.allowed_ops))
        sources = tuple(s for s in slot.candidate_sources if s in set(rule.allowed_sources))
        if not ops:
            raise EmptyLayer(i)
        lo, hi = slot.source_arity
        if slot.forced_sources and sources != slot.candidate_sources:
            raise ArityUnsatisfiable(i, "sources of this layer are fixed and cannot be restricted")
        if len(sources) < lo:
            raise ArityUnsatisfiable(i)
        hi_r = min(hi, len(sources))
        slots.append(
            LayerSlot(
                ops,
                sources,
                (lo, hi_r),
                slot.distinct_sources,
                slot.ops_per_source,
                slot.forced_sources,
            )
        )
    return SpaceDescriptor(space.space_id, tuple(slots))


def cardinality(space: SpaceDescriptor, constraints: SubspaceConstraints | None = None) -> int:
    """Exact number of architectures in ``space`` (optionally refined)."""
    if constraints is not None:
        space = refine(space, constraints)
    total = math.prod(slot.count() for slot in space.layers)
    if total == 0:
        raise ConstraintEmpty(-1, "space is empty")
    return total


def sample_uniform(space: SpaceDescriptor, rng) -> Architecture:
    rng = as_rng(rng)
    return Architecture(tuple(slot.choices[int(rng.integers(len(slot.choices)))] for slot in space.layers))


def enumerate_space(space: SpaceDescriptor, cap: int) -> Iterator[Architecture]:
    """Yield every architecture once, in canonical lexicographic order."""
    total = cardinality(space)
    if total > cap:
        raise TooLarge(total, cap)
    return (Architecture(combo) for combo in itertools.product(*(slot.choices for slot in space.layers)))


def choice_indices(arch: Architecture, space: SpaceDescriptor) -> tuple[int, ...]:
    try:
        return tuple(slot.choice_index[c] for slot, c in zip(space.layers, arch.choices))
    except KeyError:
        raise InvalidArchitecture(validate(arch, space)) from None


def mutate(arch: Architecture, space: SpaceDescriptor, rng) -> Architecture:
    """Change exactly one decision of one layer that has alternatives."""
    rng = as_rng(rng)
    movable = [i for i, slot in enumerate(space.layers) if slot.count() >= 2]
    if not movable:
        return arch
    layer = movable[int(rng.integers(len(movable)))]
    options = space.layers[layer].neighbors(arch.choices[layer])
    new = options[int(rng.integers(len(options)))]
    return Architecture(arch.choices[:layer] + (new,) + arch.choices[layer + 1 :])


def encode(arch: Architecture, space: SpaceDescriptor) -> str:
    """Canonical text key, e.g. ``|nor_conv_3x3|skip_connect|...|``.

    Forced sources are implied by the space and left out of the token.
    """
    tokens = []
    for choice, slot in zip(arch.choices, space.layers):
        token = ",".join(choice.ops)
        if not slot.forced_sources:
            token += "~" + "+".join(choice.sources)
        tokens.append(token)
    return "|" + "|".join(tokens) + "|"


def decode(key: str, space: SpaceDescriptor) -> Architecture:
    if not isinstance(key, str) or len(key) < 3 or key[0] != "|" or key[-1] != "|":
        raise ParseError(f"malformed key {key!r}")
    tokens = key[1:-1].split("|")
    if any(not t for t in tokens):
        raise ParseError(f"empty layer token in {key!r}")
    if len(tokens) != space.num_layers:
        raise ParseError(f"key has {len(tokens)} layers, space has {space.num_layers}")
    choices = []
    for token, slot in zip(tokens, space.layers):
        op_part, sep, src_part = token.partition("~")
        if "~" in src_part or not op_part or any(not o for o in op_part.split(",")):
            raise ParseError(f"malformed token {token!r}")
        if sep:
            sources = tuple(src_part.split("+")) if src_part else ()
            if any(not s for s in sources):
                raise ParseError(f"malformed token {token!r}")
        else:
            sources = slot.candidate_sources if slot.forced_sources else ()
        choices.append(LayerChoice(tuple(op_part.split(",")), sources))
    arch = Architecture(tuple(choices))
    problems = validate(arch, space)
    if problems:
        raise InvalidArchitecture(problems)
    return arch


def fixed_topology_space(space_id: str, ops: Sequence[str], edges=CELL_EDGES) -> SpaceDescriptor:
    """Cell with fixed wiring: each layer is an edge whose sources are forced."""
    slots = []
    for from_node, _ in edges:
        if from_node == 0:
            sources = ("in0",)
        else:
            sources = tuple(str(j) for j, (_, to) in enumerate(edges) if to == from_node)
        slots.append(LayerSlot(tuple(ops), sources))
    return SpaceDescriptor(space_id, tuple(slots))


def nas201_space(ops: Sequence[str] = NAS201_OPS) -> SpaceDescriptor:
    return fixed_topology_space("nas201", ops)


def trans101_space(ops: Sequence[str] = TRANS101_OPS) -> SpaceDescriptor:
    return fixed_topology_space("trans101", ops)


def darts_space(cells: Sequence[str] = ("normal",), ops: Sequence[str] = DARTS_OPS, stages: int = 4) -> SpaceDescriptor:
    """DARTS cell(s): stage k picks two distinct inputs among the cell inputs and earlier stages."""
    slots = []
    for c, cell in enumerate(cells):
        prefix = "" if c == 0 else cell[0]
        inputs = (f"{prefix}in0", f"{prefix}in1")
        offset = c * stages
        for k in range(stages):
            sources = inputs + tuple(str(offset + j) for j in range(k))
            slots.append(LayerSlot(tuple(ops), sources, (2, 2), True, ops_per_source=True, forced_sources=False))
    space_id = "darts" if len(cells) == 1 else "darts-" + "-".join(cells)
    return SpaceDescriptor(space_id, tuple(slots))


BUILTIN_SPACES = {
    "nas201": nas201_space,
    "trans101": trans101_space,
    "darts": darts_space,
    "darts-normal-reduction": lambda: darts_space(("normal", "reduction")),
}


def builtin_space(space_id: str) -> SpaceDescriptor:
    try:
        return BUILTIN_SPACES[space_id]()
    except KeyError:
        raise SchemaError(f"unknown space {space_id!r}; known: {sorted(BUILTIN_SPACES)}") from None


def load_space(ref: str) -> SpaceDescriptor:
    """Resolve a builtin space id or a path to a space JSON document."""
    if ref in BUILTIN_SPACES:
        return builtin_space(ref)
    try:
        with open(ref, encoding="utf-8") as fh:
            return SpaceDescriptor.from_dict(json.load(fh))
    except FileNotFoundError:
        raise SchemaError(f"unknown space {ref!r}") from None
