"""Four-part prompt templates (task description, strategy, expected output, note)."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from string import Template

from ..archive import Archive
from ..errors import ConfigError, TemplateMissing
from ..principle import DesignPrinciple, serialize
from ..space import Architecture, SpaceDescriptor

PART_ORDER = ("TaskDescription", "Strategy", "ExpectedOutput", "Note")
HEADINGS = {
    "TaskDescription": "Task description",
    "Strategy": "Strategy",
    "ExpectedOutput": "Expected output",
    "Note": "Note",
}
MODES = ("learn", "adapt", "explore")
_SECTION = re.compile(r"^@@[ \t]*(\S+)[ \t]*$", re.MULTILINE)


@dataclass(frozen=True)
class PromptBundle:
    parts: tuple[tuple[str, str], ...]
    rendered: str

    def part(self, kind: str) -> str | None:
        return dict(self.parts).get(kind)


@dataclass(frozen=True)
class PromptTemplate:
    """Sections parsed from a template file.

    Sections start with a line ``@@ <name>``; names are ``code`` or
    ``<mode>.<Part>`` such as ``learn.Strategy``. Bodies use ``$name``
    placeholders.
    """

    name: str
    sections: dict[str, str]

    @classmethod
    def parse(cls, text: str, name: str = "<template>") -> "PromptTemplate":
        if not text.strip():
            raise TemplateMissing(f"template {name} is empty")
        marks = list(_SECTION.finditer(text))
        sections = {}
        for m, nxt in zip(marks, marks[1:] + [None]):
            end = nxt.start() if nxt else len(text)
            sections[m.group(1)] = text[m.end() : end].strip("\n")
        for required in ("code", "learn.TaskDescription", "learn.Strategy"):
            if not sections.get(required, "").strip():
                raise TemplateMissing(f"template {name} lacks section {required!r}")
        return cls(name, sections)

    @classmethod
    def load(cls, path: str | Path) -> "PromptTemplate":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise TemplateMissing(f"template file {path} not found") from None
        return cls.parse(text, str(path))

    @classmethod
    def for_space(cls, space_id: str) -> "PromptTemplate":
        """Bundled template for a space id (``darts-*`` maps to darts)."""
        stem = space_id.split("-")[0]
        files = resources.files("principle_nas.reasoner") / "templates"
        name = f"{stem}.txt" if (files / f"{stem}.txt").is_file() else "generic.txt"
        return cls.parse((files / name).read_text(encoding="utf-8"), name)

    def render(self, mode: str, values: dict) -> PromptBundle:
        if mode not in MODES:
            raise ConfigError(f"unknown prompt mode {mode!r}")
        if not self.sections.get(f"{mode}.TaskDescription", "").strip():
            raise TemplateMissing(f"template {self.name} lacks section '{mode}.TaskDescription'")
        values = {**values, "code": self.sections["code"]}
        parts = []
        for kind in PART_ORDER:
            body = self.sections.get(f"{mode}.{kind}")
            if body and body.strip():
                parts.append((kind, Template(body).safe_substitute(values).strip()))
        rendered = "\n\n".join(f"## {HEADINGS[k]}\n{text}" for k, text in parts) + "\n"
        return PromptBundle(tuple(parts), rendered)


def layer_list(arch: Architecture, space: SpaceDescriptor) -> list:
    """Architecture parameters in the compact form shown to the model."""
    out = []
    for choice, slot in zip(arch.choices, space.layers):
        if slot.forced_sources:
            out.append(choice.ops[0] if len(choice.ops) == 1 else list(choice.ops))
        elif slot.ops_per_source:
            out.append([(op, src) for op, src in zip(choice.ops, choice.sources)])
        else:
            out.append((choice.ops[0], list(choice.sources)))
    return out


def parameter_lines(archive: Archive, space: SpaceDescriptor) -> str:
    return "\n".join(
        f"arch-{n:03d}: Layer_list = {layer_list(e.arch, space)!r}  # score {e.score:.6g}"
        for n, e in enumerate(archive, start=1)
    )


def candidate_lines(space: SpaceDescriptor) -> str:
    lines = []
    for i, slot in enumerate(space.layers):
        line = f"layer {i}: operators {list(slot.candidate_ops)}"
        if not slot.forced_sources:
            lo, hi = slot.source_arity
            line += f"; sources {list(slot.candidate_sources)} (choose {lo}" + (f"-{hi})" if hi != lo else ")")
        lines.append(line)
    return "\n".join(lines)


def reply_schema(space: SpaceDescriptor) -> str:
    example = {
        "per_layer": [
            {
                "allowed_ops": list(slot.candidate_ops[:2]),
                "allowed_sources": "ALL",
            }
            for slot in space.layers
        ],
        "rationale": ["<one sentence per design principle>"],
    }
    return json.dumps(example, indent=1)


def _common(space: SpaceDescriptor) -> dict:
    return {
        "space_id": space.space_id,
        "num_layers": space.num_layers,
        "candidates": candidate_lines(space),
        "schema": reply_schema(space),
    }


def _principle_text(principle: DesignPrinciple) -> str:
    doc = serialize(principle)
    return json.dumps({"per_layer": doc["per_layer"], "rationale": doc["rationale"]}, indent=1)


def build_learning_prompt(archive: Archive, space: SpaceDescriptor, template: PromptTemplate) -> PromptBundle:
    if len(archive) == 0:
        raise ConfigError("learning prompt needs a non-empty archive")
    values = _common(space) | {
        "task": archive.task or "the source task",
        "num_architectures": len(archive),
        "architectures": parameter_lines(archive, space),
    }
    return template.render("learn", values)


def build_adapt_prompt(
    principle: DesignPrinciple, top_archs: Archive, space: SpaceDescriptor, template: PromptTemplate
) -> PromptBundle:
    if len(top_archs) == 0:
        raise ConfigError("adaptation prompt needs at least one architecture")
    values = _common(space) | {
        "task": top_archs.task or "the target task",
        "num_architectures": len(top_archs),
        "architectures": parameter_lines(top_archs, space),
        "principle": _principle_text(principle),
    }
    return template.render("adapt", values)


def build_explore_prompt(principle: DesignPrinciple, space: SpaceDescriptor, template: PromptTemplate) -> PromptBundle:
    values = _common(space) | {"principle": _principle_text(principle)}
    return template.render("explore", values)
