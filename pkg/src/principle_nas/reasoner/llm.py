"""Chat-completion backed reasoner.

Prompts are sent over an OpenAI-style chat endpoint. The reply must carry
one fenced JSON block describing the principle; malformed replies are sent
back to the model with the parse error, up to ``max_retries`` times.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, ClassVar
from urllib.parse import urlparse

import httpx

from ..archive import Archive
from ..errors import (
    ConfigError,
    ConstraintEmpty,
    MalformedAfterRetries,
    SchemaError,
    SchemaViolation,
    TransportError,
)
from ..principle import DesignPrinciple, Provenance, deserialize, to_constraints
from ..space import SpaceDescriptor
from .prompts import PromptBundle, PromptTemplate, build_adapt_prompt, build_explore_prompt, build_learning_prompt

log = logging.getLogger(__name__)

SYSTEM_PROMPT = (
    "You analyse neural architectures and state design principles as per-layer "
    "sets of allowed operators and sources. Always answer with one fenced JSON block."
)
_FENCE = re.compile(r"```[ \t]*(?:json)?[ \t]*\r?\n(.*?)```", re.DOTALL | re.IGNORECASE)

# (url, headers, body, timeout) -> decoded JSON reply
Transport = Callable[[str, dict, dict, float], dict]


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str
    model: str
    temperature: float = 0.0
    max_retries: int = 2
    timeout: float = 60.0
    api_key_env: str = "LAPT_API_KEY"

    def __post_init__(self):
        url = urlparse(self.endpoint)
        if url.scheme not in ("http", "https") or not url.netloc:
            raise ConfigError(f"endpoint {self.endpoint!r} is not an http(s) URL")
        if self.temperature < 0 or self.max_retries < 0 or self.timeout <= 0:
            raise ConfigError("temperature >= 0, max_retries >= 0 and timeout > 0 are required")


def httpx_transport(url: str, headers: dict, body: dict, timeout: float) -> dict:
    try:
        response = httpx.post(url, headers=headers, json=body, timeout=timeout)
    except httpx.TimeoutException as exc:
        raise TransportError(f"request timed out after {timeout}s") from exc
    except httpx.HTTPError as exc:
        raise TransportError(f"request failed: {exc.__class__.__name__}") from exc
    if response.status_code != 200:
        raise TransportError(f"endpoint answered HTTP {response.status_code}", status=response.status_code)
    try:
        return response.json()
    except ValueError as exc:
        raise TransportError("endpoint reply is not JSON", status=response.status_code) from exc


def extract_fenced_json(text: str) -> dict:
    match = _FENCE.search(text or "")
    if match is None:
        raise SchemaViolation("reply contains no fenced JSON block")
    try:
        doc = json.loads(match.group(1))
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"fenced block is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaViolation("fenced block must hold a JSON object")
    return doc


class LlmReasoner:
    """Principle reasoner that talks to a chat-completion endpoint.

    One request is in flight at a time. Each HTTP call writes
    ``transcript-<n>.json`` (messages, raw reply, parse outcome) when a
    transcript directory is set; the API secret never enters those files.
    """

    backend_id: ClassVar[str] = "llm"

    def __init__(
        self,
        config: LlmConfig,
        template: PromptTemplate | None = None,
        transport: Transport | None = None,
        transcript_dir: str | Path | None = None,
    ):
        self.config = config
        self.template = template
        self.transport = transport or httpx_transport
        self.transcript_dir = Path(transcript_dir) if transcript_dir else None
        self.calls = 0
        self.last_retry_count = 0

    def with_transcript_dir(self, path: str | Path) -> "LlmReasoner":
        return LlmReasoner(self.config, self.template, self.transport, path)

    def _template(self, space: SpaceDescriptor) -> PromptTemplate:
        return self.template or PromptTemplate.for_space(space.space_id)

    def learn(self, archive: Archive, space: SpaceDescriptor) -> DesignPrinciple:
        bundle = build_learning_prompt(archive, space, self._template(space))
        return self._ask("learn", bundle, space, archive.task, 0)

    def adapt(self, principle: DesignPrinciple, top_archs: Archive, space: SpaceDescriptor) -> DesignPrinciple:
        bundle = build_adapt_prompt(principle, top_archs, space, self._template(space))
        return self._ask("adapt", bundle, space, principle.provenance.source_task, principle.generation + 1)

    def explore(self, principle: DesignPrinciple, space: SpaceDescriptor) -> DesignPrinciple:
        bundle = build_explore_prompt(principle, space, self._template(space))
        return self._ask(
            "explore", bundle, space, principle.provenance.source_task, principle.generation + 1, previous=principle
        )

    def _secret(self) -> str:
        secret = os.environ.get(self.config.api_key_env)
        if not secret:
            raise ConfigError(f"environment variable {self.config.api_key_env} is not set")
        return secret

    def _ask(
        self,
        mode: str,
        bundle: PromptBundle,
        space: SpaceDescriptor,
        source_task: str | None,
        generation: int,
        previous: DesignPrinciple | None = None,
    ) -> DesignPrinciple:
        headers = {"Authorization": f"Bearer {self._secret()}", "Content-Type": "application/json"}
        messages = [
            {"role": "system", "content": SYSTEM_PROMPT},
            {"role": "user", "content": bundle.rendered},
        ]
        provenance = Provenance(
            source_task=source_task,
            backend=self.backend_id,
            generation=generation,
            created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            model=self.config.model,
        )
        content, error = "", ""
        for attempt in range(self.config.max_retries + 1):
            body = {"model": self.config.model, "temperature": self.config.temperature, "messages": messages}
            reply = self.transport(self.config.endpoint, headers, body, self.config.timeout)
            try:
                content = reply["choices"][0]["message"]["content"] or ""
            except (KeyError, IndexError, TypeError):
                raise TransportError("reply has no choices[0].message.content") from None
            try:
                principle = self._parse(content, space, provenance, previous)
            except (SchemaError, SchemaViolation, ConstraintEmpty) as exc:
                error = str(exc)
                self._transcript(mode, attempt, messages, content, f"error: {error}")
                log.info("%s reply %d rejected: %s", mode, attempt, error)
                messages = messages + [
                    {"role": "assistant", "content": content},
                    {
                        "role": "user",
                        "content": f"Your previous reply could not be used ({error}). "
                        "Answer again with exactly one ```json fenced block that follows the expected output.",
                    },
                ]
                continue
            self._transcript(mode, attempt, messages, content, "ok")
            self.last_retry_count = attempt
            return principle
        raise MalformedAfterRetries(self.config.max_retries + 1, content, error)

    def _parse(self, content, space, provenance, previous) -> DesignPrinciple:
        doc = extract_fenced_json(content)
        doc.pop("space_id", None)
        principle = deserialize(doc, space, provenance)
        to_constraints(principle, space)
        if previous is not None and not previous.is_everything() and principle.per_layer == previous.per_layer:
            raise SchemaViolation("explored principle is identical to the current one")
        return principle

    def _transcript(self, mode, attempt, messages, raw_reply, outcome) -> None:
        self.calls += 1
        if self.transcript_dir is None:
            return
        self.transcript_dir.mkdir(parents=True, exist_ok=True)
        doc = {
            "call": self.calls,
            "mode": mode,
            "attempt": attempt,
            "model": self.config.model,
            "endpoint": self.config.endpoint,
            "messages": messages,
            "raw_reply": raw_reply,
            "outcome": outcome,
        }
        path = self.transcript_dir / f"transcript-{self.calls}.json"
        path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
