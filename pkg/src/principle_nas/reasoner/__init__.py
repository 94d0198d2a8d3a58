"""Principle-reasoning backends: statistical (offline) and LLM-backed."""

from .base import Reasoner
from .llm import LlmConfig, LlmReasoner, extract_fenced_json, httpx_transport
from .prompts import (
    PromptBundle,
    PromptTemplate,
    build_adapt_prompt,
    build_explore_prompt,
    build_learning_prompt,
)
from .stat import StatReasoner

__all__ = [
    "LlmConfig",
    "LlmReasoner",
    "PromptBundle",
    "PromptTemplate",
    "Reasoner",
    "StatReasoner",
    "build_adapt_prompt",
    "build_explore_prompt",
    "build_learning_prompt",
    "extract_fenced_json",
    "httpx_transport",
]
