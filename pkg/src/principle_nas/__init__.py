"""Principle-guided transferable architecture search toolkit."""

from __future__ import annotations

from .archive import Archive, ArchiveEntry
from .bench import BenchmarkTable, SynthParams, TaskSpec, synth_generate
from .evo import EvaluationCache, EvoParams
from .orchestrator import LaptConfig, LaptResult, adapt_step, learn_stage, rea_baseline, run_suite, run_task
from .principle import ALL, DesignPrinciple, LayerRule, Provenance, complement, to_constraints
from .reasoner import LlmConfig, LlmReasoner, StatReasoner
from .report import EedfCurve, dominance, eedf, summarize
from .space import Architecture, SpaceDescriptor, builtin_space, cardinality, decode, encode, refine

__version__ = "0.1.0"

__all__ = [
    "ALL",
    "Architecture",
    "Archive",
    "ArchiveEntry",
    "BenchmarkTable",
    "DesignPrinciple",
    "EedfCurve",
    "EvaluationCache",
    "EvoParams",
    "LaptConfig",
    "LaptResult",
    "LayerRule",
    "LlmConfig",
    "LlmReasoner",
    "Provenance",
    "SpaceDescriptor",
    "StatReasoner",
    "SynthParams",
    "TaskSpec",
    "adapt_step",
    "builtin_space",
    "cardinality",
    "complement",
    "decode",
    "dominance",
    "eedf",
    "encode",
    "learn_stage",
    "rea_baseline",
    "refine",
    "run_suite",
    "run_task",
    "summarize",
    "synth_generate",
    "to_constraints",
]
