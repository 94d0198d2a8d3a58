from __future__ import annotations

import pytest

from principle_nas import SynthParams, builtin_space, synth_generate

SUITE_TASKS = ("t1", "t2", "t3", "t4", "t5", "t6")


@pytest.fixture(scope="session")
def trans101():
    return builtin_space("trans101")


@pytest.fixture(scope="session")
def nas201():
    return builtin_space("nas201")


@pytest.fixture(scope="session")
def darts():
    return builtin_space("darts")


@pytest.fixture(scope="session")
def additive_table(trans101):
    """Independent tasks, no interactions, no noise."""
    return synth_generate(trans101, SynthParams(seed=7), ("source", "t1"))


@pytest.fixture(scope="session")
def suite_table(trans101):
    """Source task plus six correlated targets."""
    return synth_generate(trans101, SynthParams(seed=7, shared=0.8), ("source",) + SUITE_TASKS)
