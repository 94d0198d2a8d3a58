from __future__ import annotations

import numpy as np
import pytest

from principle_nas.archive import Archive, ArchiveEntry
from principle_nas.errors import ConfigError
from principle_nas.principle import DesignPrinciple, dumps
from principle_nas.reasoner import StatReasoner
from principle_nas.space import Architecture, darts_space, encode, sample_uniform

O = ("none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3")


def archive_from_ops(space, rows, task="src"):
    entries = []
    for n, ops in enumerate(rows):
        arch = Architecture.from_ops(ops, space)
        entries.append(ArchiveEntry(encode(arch, space), arch, float(len(rows) - n)))
    return Archive(tuple(entries), task)


def test_frequency_count(trans101):
    rows = [["nor_conv_3x3"] + ["none"] * 5] * 45 + [["skip_connect"] + ["none"] * 5] * 5
    p = StatReasoner(keep_m=2).learn(archive_from_ops(trans101, rows), trans101)
    assert p.per_layer[0].allowed_ops == ("skip_connect", "nor_conv_3x3")
    assert p.per_layer[1].allowed_ops == ("none", "skip_connect")  # zero-count tie falls back to candidate order
    assert p.provenance.source_task == "src" and p.provenance.backend == "stat"
    assert p.rationale[0] == "layer 0: prefer nor_conv_3x3 (45/50), skip_connect (5/50)"


def test_keep_all_is_identity(trans101, additive_table):
    p = StatReasoner(keep_m=4).learn(additive_table.top_k("t1", 10), trans101)
    assert p.is_everything()
    with pytest.raises(ConfigError):
        StatReasoner(keep_m=5).learn(additive_table.top_k("t1", 10), trans101)


def test_tie_break_by_candidate_order(trans101):
    rows = [["nor_conv_3x3"] * 6] * 25 + [["skip_connect"] * 6] * 25
    p = StatReasoner(keep_m=1).learn(archive_from_ops(trans101, rows), trans101)
    assert all(r.allowed_ops == ("skip_connect",) for r in p.per_layer)


def test_adapt_recomputes(trans101):
    prev = DesignPrinciple.create(trans101, [(["none", "skip_connect"], None)] * 6)
    rows = [["none", "nor_conv_1x1", "none", "none", "none", "none"]] * 10
    top = archive_from_ops(trans101, rows, "tgt")
    p = StatReasoner(keep_m=2).adapt(prev, top, trans101)
    assert p.per_layer[1].allowed_ops == ("nor_conv_1x1",)
    assert p.generation == 1
    padded = StatReasoner(keep_m=2, pad=True).adapt(prev, top, trans101)
    assert padded.per_layer[1].allowed_ops == ("none", "nor_conv_1x1")
    kept = StatReasoner(keep_m=2, retention=1.0).adapt(prev, top, trans101)
    for old, new in zip(prev.per_layer, kept.per_layer):
        assert set(old.allowed_ops) <= set(new.allowed_ops)
    half = StatReasoner(keep_m=2, retention=0.5).adapt(prev, top, trans101)
    assert half.per_layer[1].allowed_ops == ("none", "nor_conv_1x1")


def test_adapt_fixed_point(trans101, additive_table):
    archive = additive_table.top_k("source", 50)
    r = StatReasoner(keep_m=2)
    p = r.learn(archive, trans101)
    assert r.adapt(p, archive, trans101).per_layer == p.per_layer


def test_learn_contains_true_argmax(trans101, additive_table):
    p = StatReasoner(keep_m=2).learn(additive_table.top_k("source", 50), trans101)
    best = additive_table.top_k("source", 1).entries[0].arch
    for rule, choice in zip(p.per_layer, best.choices):
        assert len(rule.allowed_ops) == 2
        assert choice.ops[0] in rule.allowed_ops


def test_byte_identical(trans101, additive_table):
    a = dumps(StatReasoner().learn(additive_table.top_k("source", 50), trans101))
    b = dumps(StatReasoner().learn(additive_table.top_k("source", 50), trans101))
    assert a == b


def test_explore_is_complement(trans101, additive_table):
    r = StatReasoner()
    p = r.learn(additive_table.top_k("source", 50), trans101)
    q = r.explore(p, trans101)
    for a, b in zip(p.per_layer, q.per_layer):
        assert set(a.allowed_ops).isdisjoint(b.allowed_ops)
        assert set(a.allowed_ops) | set(b.allowed_ops) == set(O)


def test_keep_s_respects_arity():
    space = darts_space()
    rng = np.random.default_rng(0)
    entries = []
    for n in range(30):
        arch = sample_uniform(space, rng)
        entries.append(ArchiveEntry(encode(arch, space), arch, float(n)))
    p = StatReasoner(keep_m=3, keep_s=1).learn(Archive(tuple(entries), "x"), space)
    for rule, slot in zip(p.per_layer, space.layers):
        kept = slot.candidate_sources if rule.allowed_sources is None else rule.allowed_sources
        assert len(kept) >= slot.source_arity[0]


def test_empty_archive_rejected(trans101):
    with pytest.raises(ConfigError):
        StatReasoner().learn(Archive((), "x"), trans101)
