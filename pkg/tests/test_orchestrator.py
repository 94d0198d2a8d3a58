from __future__ import annotations

import json
import math
from dataclasses import replace

import numpy as np
import pytest

from principle_nas import evo
from principle_nas.archive import Archive, ArchiveEntry
from principle_nas.bench import SynthParams, synth_generate
from principle_nas.errors import ConfigError, EmptyRefinedSpace
from principle_nas.evo import EvoParams
from principle_nas.orchestrator import LaptConfig, adapt_step, derive_seed, learn_stage, rea_baseline, run_suite, run_task
from principle_nas.principle import DesignPrinciple, deserialize, to_constraints
from principle_nas.reasoner import LlmConfig, LlmReasoner, StatReasoner
from principle_nas.report import summarize
from principle_nas.space import decode, refine, validate

from conftest import SUITE_TASKS

O = ("none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3")


class Recorder:
    """Reasoner double that logs calls and returns canned principles."""

    backend_id = "script"

    def __init__(self, adapt_to=None, explore_to=None):
        self.calls = []
        self.adapt_to, self.explore_to = adapt_to, explore_to

    def learn(self, archive, space):
        self.calls.append("learn")
        return DesignPrinciple.everything(space)

    def adapt(self, principle, top, space):
        self.calls.append(("adapt", len(top)))
        return self.adapt_to or principle

    def explore(self, principle, space):
        self.calls.append("explore")
        return self.explore_to or DesignPrinciple.everything(space)


def tiny_archive(space, scores):
    entries = []
    for s, ops in zip(scores, [[o] * 6 for o in O]):
        from principle_nas.space import Architecture, encode

        a = Architecture.from_ops(ops, space)
        entries.append(ArchiveEntry(encode(a, space), a, s))
    return Archive.from_scored(entries, "t")


def test_config_defaults():
    c = LaptConfig.for_space("nas201")
    assert (c.learn_samples, c.r, c.iterations) == (50, 5, 3)
    c = LaptConfig.for_space("trans101")
    assert (c.learn_samples, c.r, c.iterations, c.evo.population_size) == (50, 15, 4, 10)
    c = LaptConfig.for_space("darts")
    assert (c.learn_samples, c.r, c.iterations, c.evo.crossover_prob) == (100, 50, 2, 0.5)
    with pytest.raises(ConfigError):
        LaptConfig(r=0)
    with pytest.raises(ConfigError):
        LaptConfig(iterations=0)


@pytest.mark.parametrize("base,best,branch,new_base", [(1.0, 2.0, "adapt", 2.0), (2.0, 1.0, "explore", 2.0),
                                                        (1.5, 1.5, "adapt", 1.5), (-math.inf, -3.0, "adapt", -3.0)])
def test_adapt_step_branches(trans101, base, best, branch, new_base):
    rec = Recorder()
    p = DesignPrinciple.everything(trans101)
    _, b, label = adapt_step(p, tiny_archive(trans101, [4, 3, 2, 1]), base, best, 2, rec, trans101)
    assert (label, b) == (branch, new_base)
    assert rec.calls == [("adapt", 2)] if branch == "adapt" else rec.calls == ["explore"]


def test_scripted_underperforming_iteration(trans101, additive_table):
    # adapting to the single worst-by-construction architecture forces iteration 2 below Base
    worst = additive_table.top_k("t1", 4096).entries[-1].arch
    pinned = DesignPrinciple.create(trans101, [([c.ops[0]], None) for c in worst.choices])
    rec = Recorder(adapt_to=pinned)
    cfg = LaptConfig(r=5, iterations=2, evo=EvoParams(10, 1, 5))
    res = run_task("t1", additive_table, trans101, DesignPrinciple.everything(trans101), cfg, rec, seed=1)
    assert res.branches == ["adapt", "explore"]
    assert res.bases[0] == res.bases[1] == res.iteration_bests[0]
    assert res.iteration_bests[1] < res.bases[0]
    assert res.refined_sizes == [4096, 1]


def test_single_iteration_equals_refined_rea(trans101, suite_table):
    r = StatReasoner()
    p0 = learn_stage(suite_table, "source", 50, r)
    cfg = LaptConfig.for_space("trans101", iterations=1)
    res = run_task("t2", suite_table, trans101, p0, cfg, r, seed=9)
    sub = refine(trans101, to_constraints(p0, trans101))
    best, trace = evo.run(sub, suite_table.oracle("t2"), replace(cfg.evo, seed=derive_seed(9, 1)))
    assert res.traces[0].to_jsonl() == trace.to_jsonl()
    assert res.best_score == suite_table.normalized(best, "t2")


def test_learn_stage(trans101, suite_table):
    p = learn_stage(suite_table, "source", 50, StatReasoner(keep_m=2))
    assert all(len(r.allowed_ops) == 2 for r in p.per_layer)
    assert p.provenance.source_task == "source"
    with pytest.raises(ConfigError):
        learn_stage(suite_table, "source", 5000, StatReasoner())


def test_randomised_invariants(trans101):
    rng = np.random.default_rng(123)
    for trial in range(100):
        seed = int(rng.integers(1000))
        params = SynthParams(seed=seed % 7, interaction=float(rng.uniform(0, 0.5)), noise=float(rng.uniform(0, 0.2)), shared=0.5)
        table = _table_cache(params)
        reasoner = StatReasoner(keep_m=int(rng.integers(1, 4)), retention=float(rng.choice([0.0, 0.5])), pad=bool(rng.integers(2)))
        cfg = LaptConfig(r=int(rng.integers(1, 20)), iterations=int(rng.integers(1, 6)),
                         evo=EvoParams(int(rng.integers(2, 12)), int(rng.integers(0, 3)), 2, 0.0, 1.0))
        p0 = learn_stage(table, "a", 50, reasoner)
        res = run_task("b", table, trans101, p0, cfg, reasoner, seed=seed)

        assert len(res.lineage) == cfg.iterations + 1
        assert all(y >= x for x, y in zip(res.bases, res.bases[1:]))
        evaluated = {r.key: r.score for t in res.traces for r in t.records}
        assert res.best_score == max(evaluated.values())
        assert res.unique_evaluations == len(evaluated)
        for g, trace in enumerate(res.traces):
            principle = deserialize(res.lineage[g]["principle"], trans101)
            sub = refine(trans101, to_constraints(principle, trans101))
            for r in trace.records:
                arch = decode(r.key, trans101)
                assert validate(arch, trans101) == [] and validate(arch, sub) == []


_TABLES: dict = {}


def _table_cache(params):
    key = params
    if key not in _TABLES:
        from principle_nas.space import builtin_space

        _TABLES[key] = synth_generate(builtin_space("trans101"), params, ["a", "b"])
    return _TABLES[key]


def test_ablation_flags(trans101, suite_table):
    r = StatReasoner()
    p0 = learn_stage(suite_table, "source", 50, r)
    wo_t = run_task("t1", suite_table, trans101, p0, LaptConfig.for_space("trans101", transfer_enabled=False), r)
    assert deserialize(wo_t.lineage[0]["principle"], trans101).is_everything()
    assert wo_t.refined_sizes[0] == 4096
    wo_a = run_task("t1", suite_table, trans101, p0, LaptConfig.for_space("trans101", adaptation_enabled=False), r)
    assert wo_a.branches == ["hold"] * 4
    assert all(entry["principle"] == wo_a.lineage[0]["principle"] for entry in wo_a.lineage)


def test_empty_refined_space_surfaces_principle(trans101, suite_table):
    bad = DesignPrinciple.create(trans101, [(None, None)] * 5 + [(None, ["1"])])
    with pytest.raises(EmptyRefinedSpace) as info:
        run_task("t1", suite_table, trans101, bad, LaptConfig.for_space("trans101"), StatReasoner())
    assert info.value.principle["per_layer"][5]["allowed_sources"] == ["1"]
    assert info.value.exit_code == 4


def test_suite_shape_and_order_independence(trans101, suite_table):
    r = StatReasoner()
    p0 = learn_stage(suite_table, "source", 50, r)
    cfg = LaptConfig.for_space("trans101", seeds=(0, 1))
    forward = run_suite(SUITE_TASKS, suite_table, p0, cfg, r)
    backward = run_suite(tuple(reversed(SUITE_TASKS)), suite_table, p0, cfg, r)
    assert len(forward) == 12
    assert len({json.dumps(x.lineage[0]) for x in forward}) == 1
    as_dict = lambda rs: {(x.task, x.seed): x.to_dict() for x in rs}
    assert as_dict(forward) == as_dict(backward)


def test_suite_statistics_recomputed(trans101, suite_table, tmp_path):
    r = StatReasoner()
    p0 = learn_stage(suite_table, "source", 50, r)
    cfg = LaptConfig.for_space("trans101", seeds=tuple(range(20)))
    results = run_suite(["t3"], suite_table, p0, cfg, r, out_dir=tmp_path)
    summary = summarize(results, suite_table)["tasks"]["t3"]
    raws, ranks = [], []
    for s in range(20):
        trace_keys = {}
        for g in range(1, 5):
            for line in (tmp_path / "t3" / f"seed-{s}" / "traces" / f"task-t3-g{g}.jsonl").read_text().splitlines():
                rec = json.loads(line)
                trace_keys[rec["key"]] = rec["score"]
        best = max(trace_keys, key=trace_keys.get)
        raws.append(suite_table.evaluate(best, "t3"))
        ranks.append(suite_table.model_rank(best, "t3"))
    assert summary["mean_best_raw"] == pytest.approx(np.mean(raws), abs=1e-12)
    assert summary["std_best_raw"] == pytest.approx(np.std(raws), abs=1e-12)
    assert summary["mean_rank"] == pytest.approx(np.mean(ranks))
    assert summary["runs"] == 20


def test_run_dir_layout(trans101, suite_table, tmp_path):
    r = StatReasoner()
    p0 = learn_stage(suite_table, "source", 50, r)
    run_task("t1", suite_table, trans101, p0, LaptConfig.for_space("trans101"), r, run_dir=tmp_path)
    assert sorted(p.name for p in (tmp_path / "principles").iterdir()) == [f"gen-{g}.json" for g in range(5)]
    assert sorted(p.name for p in (tmp_path / "traces").iterdir()) == [f"task-t1-g{g}.jsonl" for g in range(1, 5)]


def test_llm_backend_same_bookkeeping(monkeypatch, trans101, suite_table, tmp_path):
    monkeypatch.setenv("LAPT_API_KEY", "sk-never-logged")
    rng = np.random.default_rng(0)

    def transport(url, headers, body, timeout):
        ops = sorted(rng.choice(O, size=2, replace=False).tolist())
        doc = {"per_layer": [{"allowed_ops": ops}] * 6, "rationale": ["stub"]}
        return {"choices": [{"message": {"content": "```json\n" + json.dumps(doc) + "\n```"}}]}

    llm = LlmReasoner(LlmConfig("http://stub.invalid/v1", "stub", max_retries=5), transport=transport)
    stat = StatReasoner()
    p0 = learn_stage(suite_table, "source", 50, stat)
    cfg = LaptConfig.for_space("trans101")
    a = run_task("t1", suite_table, trans101, p0, cfg, llm, seed=4, run_dir=tmp_path)
    b = run_task("t1", suite_table, trans101, p0, cfg, stat, seed=4)
    assert len(a.lineage) == len(b.lineage) and len(a.bases) == len(b.bases)
    assert a.traces[0].to_jsonl() == b.traces[0].to_jsonl()
    assert len(list((tmp_path / "llm").glob("transcript-*.json"))) >= cfg.iterations
    for f in tmp_path.rglob("*.json*"):
        assert "sk-never-logged" not in f.read_text()


def test_rea_baseline_budget(suite_table):
    key, score, used = rea_baseline(suite_table, "t1", EvoParams.for_space("trans101"), 45, seed=3)
    assert used == 45
    assert suite_table.normalized(key, "t1") == score


def test_derive_seed_stable():
    assert derive_seed(0, "t1") == derive_seed(0, "t1")
    assert derive_seed(0, "t1") != derive_seed(0, "t2") != derive_seed(1, "t1")
