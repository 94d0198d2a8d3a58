from __future__ import annotations

import csv
import json

import pytest

from principle_nas.cli import main


@pytest.fixture
def workdir(tmp_path):
    bench = tmp_path / "bench.json"
    assert main(["synth", "--space", "trans101", "--seed", "7", "--shared", "0.8",
                 "--tasks", "source,t1,t2", "--minimize", "t2", "-o", str(bench)]) == 0
    return tmp_path


def test_learn_run_eedf_rank(workdir, capsys):
    bench, principle, out = workdir / "bench.json", workdir / "p.json", workdir / "out"
    assert main(["learn", "--bench", str(bench), "--task", "source", "--top", "50", "--keep-m", "2", "-o", str(principle)]) == 0
    doc = json.loads(principle.read_text())
    assert all(len(layer["allowed_ops"]) == 2 for layer in doc["per_layer"])

    cfg = workdir / "run.cfg"
    cfg.write_text("[lapt]\niterations = 2\n\n[evo]\npopulation_size = 6\ntournament_size = 3\n\n[reasoner]\nbackend = stat\n")
    assert main(["run", "--bench", str(bench), "--tasks", "t1,t2", "--principle", str(principle),
                 "--config", str(cfg), "--seeds", "2", "-o", str(out)]) == 0
    result = json.loads((out / "result.json").read_text())
    assert len(result["results"]) == 4
    assert json.loads((out / "config.json").read_text())["evo"]["population_size"] == 6
    assert (out / "t2" / "seed-1" / "principles" / "gen-2.json").exists()

    curve = workdir / "c.csv"
    assert main(["eedf", "--bench", str(bench), "--task", "t1", "--principle", str(principle), "-o", str(curve)]) == 0
    rows = list(csv.DictReader(curve.open()))
    assert {r["label"] for r in rows} == {"full", "principle"}

    capsys.readouterr()
    key = result["results"][0]["best_key"]
    assert main(["rank", "--bench", str(bench), "--task", "t1", "--key", key]) == 0
    assert json.loads(capsys.readouterr().out)["rank"] == result["results"][0]["model_rank"]


def test_exit_codes(workdir, tmp_path):
    bench = str(workdir / "bench.json")
    assert main(["rank", "--bench", bench, "--task", "t1", "--key", "||"]) == 2
    assert main(["rank", "--bench", bench, "--task", "nope", "--key", "|none|none|none|none|none|none|"]) == 2
    bad_cfg = tmp_path / "bad.cfg"
    bad_cfg.write_text("[lapt]\nr = 0\n")
    p = tmp_path / "p.json"
    main(["learn", "--bench", bench, "--task", "source", "-o", str(p)])
    assert main(["run", "--bench", bench, "--tasks", "t1", "--principle", str(p), "--config", str(bad_cfg), "-o", str(tmp_path / "o")]) == 2

    doc = json.loads(p.read_text())
    doc["per_layer"][5]["allowed_sources"] = ["1"]
    p.write_text(json.dumps(doc))
    assert main(["run", "--bench", bench, "--tasks", "t1", "--principle", str(p), "-o", str(tmp_path / "o2")]) == 4


def test_llm_backend_transport_failure_exits_3(workdir, tmp_path, monkeypatch):
    monkeypatch.setenv("LAPT_API_KEY", "x")
    cfg = tmp_path / "llm.cfg"
    cfg.write_text("[llm]\nendpoint = http://127.0.0.1:9/v1/chat/completions\nmodel = m\ntimeout = 0.5\n")
    code = main(["learn", "--bench", str(workdir / "bench.json"), "--task", "source", "--top", "5",
                 "--backend", "llm", "--config", str(cfg), "-o", str(tmp_path / "p.json")])
    assert code == 3


def test_ingest(tmp_path):
    src = tmp_path / "d.csv"
    src.write_text("arch_key,task,value\n|none|none|none|none|none|none|,cifar10,10.5\n")
    out = tmp_path / "b.json"
    assert main(["ingest", "--csv", str(src), "--space", "nas201", "-o", str(out)]) == 0
    assert json.loads(out.read_text())["records"]["|none|none|none|none|none|none|"]["cifar10"] == 10.5
