"""Command-line entry point.

Exit codes: 0 success, 2 config/schema error, 3 transport error,
4 empty (sub)space.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import bench
from .errors import ConfigError, PrincipleNasError
from .evo import EvoParams
from .orchestrator import LaptConfig, learn_stage, run_suite
from .principle import dumps, loads, to_constraints
from .reasoner import LlmConfig, LlmReasoner, PromptTemplate, StatReasoner
from .report import dominance, eedf, summarize, write_csv
from .space import load_space

log = logging.getLogger("principle_nas")


def _csv_list(text: str) -> list[str]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ConfigError("expected a comma-separated list")
    return items


def _seeds(text: str) -> tuple[int, ...]:
    """``"5"`` means seeds 0..4; ``"3,7"`` lists seeds explicitly."""
    try:
        if "," in text:
            return tuple(int(s) for s in _csv_list(text))
        return tuple(range(int(text)))
    except ValueError:
        raise ConfigError(f"bad seed list {text!r}") from None


def read_run_config(path: str | Path | None, space_id: str) -> tuple[LaptConfig, configparser.ConfigParser]:
    """Parse an INI run config with [lapt], [evo], [reasoner] and [llm] sections.

    Missing keys fall back to the per-space defaults.
    """
    cp = configparser.ConfigParser()
    if path is not None:
        if not cp.read(path, encoding="utf-8"):
            raise ConfigError(f"config file {path} not found")
    unknown = set(cp.sections()) - {"lapt", "evo", "reasoner", "llm"}
    if unknown:
        raise ConfigError(f"unknown config section(s) {sorted(unknown)}")
    try:
        evo_over = {}
        if cp.has_section("evo"):
            sec = cp["evo"]
            for name in ("population_size", "generations", "tournament_size", "seed"):
                if name in sec:
                    evo_over[name] = sec.getint(name)
            for name in ("crossover_prob", "mutation_prob"):
                if name in sec:
                    evo_over[name] = sec.getfloat(name)
        over = {"evo": EvoParams.for_space(space_id, **evo_over)}
        if cp.has_section("lapt"):
            sec = cp["lapt"]
            for name in ("learn_samples", "r", "iterations"):
                if name in sec:
                    over[name] = sec.getint(name)
            for name in ("transfer_enabled", "adaptation_enabled"):
                if name in sec:
                    over[name] = sec.getboolean(name)
            if "seeds" in sec:
                over["seeds"] = _seeds(sec["seeds"])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return LaptConfig.for_space(space_id, **over), cp


def make_reasoner(backend: str, cp: configparser.ConfigParser, keep_m: int | None = None):
    sec = cp["reasoner"] if cp.has_section("reasoner") else {}
    try:
        if backend == "stat":
            keep_s = sec.get("keep_s")
            return StatReasoner(
                keep_m=keep_m if keep_m is not None else int(sec.get("keep_m", 2)),
                keep_s=int(keep_s) if keep_s else None,
                retention=float(sec.get("retention", 0.0)),
                pad=str(sec.get("pad", "false")).lower() in ("1", "true", "yes", "on"),
            )
        if backend == "llm":
            if not cp.has_section("llm"):
                raise ConfigError("the llm backend needs an [llm] section in the config")
            llm = cp["llm"]
            config = LlmConfig(
                endpoint=llm.get("endpoint", ""),
                model=llm.get("model", ""),
                temperature=llm.getfloat("temperature", 0.0),
                max_retries=llm.getint("max_retries", 2),
                timeout=llm.getfloat("timeout", 60.0),
                api_key_env=llm.get("api_key_env", "LAPT_API_KEY"),
            )
            template = PromptTemplate.load(sec["template"]) if sec.get("template") else None
            return LlmReasoner(config, template)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown backend {backend!r}")


def cmd_synth(args) -> None:
    space = load_space(args.space)
    tasks = [bench.TaskSpec(t, direction="minimize" if t in args.minimize else "maximize") for t in args.tasks]
    params = bench.SynthParams(args.seed, args.interaction, args.noise, args.shared)
    bench.synth_generate(space, params, tasks).dump(args.output)
    log.info("wrote %s", args.output)


def cmd_ingest(args) -> None:
    space = load_space(args.space)
    directions = {t: "minimize" for t in args.minimize}
    bench.ingest_csv(args.csv, space, directions).dump(args.output)


def cmd_learn(args) -> None:
    table = bench.load(args.bench)
    _, cp = read_run_config(args.config, table.space_id)
    reasoner = make_reasoner(args.backend, cp, args.keep_m)
    principle = learn_stage(table, args.task, args.top, reasoner)
    Path(args.output).write_text(dumps(principle) + "\n", encoding="utf-8")


def cmd_run(args) -> None:
    table = bench.load(args.bench)
    config, cp = read_run_config(args.config, table.space_id)
    if args.seeds is not None:
        config = replace(config, seeds=_seeds(args.seeds))
    p0 = loads(Path(args.principle).read_text(encoding="utf-8"), table.space)
    reasoner = make_reasoner(cp.get("reasoner", "backend", fallback="stat"), cp)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2), encoding="utf-8")
    results = run_suite(args.tasks, table, p0, config, reasoner, out_dir=out)
    doc = {"results": [r.to_dict() for r in results], "summary": summarize(results, table)}
    (out / "result.json").write_text(json.dumps(doc, indent=2), encoding="utf-8")
    print(json.dumps(doc["summary"], indent=2))


def cmd_eedf(args) -> None:
    table = bench.load(args.bench)
    curves = [eedf(table, args.task, label="full")]
    if args.principle:
        p = loads(Path(args.principle).read_text(encoding="utf-8"), table.space)
        curves.append(eedf(table, args.task, to_constraints(p, table.space), label="principle"))
        rel = dominance(curves[1], curves[0])
        print(f"principle vs full: {rel.relation} (max gap {rel.max_gap:+.4f})")
    write_csv(curves, args.output)


def cmd_rank(args) -> None:
    table = bench.load(args.bench)
    key = bench.canonical_key(args.key, table.space)
    print(json.dumps({"key": key, "raw": table.evaluate(key, args.task), "rank": table.model_rank(key, args.task)}))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="principle-nas", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark table")
    p.add_argument("--space", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--interaction", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--shared", type=float, default=0.0, help="cross-task correlation in [0, 1]")
    p.add_argument("--tasks", type=_csv_list, required=True)
    p.add_argument("--minimize", type=_csv_list, default=[])
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="convert arch_key,task,value CSV into a table")
    p.add_argument("--csv", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--minimize", type=_csv_list, default=[])
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("learn", help="learn a principle from a task's top architectures")
    p.add_argument("--bench", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--top", type=int, default=50)
    p.add_argument("--backend", choices=("stat", "llm"), default="stat")
    p.add_argument("--keep-m", type=int)
    p.add_argument("--config")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("run", help="principle-guided search on target tasks")
    p.add_argument("--bench", required=True)
    p.add_argument("--tasks", type=_csv_list, required=True)
    p.add_argument("--principle", required=True)
    p.add_argument("--config")
    p.add_argument("--seeds", help="count N (seeds 0..N-1) or comma list")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eedf", help="export eEDF curves as e,F,label CSV")
    p.add_argument("--bench", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--principle")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_eedf)

    p = sub.add_parser("rank", help="model rank of one architecture")
    p.add_argument("--bench", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--key", required=True)
    p.set_defaults(func=cmd_rank)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except PrincipleNasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
