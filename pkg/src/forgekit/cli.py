"""Command-line entry point for the full lifecycle.

Subcommands: solve one task, run a curriculum, run a benchmark matrix,
optimize a toolset, score a results file. Exit codes are a stable contract:
0 success, 1 error, 2 iteration-budget failure.

Configuration precedence, highest first: command-line flags, environment
variables (``FORGEKIT_*``), config file, built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Mapping, Optional

from .backends import ExternalCliBackend, MockBackend, load_playbook
from .engine import RunConfig, RunMode, run_curriculum, run_task
from .errors import ForgekitError
from .embedding import HashEmbedder
from .executor import ExecutorConfig
from .optimizer import merge_pipeline, optimize_toolset, tool_count
from .pricing import default_pricing, load_pricing, pricing_table
from .scoring import (
    RubricScore,
    RunMetrics,
    TableRow,
    aggregate,
    emit_radar_csv,
    emit_tables,
    normalize_radar,
    score_results,
)
from .workspace import TaskSpec

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BUDGET = 2

ENV_PREFIX = "FORGEKIT_"


def _env(name: str) -> Optional[str]:
    return os.environ.get(ENV_PREFIX + name.upper())


def _resolve(flag: Any, env_name: str, file_config: Mapping, file_key: str, default: Any) -> Any:
    """flags > env > file > defaults."""
    if flag is not None:
        return flag
    env_value = _env(env_name)
    if env_value is not None:
        return env_value
    if file_key in file_config:
        return file_config[file_key]
    return default


def _load_file_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _parse_task(doc: Mapping) -> TaskSpec:
    input_files = [
        (f["path"], f["content"].encode("utf-8")) for f in doc.get("input_files", [])
    ]
    return TaskSpec(
        id=doc["id"],
        prompt=doc["prompt"],
        input_files=input_files,
        rubric_ref=doc.get("rubric_ref"),
    )


def _load_tasks(path: str) -> list[TaskSpec]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, Mapping) and "tasks" in doc:
        doc = doc["tasks"]
    if isinstance(doc, Mapping):
        doc = [doc]
    return [_parse_task(t) for t in doc]


def _build_executor(file_config: Mapping) -> ExecutorConfig:
    section = dict(file_config.get("executor", {}))
    backend = _env("EXECUTOR") or section.pop("backend", "local")
    return ExecutorConfig(backend=backend, **section)


def _build_backend(backend_id: str, playbook_path: Optional[str], file_config: Mapping, executor: ExecutorConfig):
    if backend_id == "mock":
        if not playbook_path:
            raise ForgekitError("the mock backend needs --playbook")
        return MockBackend(load_playbook(Path(playbook_path)), executor_config=executor)
    adapters = file_config.get("backends", {})
    if backend_id not in adapters:
        raise ForgekitError(f"unknown backend {backend_id!r}; declare it in the config file")
    spec = adapters[backend_id]
    return ExternalCliBackend(
        backend_id,
        spec["command"],
        model=spec.get("model", backend_id),
        usage_file=spec.get("usage_file"),
    )


def _build_run_config(args, file_config: Mapping) -> RunConfig:
    mode = RunMode.parse(_resolve(args.mode, "MODE", file_config, "mode", "zs"))
    max_iterations = int(
        _resolve(args.max_iterations, "MAX_ITERATIONS", file_config, "max_iterations", 5)
    )
    pricing_path = _resolve(args.pricing, "PRICING", file_config, "pricing", None)
    pricing = pricing_table(load_pricing(Path(pricing_path)) if pricing_path else default_pricing())
    return RunConfig(
        mode=mode,
        max_iterations=max_iterations,
        merge_enabled=bool(file_config.get("merge", False)),
        backend_id=_resolve(args.backend, "BACKEND", file_config, "backend", "mock"),
        pricing=pricing,
        overwrite_workspace=getattr(args, "overwrite", False),
    )


def _print_outcome(outcome) -> None:
    print(
        f"task {outcome.task_id}: {outcome.status} | iterations {len(outcome.iterations)} | "
        f"cost {outcome.total_cost} | time {outcome.total_time:.2f}s | "
        f"report {'present' if outcome.final_report_present else 'absent'}"
    )


def _outcome_exit(outcomes) -> int:
    if any(o.status == "error" for o in outcomes):
        return EXIT_ERROR
    if any(o.status == "failed_budget" for o in outcomes):
        return EXIT_BUDGET
    return EXIT_OK


_STAGE_PLAN = {
    RunMode.ZERO_SHOT: ["tool-analysis", "requirement pipelines (validate/forge/review/promote)", "task-execution", "evaluation"],
    RunMode.TOOL_REUSE: ["tool-analysis", "task-execution", "evaluation"],
    RunMode.EVALUATOR_ONLY: ["task-execution", "evaluation"],
}


def cmd_solve(args) -> int:
    file_config = _load_file_config(args.config)
    try:
        tasks = _load_tasks(args.task_file)
        config = _build_run_config(args, file_config)
        if args.dry_run:
            for task in tasks:
                print(f"task {task.id} stage plan ({config.mode.value}):")
                for stage in _STAGE_PLAN[config.mode]:
                    print(f"  - {stage}")
            return EXIT_OK
        executor = _build_executor(file_config)
        backend = _build_backend(config.backend_id, args.playbook, file_config, executor)
        toolset = _resolve(args.toolset, "TOOLSET", file_config, "toolset", None)
        outcomes = []
        for task in tasks:
            outcome = run_task(
                task,
                config,
                Path(toolset) if toolset else None,
                backend,
                executor,
                base_dir=Path(args.base_dir),
            )
            _print_outcome(outcome)
            outcomes.append(outcome)
        return _outcome_exit(outcomes)
    except (ForgekitError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def cmd_curriculum(args) -> int:
    file_config = _load_file_config(args.config)
    try:
        tasks = _load_tasks(args.task_file)
        config = _build_run_config(args, file_config)
        if args.dry_run:
            print(f"curriculum of {len(tasks)} tasks, mode {config.mode.value}:")
            for task in tasks:
                print(f"  {task.id}: optimizer pass, then {', '.join(_STAGE_PLAN[config.mode])}")
            return EXIT_OK
        if not tasks:
            print("empty curriculum; nothing to do")
            return EXIT_OK
        executor = _build_executor(file_config)
        backend = _build_backend(config.backend_id, args.playbook, file_config, executor)
        toolset = _resolve(args.toolset, "TOOLSET", file_config, "toolset", None)
        if toolset is None:
            toolset = Path(args.base_dir) / "toolset"
        root, outcomes = run_curriculum(
            tasks,
            config,
            Path(toolset),
            backend,
            executor,
            base_dir=Path(args.base_dir),
            embedder=HashEmbedder(),
        )
        for outcome in outcomes:
            _print_outcome(outcome)
        print(f"toolset: {root} ({tool_count(root)} tools)")
        return _outcome_exit(outcomes)
    except (ForgekitError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _bench_one(run_spec, matrix, file_config) -> tuple[str, str, int, list]:
    mode_name, backend_id, rep = run_spec
    executor = _build_executor(file_config)
    backend = _build_backend(backend_id, matrix.get("playbook"), file_config, executor)
    base_dir = Path(matrix["output_dir"]) / f"run_{mode_name}_{backend_id}_{rep}"
    base_dir.mkdir(parents=True, exist_ok=True)
    toolset = None
    if mode_name == "tr":
        toolset = base_dir / "toolset"
        seed = matrix.get("seed_toolset")
        if seed and Path(seed).is_dir():
            shutil.copytree(seed, toolset)
        else:
            toolset.mkdir(parents=True, exist_ok=True)
    config = RunConfig(mode=RunMode.parse(mode_name), max_iterations=int(matrix.get("max_iterations", 5)))
    outcomes = []
    for task_doc in matrix["tasks"]:
        task = _parse_task(task_doc)
        outcomes.append(run_task(task, config, toolset, backend, executor, base_dir=base_dir))
    return mode_name, backend_id, rep, outcomes


def cmd_bench(args) -> int:
    try:
        matrix = json.loads(Path(args.matrix_file).read_text(encoding="utf-8"))
        file_config = _load_file_config(args.config)
        for key in ("tasks", "modes", "backends"):
            if key not in matrix:
                raise ForgekitError(f"matrix file missing {key!r}")
        matrix.setdefault("output_dir", args.output_dir or "bench_out")
        reps = int(matrix.get("repetitions", 1))
        specs = [
            (mode, backend_id, rep)
            for mode in matrix["modes"]
            for backend_id in matrix["backends"]
            for rep in range(1, reps + 1)
        ]
        results = []
        with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
            for result in pool.map(lambda s: _bench_one(s, matrix, file_config), specs):
                results.append(result)

        # Per (backend, mode): one run's metric = totals over its tasks.
        per_run: dict[tuple[str, str], list[RunMetrics]] = {}
        for mode_name, backend_id, rep, outcomes in results:
            solved = sum(1 for o in outcomes if o.status == "complete") / max(1, len(outcomes))
            per_run.setdefault((backend_id, mode_name), []).append(
                RunMetrics(
                    task_id="all",
                    run_index=rep,
                    time_minutes=sum(o.total_time for o in outcomes) / 60.0,
                    cost_usd=float(sum(o.total_cost for o in outcomes)),
                    iterations=sum(len(o.iterations) for o in outcomes),
                    score=RubricScore(solved, solved, solved),
                )
            )
        rows = []
        radar: dict[str, dict[str, float]] = {"time": {}, "cost": {}, "score": {}}
        for backend_id in matrix["backends"]:
            row = TableRow(model=backend_id)
            for mode_name in matrix["modes"]:
                runs = per_run.get((backend_id, mode_name), [])
                if not runs:
                    continue
                t_mean, _ = aggregate([r.time_minutes for r in runs])
                c_mean, _ = aggregate([r.cost_usd for r in runs])
                s_mean, _ = aggregate([100.0 * r.score.combined for r in runs])
                row.time[mode_name] = t_mean
                row.cost[mode_name] = c_mean
                row.score[mode_name] = s_mean
                point = f"{backend_id}/{mode_name}"
                radar["time"][point] = t_mean
                radar["cost"][point] = c_mean
                radar["score"][point] = s_mean
            rows.append(row)
        table_md = emit_tables(rows, "markdown")
        out_dir = Path(matrix["output_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "tables.md").write_text(table_md, encoding="utf-8")
        (out_dir / "tables.csv").write_text(emit_tables(rows, "csv"), encoding="utf-8")
        degenerate_safe = {a: p for a, p in radar.items() if p}
        (out_dir / "radar.csv").write_text(
            emit_radar_csv(normalize_radar(degenerate_safe)), encoding="utf-8"
        )
        print(table_md)
        all_outcomes = [o for *_rest, outcomes in results for o in outcomes]
        return _outcome_exit(all_outcomes)
    except (ForgekitError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def cmd_optimize(args) -> int:
    try:
        root = Path(args.toolset)
        if not root.is_dir():
            raise ForgekitError(f"not a toolset directory: {root}")
        if not os.access(root, os.W_OK):
            raise ForgekitError(f"toolset is not writable: {root}")
        file_config = _load_file_config(args.config)
        executor = _build_executor(file_config)
        backend = _build_backend(
            args.backend or "mock", args.playbook, file_config, executor
        )
        before = tool_count(root)
        if args.merge:
            merge_pipeline(root, backend, backend, HashEmbedder(), executor)
        optimize_toolset(root, backend, threshold=args.threshold)
        after = tool_count(root)
        print(f"tools: {before} → {after}")
        return EXIT_OK
    except (ForgekitError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def cmd_score(args) -> int:
    try:
        score = score_results(args.rubric_file, args.results_file)
        print(f"accuracy {score.accuracy:.3f}")
        print(f"methodology {score.methodology:.3f}")
        print(f"combined {score.combined:.3f}")
        return EXIT_OK
    except (ForgekitError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["zs", "tr", "eo"], default=None)
    p.add_argument("--backend", default=None, help="backend id (mock or a configured adapter)")
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--toolset", default=None, help="shared toolset directory")
    p.add_argument("--pricing", default=None, help="pricing table file")
    p.add_argument("--playbook", default=None, help="mock backend playbook file")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--base-dir", default=".", help="where task workspaces are created")
    p.add_argument("--dry-run", action="store_true", help="print the stage plan and exit")
    p.add_argument("--overwrite", action="store_true", help="replace an existing workspace")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forgekit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the workflow for one task file")
    p.add_argument("task_file")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("curriculum", help="run an ordered task list over a persistent toolset")
    p.add_argument("task_file")
    _add_common(p)
    p.set_defaults(func=cmd_curriculum)

    p = sub.add_parser("bench", help="run a (mode x backend x repetition) matrix")
    p.add_argument("matrix_file")
    p.add_argument("--jobs", type=int, default=1, help="parallel runs")
    p.add_argument("--output-dir", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("optimize", help="reorganize (and optionally merge) a toolset")
    p.add_argument("toolset")
    p.add_argument("--merge", action="store_true", help="enable the merge pipeline")
    p.add_argument("--threshold", type=int, default=10)
    p.add_argument("--backend", default=None)
    p.add_argument("--playbook", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("score", help="score one run's results against a rubric")
    p.add_argument("results_file")
    p.add_argument("rubric_file")
    p.set_defaults(func=cmd_score)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
