"""The four-stage workflow engine and curriculum runner.

One task run is a loop of at most ``max_iterations`` iterations, each a
sequence of fresh, stateless agent sessions: analysis (unless evaluator-only
mode), then per-requirement forging (zero-shot mode only), then one
execution session bracketed by tool snapshots for edit telemetry, then the
evaluation that decides whether to refine, stop complete, or fail on budget.

Operating modes gate the stages:

- ``zero_shot``       fresh empty toolset per task; analysis + generation on
- ``tool_reuse``      shared prebuilt toolset; generation off, analysis on
- ``evaluator_only``  no toolset at all; execution + evaluation loop only

A curriculum is an ordered task list over one persistent toolset, with the
optimizer pass run before each task.
"""

from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any, Mapping, Optional

from . import registry as reg
from .backends import AgentBackend, AgentRequest, TokenUsage, backend_for
from .errors import ForgekitError
from .evaluator import EvaluationResult, decide_next, evaluate
from .executor import ExecutorConfig
from .forge import (
    DEFAULT_MAX_REVIEWS,
    DEFAULT_MAX_ROUNDS,
    BudgetExhaustedError,
    ForgeError,
    analyze_task,
    forge_tool,
    promote_tool,
    review_tool,
    validate_requirement,
)
from .optimizer import (
    DEFAULT_CHILD_THRESHOLD,
    DEFAULT_SIM_THRESHOLD,
    merge_pipeline,
    optimize_toolset,
)
from .pricing import PricingEntry, account_cost
from .prompts import STAGES, UnknownStageError, render_stage_prompt
from .workspace import (
    EditStats,
    TaskSpec,
    WorkspacePaths,
    archive_iteration,
    diff_tool_edits,
    init_workspace,
    snapshot_dir,
)

RUN_OUTCOME_FILE = "run_outcome.json"

NEXT_STEP_HEADER = "Next-step plan from evaluation"


class EngineError(ForgekitError):
    pass


class EmptyPlanError(EngineError):
    pass


class RunMode(enum.Enum):
    ZERO_SHOT = "zero_shot"
    TOOL_REUSE = "tool_reuse"
    EVALUATOR_ONLY = "evaluator_only"

    @classmethod
    def parse(cls, text: str) -> "RunMode":
        aliases = {
            "zs": cls.ZERO_SHOT,
            "tr": cls.TOOL_REUSE,
            "eo": cls.EVALUATOR_ONLY,
        }
        key = text.strip().lower()
        if key in aliases:
            return aliases[key]
        for mode in cls:
            if mode.value == key:
                return mode
        raise ValueError(f"unknown run mode: {text!r}")


@dataclass
class RunConfig:
    mode: RunMode = RunMode.ZERO_SHOT
    max_iterations: int = 5
    max_forge_rounds: int = DEFAULT_MAX_ROUNDS
    max_reviews: int = DEFAULT_MAX_REVIEWS
    reorg_threshold: int = DEFAULT_CHILD_THRESHOLD
    merge_enabled: bool = False
    sim_threshold: float = DEFAULT_SIM_THRESHOLD
    run_optimizer: bool = True
    backend_id: str = "mock"
    pricing: Optional[Mapping[str, PricingEntry]] = None
    skills: list[Path] = field(default_factory=list)
    overwrite_workspace: bool = False

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class StageSession:
    stage: str
    session_id: str
    token_usage: TokenUsage

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "session_id": self.session_id,
            "token_usage": self.token_usage.to_dict(),
        }


@dataclass
class IterationRecord:
    index: int
    stage_sessions: list[StageSession] = field(default_factory=list)
    edit_stats: EditStats = field(default_factory=lambda: EditStats(0, 0))
    evaluation: Optional[EvaluationResult] = None
    wall_time: float = 0.0
    forge_failures: list[str] = field(default_factory=list)  # per-requirement, zero-shot only

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "stage_sessions": [s.to_dict() for s in self.stage_sessions],
            "edit_stats": {
                "edited_files": self.edit_stats.edited_files,
                "created_files": self.edit_stats.created_files,
            },
            "evaluation": self.evaluation.to_dict() if self.evaluation else None,
            "wall_time": self.wall_time,
            "forge_failures": self.forge_failures,
        }


@dataclass
class RunOutcome:
    task_id: str
    status: str  # "complete" | "failed_budget" | "error"
    iterations: list[IterationRecord] = field(default_factory=list)
    total_cost: Decimal = Decimal(0)
    total_time: float = 0.0
    final_report_present: bool = False
    error_detail: str = ""

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "status": self.status,
            "iterations": [it.to_dict() for it in self.iterations],
            "total_cost": str(self.total_cost),
            "total_time": self.total_time,
            "final_report_present": self.final_report_present,
            "error_detail": self.error_detail,
        }


def compose_next_question(task: TaskSpec, plan: str) -> TaskSpec:
    """Append the evaluator's plan to the prompt as a delimited section.

    Repeated composition stacks sections in order, so the full refinement
    history stays visible to later sessions.
    """
    if not plan:
        raise EmptyPlanError("next-step plan is empty")
    prompt = f"{task.prompt}\n\n--- {NEXT_STEP_HEADER} ---\n{plan}\n"
    return TaskSpec(
        id=task.id,
        prompt=prompt,
        input_files=task.input_files,
        mode=task.mode,
        rubric_ref=task.rubric_ref,
    )


def select_stage_prompt(stage: str, task: TaskSpec, registry_view: Optional[reg.CategoryNode]) -> str:
    """Deterministic prompt for one stage.

    Only the root-level disclosure listing is ever inlined; tools below the
    root stay behind navigation.
    """
    if stage not in STAGES:
        raise UnknownStageError(stage)
    cats = registry_view.subcategories if registry_view else ()
    tools = registry_view.tools if registry_view else ()
    return render_stage_prompt(stage, task.prompt, root_categories=cats, root_tools=tools)


class _SessionLog:
    """Collects per-iteration stage sessions and their cost."""

    def __init__(self, task_id: str, pricing: Optional[Mapping[str, PricingEntry]]):
        self.task_id = task_id
        self.pricing = pricing
        self.sessions: list[StageSession] = []
        self.cost = Decimal(0)
        self._n = 0

    def record(self, stage: str, iteration: int, usage: TokenUsage, model: str) -> None:
        self._n += 1
        self.sessions.append(
            StageSession(
                stage=stage,
                session_id=f"{self.task_id}-i{iteration}-{stage}-{self._n}",
                token_usage=usage,
            )
        )
        if self.pricing and model in self.pricing:
            self.cost += account_cost(usage, self.pricing[model])


class _RecordingBackend:
    """Wraps a backend to log each session into the iteration record."""

    def __init__(self, inner: AgentBackend, log: _SessionLog):
        self.inner = inner
        self.log = log
        self.iteration = 1
        self.id = inner.id
        self.model = inner.model

    def spawn_session(self, request: AgentRequest):
        response = self.inner.spawn_session(request)
        self.log.record(request.stage, self.iteration, response.token_usage, self.inner.model)
        return response


def run_task(
    task: TaskSpec,
    config: RunConfig,
    tools_root: Optional[Path],
    backends: Any,
    executor: ExecutorConfig,
    base_dir: Optional[Path] = None,
    ws: Optional[WorkspacePaths] = None,
) -> RunOutcome:
    """Run the full workflow for one task and serialize the outcome.

    ``tools_root`` selects the toolset: a shared directory for curriculum or
    reuse runs, or None to use the task workspace's own (initially empty)
    ``tools/`` directory. Backend and executor failures become an error
    outcome rather than an exception; forge budget exhaustion only degrades
    the iteration (execution proceeds with whatever tools exist and may
    self-repair).
    """
    if ws is None:
        if base_dir is None:
            raise EngineError("run_task needs either ws or base_dir")
        ws = init_workspace(task, base_dir, overwrite=config.overwrite_workspace)
    effective_root = Path(tools_root) if tools_root is not None else ws.tools_dir
    if config.mode is not RunMode.EVALUATOR_ONLY:
        reg.generate_index(effective_root)

    log = _SessionLog(task.id, config.pricing)
    outcome = RunOutcome(task_id=task.id, status="error")
    run_started = time.monotonic()
    current = task
    try:
        for iteration in range(1, config.max_iterations + 1):
            it_started = time.monotonic()
            record = IterationRecord(index=iteration)
            mark = len(log.sessions)

            if config.mode is not RunMode.EVALUATOR_ONLY:
                analysis_backend = _RecordingBackend(backend_for(backends, "tool-analysis"), log)
                analysis_backend.iteration = iteration
                plan = analyze_task(current, effective_root, analysis_backend, ws=ws)
                if config.mode is RunMode.ZERO_SHOT:
                    record.forge_failures = _forge_requirements(
                        plan, current, ws, effective_root, config, backends, executor, log, iteration
                    )

            exec_backend = _RecordingBackend(backend_for(backends, "task-execution"), log)
            exec_backend.iteration = iteration
            if config.mode is RunMode.EVALUATOR_ONLY:
                exec_prompt = render_stage_prompt("task-execution", current.prompt)
            else:
                exec_prompt = select_stage_prompt(
                    "task-execution", current, reg.list_children(effective_root)
                )
            before = snapshot_dir(effective_root)
            exec_response = exec_backend.spawn_session(
                AgentRequest(
                    stage="task-execution",
                    prompt=exec_prompt,
                    workspace_root=ws.root,
                    attachments=list(config.skills),
                )
            )
            if not exec_response.ok:
                raise EngineError(f"execution session failed: {exec_response.exit_status}")
            record.edit_stats = diff_tool_edits(before, snapshot_dir(effective_root))

            eval_backend = _RecordingBackend(backend_for(backends, "evaluation"), log)
            eval_backend.iteration = iteration
            evaluation = evaluate(ws, eval_backend)
            record.evaluation = evaluation

            record.stage_sessions = log.sessions[mark:]
            record.wall_time = time.monotonic() - it_started
            outcome.iterations.append(record)
            archive_iteration(ws, iteration, record.to_dict())

            decision = decide_next(evaluation, iteration, config.max_iterations)
            if decision.kind == "stop_complete":
                outcome.status = "complete"
                break
            if decision.kind == "stop_failed":
                outcome.status = "failed_budget"
                break
            current = compose_next_question(current, decision.plan)
            ws.question.write_text(current.prompt, encoding="utf-8")
    except ForgekitError as exc:
        outcome.status = "error"
        outcome.error_detail = f"{type(exc).__name__}: {exc}"

    outcome.total_cost = log.cost
    outcome.total_time = time.monotonic() - run_started
    outcome.final_report_present = ws.report.exists()
    (ws.root / RUN_OUTCOME_FILE).write_text(
        json.dumps(outcome.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
    return outcome


def _forge_requirements(
    plan,
    task: TaskSpec,
    ws: WorkspacePaths,
    tools_root: Path,
    config: RunConfig,
    backends: Any,
    executor: ExecutorConfig,
    log: _SessionLog,
    iteration: int,
) -> list[str]:
    """Validate, forge, review, and promote every requirement in the plan.

    A requirement that exhausts its budget is recorded and skipped; the
    execution stage then runs with whatever tools exist and may self-repair.
    Returns one entry per requirement that did not reach promotion.
    """
    failures: list[str] = []
    for req in plan.requirements:
        validator = _RecordingBackend(backend_for(backends, "requirement-validation"), log)
        validator.iteration = iteration
        verdict = validate_requirement(req, validator, task_id=task.id, workspace_root=ws.root)
        if not verdict.accepted:
            failures.append(f"{req.name}: rejected ({verdict.reason})")
            continue
        gen_backend = _RecordingBackend(backend_for(backends, "tool-generation"), log)
        gen_backend.iteration = iteration
        review_backend = _RecordingBackend(backend_for(backends, "tool-review"), log)
        review_backend.iteration = iteration
        try:
            draft = forge_tool(
                req, ws, gen_backend, executor, max_rounds=config.max_forge_rounds, task_id=task.id
            )
            draft = review_tool(draft, review_backend, executor, ws, max_reviews=config.max_reviews)
            promote_tool(draft, tools_root)
            reg.generate_index(tools_root)
        except (BudgetExhaustedError, ForgeError) as exc:
            failures.append(f"{req.name}: {exc}")
    return failures


def run_curriculum(
    tasks: list[TaskSpec],
    config: RunConfig,
    shared_tools_root: Path,
    backends: Any,
    executor: ExecutorConfig,
    base_dir: Path,
    embedder=None,
) -> tuple[Path, list[RunOutcome]]:
    """Run an ordered task list against one persistent toolset.

    Before each task the optimizer pass runs on the shared toolset (reorg
    always, merging only when enabled). Promoted tools persist, so later
    tasks can reuse them. A task error is recorded and the curriculum
    continues.
    """
    shared_tools_root = Path(shared_tools_root)
    shared_tools_root.mkdir(parents=True, exist_ok=True)
    outcomes: list[RunOutcome] = []
    for task in tasks:
        if config.run_optimizer:
            opt_backend = backend_for(backends, "toolset-reorg")
            if config.merge_enabled and embedder is not None:
                merge_pipeline(
                    shared_tools_root,
                    backend_for(backends, "tool-merge"),
                    backend_for(backends, "tool-review"),
                    embedder,
                    executor,
                    sim_threshold=config.sim_threshold,
                )
            optimize_toolset(shared_tools_root, opt_backend, threshold=config.reorg_threshold)
        outcome = run_task(task, config, shared_tools_root, backends, executor, base_dir=base_dir)
        outcomes.append(outcome)
    return shared_tools_root, outcomes
