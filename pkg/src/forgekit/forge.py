"""Tool forging: analysis plans, the draft/test/review loop, promotion.

Forging happens in an isolated sandbox under ``tool_smith/task_<id>/<name>/``
and never touches the shared toolset until promotion. Unit tests are plain
executable scripts supplied by the backend (exit 0 = pass), so the engine
stays agnostic about how a tool is tested.

Budgets are strict: a drafting loop spawns at most ``max_rounds`` sessions,
a review loop at most ``max_reviews``, and budget exhaustion reports the
exact count.
"""

from __future__ import annotations

import datetime as _dt
import json
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import registry as reg
from .backends import AgentBackend, AgentRequest
from .errors import ForgekitError
from .executor import ExecutorConfig, JobRequest, submit, tail_log
from .prompts import render_stage_prompt
from .registry import ParamSpec, ToolManifest
from .workspace import TaskSpec, WorkspacePaths

DEFAULT_MAX_ROUNDS = 3
DEFAULT_MAX_REVIEWS = 2

TEST_SCRIPT_NAME = "tests.py"
ANALYSIS_PLAN_FILE = "analysis_plan.json"


class ForgeError(ForgekitError):
    pass


class PlanParseError(ForgeError):
    pass


class DanglingReuseError(ForgeError):
    """The plan reuses a tool name that does not resolve in the registry."""


class BudgetExhaustedError(ForgeError):
    def __init__(self, what: str, count: int, detail: str = ""):
        super().__init__(f"{what} budget exhausted after {count} rounds" + (f": {detail}" if detail else ""))
        self.what = what
        self.count = count


@dataclass
class ToolRequirement:
    """An abstract contract for a tool that does not exist yet."""

    name: str
    description: str
    method_hint: str = ""
    inputs: list[ParamSpec] = field(default_factory=list)
    outputs: list[ParamSpec] = field(default_factory=list)

    @classmethod
    def from_dict(cls, d: dict) -> "ToolRequirement":
        return cls(
            name=d["name"],
            description=d.get("description", ""),
            method_hint=d.get("method_hint", ""),
            inputs=[ParamSpec.from_dict(p) for p in d.get("inputs", [])],
            outputs=[ParamSpec.from_dict(p) for p in d.get("outputs", [])],
        )

    def render(self) -> str:
        sig_in = ", ".join(f"{p.name}: {p.semantic_type}" for p in self.inputs)
        sig_out = ", ".join(f"{p.name}: {p.semantic_type}" for p in self.outputs)
        hint = f"\nMethod hint: {self.method_hint}" if self.method_hint else ""
        return f"Requirement: {self.name}({sig_in}) -> {sig_out}\n{self.description}{hint}"


@dataclass
class AnalysisPlan:
    task_analysis: str
    reuse: list[str] = field(default_factory=list)
    requirements: list[ToolRequirement] = field(default_factory=list)


@dataclass
class ReviewRecord:
    iteration: int
    verdict: str  # "approved" | "revise"
    issues: list[str] = field(default_factory=list)
    fixes_applied: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "verdict": self.verdict,
            "issues": self.issues,
            "fixes_applied": self.fixes_applied,
        }


@dataclass
class DraftArtifact:
    requirement: ToolRequirement
    sandbox_dir: Path
    source: bytes = b""
    manifest: Optional[ToolManifest] = None
    test_results: list[tuple[str, bool, str]] = field(default_factory=list)
    reviews: list[ReviewRecord] = field(default_factory=list)
    rounds_used: int = 0

    @property
    def tests_passed(self) -> bool:
        return bool(self.test_results) and all(ok for _, ok, _ in self.test_results)

    @property
    def approved(self) -> bool:
        return bool(self.reviews) and self.reviews[-1].verdict == "approved"


def analyze_task(
    task: TaskSpec,
    tools_root: Path,
    backend: AgentBackend,
    ws: Optional[WorkspacePaths] = None,
) -> AnalysisPlan:
    """Run one analysis session and parse its plan.

    The plan arrives either as the session's structured payload (scripted
    backends) or as ``tool_smith/analysis_plan.json`` written into the
    workspace (file-based adapters). Reuse names must all resolve.
    """
    root_node = reg.list_children(tools_root)
    prompt = render_stage_prompt(
        "tool-analysis",
        task.prompt,
        root_categories=root_node.subcategories,
        root_tools=root_node.tools,
        index_path=str(Path(tools_root) / reg.INDEX_NAME),
    )
    workspace_root = ws.root if ws is not None else Path(tools_root).parent
    response = backend.spawn_session(
        AgentRequest(stage="tool-analysis", prompt=prompt, workspace_root=workspace_root)
    )
    if not response.ok:
        raise ForgeError(f"analysis session failed: {response.exit_status}")
    raw = (response.payload or {}).get("plan")
    if raw is None and ws is not None:
        plan_file = ws.tool_smith_dir / ANALYSIS_PLAN_FILE
        if plan_file.exists():
            try:
                raw = json.loads(plan_file.read_text(encoding="utf-8"))
            except ValueError as exc:
                raise PlanParseError(f"malformed {ANALYSIS_PLAN_FILE}: {exc}") from exc
    if raw is None:
        raise PlanParseError("analysis session produced no plan payload")
    try:
        plan = AnalysisPlan(
            task_analysis=raw.get("task_analysis", ""),
            reuse=list(raw.get("reuse", [])),
            requirements=[ToolRequirement.from_dict(r) for r in raw.get("requirements", [])],
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise PlanParseError(f"malformed plan payload: {exc}") from exc
    for name in plan.reuse:
        try:
            reg.resolve(tools_root, name)
        except reg.ToolNotFoundError:
            raise DanglingReuseError(name) from None
    for requirement in plan.requirements:
        try:
            reg.resolve(tools_root, requirement.name)
        except reg.ToolNotFoundError:
            continue
        raise PlanParseError(
            f"requirement {requirement.name!r} collides with an existing tool"
        )
    return plan


@dataclass(frozen=True)
class ValidationVerdict:
    accepted: bool
    reason: str = ""


def validate_requirement(
    req: ToolRequirement,
    backend: AgentBackend,
    task_id: Optional[str] = None,
    workspace_root: Optional[Path] = None,
) -> ValidationVerdict:
    """Check that a requirement is a reusable utility, not a one-off script.

    Two deterministic floor rules run first: a contract with no inputs and
    no outputs is degenerate, and a description that embeds the literal task
    id is a task-specific script by definition. The backend validator can
    only reject further, never un-reject.
    """
    if not req.inputs and not req.outputs:
        return ValidationVerdict(False, "degenerate contract: no inputs and no outputs")
    if task_id and re.search(rf"\b{re.escape(task_id)}\b", req.description):
        return ValidationVerdict(False, f"description references the task id {task_id!r}")
    prompt = (
        "Stage: requirement validation.\n\n"
        "Is the following tool requirement a general-purpose reusable utility\n"
        "(accept) or a one-time task-specific script (reject)?\n\n" + req.render()
    )
    response = backend.spawn_session(
        AgentRequest(
            stage="requirement-validation",
            prompt=prompt,
            workspace_root=workspace_root or Path.cwd(),
        )
    )
    if not response.ok:
        raise ForgeError(f"validator session failed: {response.exit_status}")
    verdict = (response.payload or {}).get("verdict", "accept")
    if isinstance(verdict, dict):
        return ValidationVerdict(verdict.get("accept", True), verdict.get("reason", ""))
    if str(verdict).lower() == "accept":
        return ValidationVerdict(True)
    return ValidationVerdict(False, f"validator rejected: {verdict}")


def sandbox_for(ws: WorkspacePaths, task_id: str, req_name: str) -> Path:
    return ws.tool_smith_dir / f"task_{task_id}" / req_name


def _run_sandbox_tests(sandbox: Path, ws: WorkspacePaths, executor: ExecutorConfig, label: str):
    job = JobRequest(
        command=[sys.executable, TEST_SCRIPT_NAME],
        working_dir=sandbox,
        timeout=120.0,
        label=label,
    )
    return submit(job, ws, executor)


def _synthesize_manifest(req: ToolRequirement, backend_id: str, task_id: str) -> ToolManifest:
    return ToolManifest(
        name=req.name,
        description=req.description,
        category_path=[],
        version=1,
        inputs=req.inputs,
        outputs=req.outputs,
        entrypoint=(f"{req.name}.py", req.name),
        provenance={
            "generated_by": backend_id,
            "task_id": task_id,
            "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        },
        tests_passed=False,
    )


def forge_tool(
    req: ToolRequirement,
    ws: WorkspacePaths,
    backend: AgentBackend,
    executor: ExecutorConfig,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    task_id: Optional[str] = None,
) -> DraftArtifact:
    """Draft-and-test loop: at most ``max_rounds`` generation sessions.

    Each round the backend (re)writes the source and test script in the
    sandbox; the engine runs the tests and feeds failures back into the next
    round's prompt. Returns a draft whose tests pass, or raises after the
    budget is spent.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    task_id = task_id or ws.root.name
    sandbox = sandbox_for(ws, task_id, req.name)
    sandbox.mkdir(parents=True, exist_ok=True)
    draft = DraftArtifact(requirement=req, sandbox_dir=sandbox)
    failure_context = ""
    for round_no in range(1, max_rounds + 1):
        prompt = render_stage_prompt("tool-generation", "", requirement=req.render())
        if failure_context:
            prompt += f"\n\nPrevious round's test failures:\n{failure_context}"
        response = backend.spawn_session(
            AgentRequest(stage="tool-generation", prompt=prompt, workspace_root=ws.root)
        )
        draft.rounds_used = round_no
        if not response.ok:
            raise ForgeError(f"generation session failed: {response.exit_status}")
        source_file = sandbox / f"{req.name}.py"
        if not source_file.exists() or not (sandbox / TEST_SCRIPT_NAME).exists():
            raise ForgeError(
                f"generation round {round_no} left no source or {TEST_SCRIPT_NAME} in {sandbox}"
            )
        result = _run_sandbox_tests(sandbox, ws, executor, f"forge_{req.name}_r{round_no}")
        passed = result.exit_code == 0
        detail = ""
        if not passed:
            detail = (
                tail_log(result.stderr_log, 20)
                or tail_log(result.stdout_log, 20)
                or f"tests exited {result.exit_code} with no output"
            )
        draft.test_results = [(TEST_SCRIPT_NAME, passed, detail)]
        if passed:
            draft.source = source_file.read_bytes()
            manifest = _synthesize_manifest(req, backend.id, task_id)
            manifest_path = sandbox / f"{req.name}{reg.MANIFEST_SUFFIX}"
            manifest_path.write_text(manifest.to_json(), encoding="utf-8")
            draft.manifest = manifest
            return draft
        failure_context = detail
    raise BudgetExhaustedError("forge", max_rounds, failure_context)


def review_tool(
    draft: DraftArtifact,
    backend: AgentBackend,
    executor: ExecutorConfig,
    ws: WorkspacePaths,
    max_reviews: int = DEFAULT_MAX_REVIEWS,
) -> DraftArtifact:
    """Reviewer loop: at most ``max_reviews`` sessions over a passing draft.

    A revise verdict means the reviewer edited the source; the revised tool
    re-runs its tests before the next review. Every record is persisted as
    ``review_iter_<n>.json`` in the sandbox for audit.
    """
    if not draft.tests_passed:
        raise ForgeError("cannot review a draft whose tests do not pass")
    if max_reviews < 1:
        raise ValueError("max_reviews must be >= 1")
    req = draft.requirement
    for review_no in range(1, max_reviews + 1):
        prompt = render_stage_prompt("tool-review", "", requirement=req.render())
        response = backend.spawn_session(
            AgentRequest(stage="tool-review", prompt=prompt, workspace_root=ws.root)
        )
        if not response.ok:
            raise ForgeError(f"review session failed: {response.exit_status}")
        raw = (response.payload or {}).get("review") or {}
        record = ReviewRecord(
            iteration=review_no,
            verdict=raw.get("verdict", "revise"),
            issues=list(raw.get("issues", [])),
            fixes_applied=list(raw.get("fixes_applied", [])),
        )
        draft.reviews.append(record)
        (draft.sandbox_dir / f"review_iter_{review_no}.json").write_text(
            json.dumps(record.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
        if record.verdict == "approved":
            draft.source = (draft.sandbox_dir / f"{req.name}.py").read_bytes()
            return draft
        result = _run_sandbox_tests(draft.sandbox_dir, ws, executor, f"review_{req.name}_r{review_no}")
        passed = result.exit_code == 0
        detail = "" if passed else tail_log(result.stderr_log, 20)
        draft.test_results = [(TEST_SCRIPT_NAME, passed, detail)]
    raise BudgetExhaustedError("review", max_reviews)


def promote_tool(draft: DraftArtifact, tools_root: Path) -> Path:
    """Copy an approved, passing draft into the shared toolset root.

    The manifest is registered with ``tests_passed=true`` and an empty
    category path; the sandbox stays behind for audit.
    """
    if not draft.tests_passed:
        raise ForgeError("refusing to promote: tests not passing")
    if not draft.approved:
        raise ForgeError("refusing to promote: no approving review")
    manifest = draft.manifest
    if manifest is None:
        raise ForgeError("draft has no manifest")
    promoted = ToolManifest.from_dict(manifest.to_dict())
    promoted.tests_passed = True
    promoted.category_path = []
    return reg.register(promoted, draft.source, tools_root)


@dataclass(frozen=True)
class ContractCheckResult:
    passed: bool
    reasons: tuple[str, ...] = ()


def _violating_input(manifest: ToolManifest) -> dict:
    """Build an input record that must fail the manifest's schema."""
    wrong_by_type = {
        "integer": "definitely-not-an-integer",
        "number": "definitely-not-a-number",
        "string": 12345,
        "boolean": "yes",
        "enum": "__not_an_enum_member__",
        "list": {"not": "a list"},
        "record": ["not", "a", "record"],
        "file-path": 0,
    }
    if manifest.inputs:
        return {p.name: wrong_by_type[p.semantic_type] for p in manifest.inputs}
    return {"__unexpected__": True}


def contract_check(
    name: str,
    tools_root: Path,
    executor: ExecutorConfig,
    logs_dir: Optional[Path] = None,
    shim_command: Sequence[str] = reg.DEFAULT_SHIM_COMMAND,
) -> ContractCheckResult:
    """Behavioral lint for the no-silent-failure rule.

    (a) A deliberately schema-violating input must come back as a structured
    error, never as a defaulted success. (b) If the manifest declares a
    probe input, it must produce schema-conforming output.
    """
    manifest, source_path = reg.resolve(tools_root, name)
    return check_manifest(
        source_path.parent / f"{name}{reg.MANIFEST_SUFFIX}",
        executor,
        logs_dir=logs_dir or source_path.parent,
        shim_command=shim_command,
    )


def check_manifest(
    manifest_path: Path,
    executor: ExecutorConfig,
    logs_dir: Path,
    shim_command: Sequence[str] = reg.DEFAULT_SHIM_COMMAND,
) -> ContractCheckResult:
    # The shim runs with its own cwd; the manifest path must survive that.
    manifest_path = Path(manifest_path).resolve()
    manifest = ToolManifest.load(manifest_path)
    reasons: list[str] = []

    bad_input = _violating_input(manifest)
    doc, exit_code = _invoke_wire(manifest_path, manifest.name, bad_input, executor, logs_dir, shim_command)
    if doc is None:
        reasons.append("no wire output document on invalid input")
    elif doc.get("ok"):
        reasons.append("silent fallback on invalid input")
    elif exit_code == 0:
        reasons.append("error document with success exit code on invalid input")

    if manifest.probe_input is not None:
        doc, exit_code = _invoke_wire(
            manifest_path, manifest.name, manifest.probe_input, executor, logs_dir, shim_command
        )
        if doc is None or not doc.get("ok") or exit_code != 0:
            reasons.append("probe input did not produce a successful result")
        else:
            violations = reg.check_record(manifest.outputs, doc.get("outputs") or {}, "output")
            if violations:
                reasons.append("probe output violates the output schema: " + "; ".join(violations))

    return ContractCheckResult(passed=not reasons, reasons=tuple(reasons))


def _invoke_wire(
    manifest_path: Path,
    name: str,
    inputs: dict,
    executor: ExecutorConfig,
    logs_dir: Path,
    shim_command: Sequence[str],
) -> tuple[Optional[dict], int]:
    wire = json.dumps({"tool": name, "inputs": inputs}).encode("utf-8")
    job = JobRequest(
        command=[*shim_command, str(manifest_path)],
        working_dir=manifest_path.parent,
        timeout=60.0,
        label=f"contract_{name}",
        stdin_data=wire,
    )
    result = submit(job, logs_dir, executor)
    raw = Path(result.stdout_log).read_bytes().strip()
    if not raw:
        return None, result.exit_code
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError):
        return None, result.exit_code
    if not isinstance(doc, dict):
        return None, result.exit_code
    return doc, result.exit_code
