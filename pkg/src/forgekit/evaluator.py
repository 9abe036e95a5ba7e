"""Solution evaluation: parse evaluation.json and decide continue/stop.

The evaluation session writes a flat JSON object with five boolean flags
plus a plan string. The flags are redundant by construction:
``next_step_needed`` must equal "any of the four conditions failed", and a
payload that breaks that rule is rejected rather than trusted.

``decide_next`` is a pure function: completion happens exactly when no bug
needs fixing, the script is complete, no further simulation is needed, and
the results are complete.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from typing import Optional, Union

from .backends import AgentBackend, AgentRequest, AgentResponse
from .errors import ForgekitError
from .workspace import WorkspacePaths

logger = logging.getLogger(__name__)

COMPLETION_SENTINEL = "Task complete; no further action needed"

REQUIRED_FIELDS = (
    "bug_need_fix",
    "script_complete",
    "further_simulation_needed",
    "result_complete",
    "next_step_needed",
    "next_step_plan",
)


class EvaluationError(ForgekitError):
    pass


class EvaluationFileMissingError(EvaluationError):
    pass


class EvaluationParseError(EvaluationError):
    pass


class InconsistentFlagsError(EvaluationError):
    """next_step_needed contradicts the four condition flags."""


@dataclass(frozen=True)
class EvaluationResult:
    bug_need_fix: bool
    script_complete: bool
    further_simulation_needed: bool
    result_complete: bool
    next_step_needed: bool
    next_step_plan: str

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in REQUIRED_FIELDS}


@dataclass(frozen=True)
class Decision:
    kind: str  # "stop_complete" | "continue" | "stop_failed"
    plan: Optional[str] = None


def _all_conditions_met(bug: bool, script: bool, further: bool, result: bool) -> bool:
    return (not bug) and script and (not further) and result


def parse_evaluation(data: Union[bytes, str]) -> EvaluationResult:
    """Strictly parse an evaluation payload.

    All six fields are required with exact JSON types (booleans, string);
    unknown extra fields are ignored, since real agent output tends to add
    commentary keys. The flag-consistency rule is enforced here, and a
    complete verdict gets its plan normalized to the completion sentinel.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EvaluationParseError(f"not UTF-8: {exc}") from exc
    try:
        doc = json.loads(data)
    except ValueError as exc:
        raise EvaluationParseError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise EvaluationParseError("payload must be a JSON object")
    for f in REQUIRED_FIELDS:
        if f not in doc:
            raise EvaluationParseError(f"missing field: {f}")
    for f in REQUIRED_FIELDS[:-1]:
        if type(doc[f]) is not bool:
            raise EvaluationParseError(f"{f}: expected a boolean, got {type(doc[f]).__name__}")
    if not isinstance(doc["next_step_plan"], str):
        raise EvaluationParseError("next_step_plan: expected a string")

    expected_next = not _all_conditions_met(
        doc["bug_need_fix"],
        doc["script_complete"],
        doc["further_simulation_needed"],
        doc["result_complete"],
    )
    if doc["next_step_needed"] != expected_next:
        raise InconsistentFlagsError(
            f"next_step_needed={doc['next_step_needed']} contradicts the condition flags"
        )
    plan = doc["next_step_plan"]
    if not doc["next_step_needed"] and plan != COMPLETION_SENTINEL:
        logger.warning("complete verdict with nonstandard plan %r; normalizing", plan)
        plan = COMPLETION_SENTINEL
    return EvaluationResult(
        bug_need_fix=doc["bug_need_fix"],
        script_complete=doc["script_complete"],
        further_simulation_needed=doc["further_simulation_needed"],
        result_complete=doc["result_complete"],
        next_step_needed=doc["next_step_needed"],
        next_step_plan=plan,
    )


def evaluate(ws: WorkspacePaths, backend: AgentBackend, prompt: Optional[str] = None) -> EvaluationResult:
    """Run one evaluation session and return its validated result.

    The session must leave ``evaluation.json`` in the workspace. A missing
    ``report.md`` overrides ``result_complete`` to false no matter what the
    payload claims: the report is the deliverable, and its absence can never
    count as completion.
    """
    if not ws.question.exists():
        raise EvaluationError(f"question.md missing in {ws.root}")
    if prompt is None:
        from .prompts import render_stage_prompt

        prompt = render_stage_prompt("evaluation", ws.question.read_text(encoding="utf-8"))
    response: AgentResponse = backend.spawn_session(
        AgentRequest(stage="evaluation", prompt=prompt, workspace_root=ws.root)
    )
    if not response.ok:
        raise EvaluationError(f"evaluation session failed: {response.exit_status}")
    if not ws.evaluation.exists():
        raise EvaluationFileMissingError(f"session wrote no evaluation.json in {ws.root}")
    result = parse_evaluation(ws.evaluation.read_bytes())
    if not ws.report.exists() and result.result_complete:
        logger.warning("report.md missing; overriding result_complete to false")
        result = replace(
            result,
            result_complete=False,
            next_step_needed=True,
            next_step_plan=(
                result.next_step_plan
                if result.next_step_needed
                else "Write report.md: the report is missing from the workspace."
            ),
        )
    return result


def decide_next(evaluation: EvaluationResult, iteration: int, max_iterations: int) -> Decision:
    """Continue/stop decision for one iteration. Pure function."""
    if not evaluation.next_step_needed:
        return Decision(kind="stop_complete")
    if iteration < max_iterations:
        return Decision(kind="continue", plan=evaluation.next_step_plan)
    return Decision(kind="stop_failed")
