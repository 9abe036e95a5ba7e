"""Stage prompt templates.

Defaults ship here; deployments can override any stage by pointing the run
config at a JSON file of ``{stage: template}``. Templates are plain
``str.format`` strings over a small set of fields, and instantiation is
deterministic.

Disclosure rule: analysis and execution prompts embed only the root-level
category and tool names plus a pointer to the on-disk index. Nothing below
the root is ever inlined; sessions must navigate.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Optional

from .errors import ForgekitError

STAGES = ("tool-analysis", "tool-generation", "tool-review", "task-execution", "evaluation")


class UnknownStageError(ForgekitError):
    pass


_EVALUATION_INSTRUCTIONS = """\
You are the solution evaluator for this workspace. Read the task statement
in ./question.md and the produced ./report.md (if any), inspect whatever
workspace files you need for context, and judge whether the work is done.

Write a file named evaluation.json in the workspace root containing exactly
this JSON object shape:

  bug_need_fix               boolean - unfixed bugs remain
  script_complete            boolean - every required computation is implemented
  further_simulation_needed  boolean - more simulation runs are required
  result_complete            boolean - every required deliverable is present
  next_step_needed           boolean - see rule below
  next_step_plan             string  - actionable next steps

Rule: next_step_needed is false only when all four of these hold at once:
bug_need_fix is false, script_complete is true, further_simulation_needed
is false, and result_complete is true. Otherwise set it to true and give a
specific, actionable next_step_plan. When nothing remains to do, set
next_step_plan to exactly: "Task complete; no further action needed".
"""

DEFAULT_TEMPLATES: dict[str, str] = {
    "tool-analysis": (
        "Stage: tool analysis.\n\n"
        "Task:\n{question}\n\n"
        "Toolset root categories: {root_categories}\n"
        "Root-level tools: {root_tools}\n"
        "Navigation index: {index_path}\n\n"
        "Survey the toolset by navigating category directories as needed.\n"
        "Produce a plan with three parts: a task analysis decomposing the\n"
        "computation, the list of existing tools to reuse, and the new tool\n"
        "requirements (name, description, method hint, typed inputs and\n"
        "outputs) for anything missing."
    ),
    "tool-generation": (
        "Stage: tool generation.\n\n"
        "Implement the tool described below inside your sandbox directory,\n"
        "together with an executable test script (exit code 0 means pass).\n"
        "The tool must be a general-purpose reusable utility with typed,\n"
        "validated inputs and outputs, and must raise explicit errors instead\n"
        "of returning defaults or suppressing failures.\n\n"
        "{requirement}"
    ),
    "tool-review": (
        "Stage: tool review.\n\n"
        "Review the drafted tool for correctness, interface compliance, and\n"
        "alignment with the requirement. Run extra checks if needed. Return a\n"
        "verdict of approved or revise with the list of issues found and any\n"
        "fixes applied.\n\n{requirement}"
    ),
    "task-execution": (
        "Stage: task execution.\n\n"
        "Task:\n{question}\n\n"
        "Toolset root categories: {root_categories}\n"
        "Root-level tools: {root_tools}\n"
        "Navigation index: {index_path}\n\n"
        "Compose the available tools into executable scripts, run them, debug\n"
        "failures, and compile the results into report.md addressing every\n"
        "part of the task."
    ),
    "evaluation": _EVALUATION_INSTRUCTIONS + "\nTask:\n{question}\n",
}


def load_templates(path: Path) -> dict[str, str]:
    """Merge a JSON template override file over the defaults."""
    overrides = json.loads(Path(path).read_text(encoding="utf-8"))
    merged = dict(DEFAULT_TEMPLATES)
    merged.update({k: str(v) for k, v in overrides.items()})
    return merged


def render_stage_prompt(
    stage: str,
    question: str,
    root_categories: tuple[str, ...] = (),
    root_tools: tuple[str, ...] = (),
    index_path: str = "tools/INDEX.md",
    requirement: str = "",
    templates: Optional[Mapping[str, str]] = None,
) -> str:
    templates = templates or DEFAULT_TEMPLATES
    if stage not in STAGES:
        raise UnknownStageError(stage)
    return templates[stage].format(
        question=question,
        root_categories=", ".join(root_categories) or "(none)",
        root_tools=", ".join(root_tools) or "(none)",
        index_path=index_path,
        requirement=requirement,
    )
