#!/usr/bin/env python3
"""End-to-end demo: solve one task with the scripted mock backend.

Builds a temporary workspace, runs the full zero-shot pipeline (analysis,
forge, review, promote, execute, evaluate) against an inline playbook, and
prints the outcome plus the resulting workspace tree.

Usage: python scripts/run_mock_solve.py [--keep DIR]
"""

import argparse
import json
import tempfile
from pathlib import Path

from forgekit.backends import MockBackend
from forgekit.engine import RunConfig, RunMode, run_task
from forgekit.executor import ExecutorConfig
from forgekit.workspace import TaskSpec

REQ = {
    "name": "harmonic_mean",
    "description": "Harmonic mean of a nonempty list of positive numbers.",
    "method_hint": "plain arithmetic",
    "inputs": [{"name": "values", "type": "list", "required": True,
                "item": {"name": "element", "type": "number", "required": True}}],
    "outputs": [{"name": "value", "type": "number", "required": True}],
}

SOURCE = '''\
def harmonic_mean(values):
    """Harmonic mean of positive numbers; raises on bad input."""
    if not values:
        raise ValueError("values must be nonempty")
    if any(v <= 0 for v in values):
        raise ValueError("values must be positive")
    return {"value": len(values) / sum(1.0 / v for v in values)}
'''

TESTS = """\
import sys
from harmonic_mean import harmonic_mean

assert abs(harmonic_mean([1.0, 4.0, 4.0])["value"] - 2.0) < 1e-12
try:
    harmonic_mean([])
except ValueError:
    pass
else:
    sys.exit(1)
sys.exit(0)
"""

REPORT = """\
# Results

Forged `harmonic_mean` and applied it to the sample set:
harmonic_mean([1, 4, 4]) = 2.0
"""


def build_playbook() -> dict:
    sandbox = "tool_smith/task_demo01/harmonic_mean"
    return {
        "demo01": {
            "tool-analysis": {
                "1": {
                    "plan": {
                        "task_analysis": "One reusable statistic tool is missing.",
                        "reuse": [],
                        "requirements": [REQ],
                    },
                    "token_usage": {"input": 2400, "output": 350},
                }
            },
            "requirement-validation": {"*": {"verdict": "accept"}},
            "tool-generation": {
                "1": {
                    "files": [
                        {"path": f"{sandbox}/harmonic_mean.py", "content": SOURCE},
                        {"path": f"{sandbox}/tests.py", "content": TESTS},
                    ],
                    "token_usage": {"input": 5200, "output": 900},
                }
            },
            "tool-review": {"1": {"review": {"verdict": "approved"}}},
            "task-execution": {
                "1": {
                    "files": [{"path": "report.md", "content": REPORT}],
                    "token_usage": {"input": 3100, "output": 420},
                }
            },
            "evaluation": {
                "1": {
                    "evaluation": {
                        "bug_need_fix": False,
                        "script_complete": True,
                        "further_simulation_needed": False,
                        "result_complete": True,
                        "next_step_needed": False,
                        "next_step_plan": "Task complete; no further action needed",
                    },
                    "token_usage": {"input": 1800, "output": 150},
                }
            },
        }
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--keep", help="run inside this directory instead of a temp dir")
    args = parser.parse_args()

    base = Path(args.keep) if args.keep else Path(tempfile.mkdtemp(prefix="forgekit_demo_"))
    base.mkdir(parents=True, exist_ok=True)

    task = TaskSpec(id="demo01", prompt="Compute the harmonic mean of [1, 4, 4] and report it.")
    backend = MockBackend(build_playbook())
    outcome = run_task(
        task,
        RunConfig(mode=RunMode.ZERO_SHOT, overwrite_workspace=True),
        None,
        backend,
        ExecutorConfig(),
        base_dir=base,
    )

    print(f"status: {outcome.status}")
    print(f"iterations: {len(outcome.iterations)}")
    print(f"sessions: {[s.stage for it in outcome.iterations for s in it.stage_sessions]}")
    print(f"workspace: {base / task.id}")
    for path in sorted((base / task.id).rglob("*")):
        if path.is_file():
            print(f"  {path.relative_to(base / task.id)}")
    print(json.dumps(json.loads((base / task.id / "run_outcome.json").read_text())["iterations"][0]["edit_stats"]))


if __name__ == "__main__":
    main()
