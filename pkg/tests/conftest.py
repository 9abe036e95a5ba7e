import json
import subprocess
import sys
from pathlib import Path

import pytest

from forgekit.executor import ExecutorConfig
from forgekit.registry import ParamSpec, ToolManifest
from forgekit.workspace import TaskSpec, init_workspace


@pytest.fixture
def executor() -> ExecutorConfig:
    return ExecutorConfig(backend="local")


@pytest.fixture
def ws(tmp_path):
    task = TaskSpec(id="q01", prompt="Prepare a Bell state and verify the correlations.")
    return init_workspace(task, tmp_path)


def install_fixture_corpus(target: Path, core: bool = True, pairs: int = 3, fillers: int = 12) -> int:
    """Install the fixture tool corpus via the shim package's CLI."""
    argv = [
        sys.executable,
        "-m",
        "toolshim",
        "install-fixtures",
        str(target),
        "--pairs",
        str(pairs),
        "--fillers",
        str(fillers),
    ]
    if not core:
        argv.append("--no-core")
    proc = subprocess.run(argv, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return int(proc.stdout.split()[1])


def make_manifest(
    name: str,
    description: str = "A fixture tool.",
    category_path: list[str] | None = None,
    inputs: list[ParamSpec] | None = None,
    outputs: list[ParamSpec] | None = None,
    tests_passed: bool = True,
    **extra,
) -> ToolManifest:
    return ToolManifest(
        name=name,
        description=description,
        category_path=category_path or [],
        inputs=inputs if inputs is not None else [ParamSpec("x", "number")],
        outputs=outputs if outputs is not None else [ParamSpec("value", "number")],
        entrypoint=(f"{name}.py", name),
        provenance={"generated_by": "test", "task_id": "t0", "created_at": "2026-01-01T00:00:00+00:00"},
        tests_passed=tests_passed,
        **extra,
    )


def identity_source(name: str, arg: str = "x", out: str = "value") -> bytes:
    return f"def {name}({arg}):\n    return {{{out!r}: float({arg})}}\n".encode()


def write_playbook(path: Path, playbook: dict) -> Path:
    path.write_text(json.dumps(playbook, indent=2), encoding="utf-8")
    return path
