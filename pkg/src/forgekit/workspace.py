"""Per-task agent workspace: directory layout, tool-file snapshots, archives.

Layout under ``<base>/<task_id>/`` (names are a stable on-disk contract):
``question.md``, ``tools/``, ``tool_smith/``, ``logs/``, ``img/``, plus
``report.md`` / ``evaluation.json`` written later by agent sessions and
``iterations/<n>/`` archives written by the engine.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from .errors import ForgekitError

_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")


class WorkspaceError(ForgekitError):
    pass


class WorkspaceExistsError(WorkspaceError):
    """A workspace for this task id already exists and overwrite was not set."""


class WorkspaceIOError(WorkspaceError):
    pass


@dataclass
class TaskSpec:
    """A task to solve: an id, a natural-language prompt, optional inputs."""

    id: str
    prompt: str
    input_files: list[tuple[str, bytes]] = field(default_factory=list)
    mode: str = "zero_shot"
    rubric_ref: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.id or not _ID_RE.match(self.id):
            raise ValueError(f"task id must match [A-Za-z0-9_-]+, got {self.id!r}")
        if not self.prompt:
            raise ValueError("task prompt must be nonempty")


@dataclass(frozen=True)
class WorkspacePaths:
    root: Path
    question: Path
    tools_dir: Path
    tool_smith_dir: Path
    logs_dir: Path
    img_dir: Path
    report: Path
    evaluation: Path


@dataclass(frozen=True)
class ToolSnapshot:
    """Digest of every file under a tools directory, keyed by relative path."""

    entries: Mapping[str, str]


@dataclass(frozen=True)
class EditStats:
    edited_files: int
    created_files: int


def workspace_paths(root: Path) -> WorkspacePaths:
    """Build the path bundle for a workspace root (existing or not)."""
    root = Path(root)
    return WorkspacePaths(
        root=root,
        question=root / "question.md",
        tools_dir=root / "tools",
        tool_smith_dir=root / "tool_smith",
        logs_dir=root / "logs",
        img_dir=root / "img",
        report=root / "report.md",
        evaluation=root / "evaluation.json",
    )


def init_workspace(task: TaskSpec, base_dir: Path, overwrite: bool = False) -> WorkspacePaths:
    """Create the workspace directory tree for a task.

    Deterministic: the same task against the same base dir yields a
    byte-identical question.md and the same directory set.
    """
    base_dir = Path(base_dir)
    if not base_dir.is_dir():
        raise WorkspaceIOError(f"base dir does not exist: {base_dir}")
    root = base_dir / task.id
    if root.exists():
        if not overwrite:
            raise WorkspaceExistsError(f"workspace already exists: {root}")
        shutil.rmtree(root)
    ws = workspace_paths(root)
    try:
        root.mkdir()
        ws.question.write_text(task.prompt, encoding="utf-8")
        for d in (ws.tools_dir, ws.tool_smith_dir, ws.logs_dir, ws.img_dir):
            d.mkdir()
        for rel, data in task.input_files:
            dest = root / rel
            if not dest.resolve().is_relative_to(root.resolve()):
                raise WorkspaceIOError(f"input file escapes workspace: {rel}")
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_bytes(data)
    except OSError as exc:
        raise WorkspaceIOError(str(exc)) from exc
    return ws


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def snapshot_dir(directory: Path) -> ToolSnapshot:
    """Snapshot every file under a directory (recursive, symlink-following)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise WorkspaceIOError(f"not a directory: {directory}")
    entries: dict[str, str] = {}
    try:
        for dirpath, dirnames, filenames in os.walk(directory, followlinks=True):
            dirnames.sort()
            for name in sorted(filenames):
                p = Path(dirpath) / name
                rel = p.relative_to(directory).as_posix()
                entries[rel] = _digest(p.read_bytes())
    except OSError as exc:
        raise WorkspaceIOError(str(exc)) from exc
    return ToolSnapshot(entries=entries)


def snapshot_tools(ws: WorkspacePaths) -> ToolSnapshot:
    return snapshot_dir(ws.tools_dir)


def diff_tool_edits(before: ToolSnapshot, after: ToolSnapshot) -> EditStats:
    """Count edits to shared files and newly created files; ignore deletions."""
    edited = sum(
        1 for k, d in after.entries.items() if k in before.entries and before.entries[k] != d
    )
    created = sum(1 for k in after.entries if k not in before.entries)
    return EditStats(edited_files=edited, created_files=created)


def read_report(ws: WorkspacePaths) -> Optional[str]:
    """Return report.md text, or None when absent.

    All workspace text files are UTF-8; undecodable bytes are an error
    rather than silently lossy text.
    """
    if not ws.report.exists():
        return None
    try:
        return ws.report.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise WorkspaceIOError(f"report.md is not valid UTF-8: {exc}") from exc
    except OSError as exc:
        raise WorkspaceIOError(str(exc)) from exc


def archive_iteration(ws: WorkspacePaths, iteration: int, record: Mapping) -> Path:
    """Archive an iteration record plus the files as they stand right now.

    Re-archiving the same iteration overwrites deterministically, so a
    crashed-and-retried run converges to the same archive.
    """
    if iteration < 1:
        raise ValueError("iteration must be >= 1")
    dest = ws.root / "iterations" / str(iteration)
    try:
        if dest.exists():
            shutil.rmtree(dest)
        dest.mkdir(parents=True)
        (dest / "record.json").write_text(
            json.dumps(dict(record), indent=2, default=str) + "\n", encoding="utf-8"
        )
        for src in (ws.question, ws.report, ws.evaluation):
            if src.exists():
                shutil.copy2(src, dest / src.name)
    except OSError as exc:
        raise WorkspaceIOError(str(exc)) from exc
    return dest
